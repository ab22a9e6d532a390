use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_budget, kernel_shap, CoalitionBudget, ShapValues};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::TrainedModel;
use crate::rng;

pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

/// Reference rows (untransformed feature space) drawn from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    pub indices: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
}

impl BackgroundSet {
    /// Uniform sample without replacement of `min(size, |train|)` training rows.
    pub fn sample(dataset: &Dataset, train_indices: &[usize], size: usize, seed: u64) -> Result<Self> {
        if train_indices.is_empty() || size == 0 {
            return Err(Error::invalid("background set needs at least one training row"));
        }
        let k = size.min(train_indices.len());
        let mut rng = rng::seeded(seed);
        let mut indices: Vec<usize> = index::sample(&mut rng, train_indices.len(), k)
            .into_iter()
            .map(|i| train_indices[i])
            .collect();
        indices.sort_unstable();
        let rows = indices.iter().map(|&i| dataset.row(i).to_vec()).collect();
        Ok(BackgroundSet { indices, rows, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    model_id: String,
    instance_id: usize,
    budget: CoalitionBudget,
    seed: u64,
}

/// Memo of per-(model, instance) explanations. Each key has its own lock, so
/// one thread computes an entry while others wanting the same key wait and
/// then read the finished value; other keys proceed independently.
#[derive(Debug, Default)]
pub struct ShapCache {
    entries: Mutex<HashMap<CacheKey, Arc<Mutex<Option<ShapValues>>>>>,
}

impl ShapCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries
            .lock()
            .expect("cache lock poisoned")
            .values()
            .filter(|slot| slot.lock().map(|s| s.is_some()).unwrap_or(false))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_compute(&self, key: CacheKey, compute: impl FnOnce() -> Result<ShapValues>) -> Result<ShapValues> {
        let slot = {
            let mut map = self.entries.lock().expect("cache lock poisoned");
            Arc::clone(map.entry(key).or_default())
        };
        let mut guard = slot.lock().expect("cache slot poisoned");
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        let v = compute()?;
        *guard = Some(v.clone());
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLocalImportance {
    pub model_id: String,
    pub feature_names: Vec<String>,
    /// Mean attribution per feature over the selection.
    pub mean_phi: Vec<f64>,
    pub mean_base_value: f64,
    pub mean_prediction: f64,
    /// Every per-instance explanation used full enumeration.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub instance_ids: Vec<usize>,
    pub models: Vec<ModelLocalImportance>,
    /// Dataset feature names (untransformed).
    pub feature_names: Vec<String>,
    /// Mean untransformed value of each dataset feature over the selection.
    pub mean_feature_values: Vec<f64>,
}

/// Explains every (model, instance) pair of the selection and averages the
/// attributions per model. Instance seeds depend only on (seed, model,
/// instance), so a cached explanation is identical to a fresh one.
#[allow(clippy::too_many_arguments)]
pub fn shap_for_selection(
    models: &[&TrainedModel],
    instance_ids: &[usize],
    dataset: &Dataset,
    valid_ids: &[usize],
    background: &BackgroundSet,
    budget: Option<usize>,
    seed: u64,
    cache: &ShapCache,
) -> Result<SelectionSummary> {
    if instance_ids.is_empty() {
        return Err(Error::invalid("empty selection"));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = instance_ids.iter().find(|&&i| !seen.insert(i)) {
        return Err(Error::invalid(format!("instance {dup} selected twice")));
    }
    let valid: BTreeSet<usize> = valid_ids.iter().copied().collect();
    if let Some(bad) = instance_ids.iter().find(|i| !valid.contains(i)) {
        return Err(Error::invalid(format!("instance {bad} is not in the evaluation split")));
    }

    let per_model: Vec<(Vec<Vec<f64>>, CoalitionBudget)> = models
        .iter()
        .map(|m| {
            let bg = m.transform.apply_rows(&background.rows);
            let n = budget.unwrap_or_else(|| default_budget(m.n_features()));
            (bg, CoalitionBudget::Auto(n))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|mi| instance_ids.iter().map(move |&id| (mi, id)))
        .collect();
    let explained: Vec<ShapValues> = jobs
        .par_iter()
        .map(|&(mi, id)| {
            let model = models[mi];
            let (bg, b) = &per_model[mi];
            let key = CacheKey {
                model_id: model.id.clone(),
                instance_id: id,
                budget: *b,
                seed,
            };
            cache.get_or_compute(key, || {
                let x = model.transform.apply_row(dataset.row(id));
                let predict = |row: &[f64]| model.predict_row(row);
                let s = rng::derive_seed(seed, &format!("{}:{id}", model.id));
                kernel_shap(&predict, &x, bg, *b, s)
            })
        })
        .collect::<Result<_>>()?;

    let k = instance_ids.len() as f64;
    let summaries = models
        .iter()
        .enumerate()
        .map(|(mi, model)| {
            let vals = &explained[mi * instance_ids.len()..(mi + 1) * instance_ids.len()];
            let mut mean_phi = vec![0.0; model.n_features()];
            for v in vals {
                for (a, p) in mean_phi.iter_mut().zip(&v.phi) {
                    *a += p;
                }
            }
            mean_phi.iter_mut().for_each(|a| *a /= k);
            ModelLocalImportance {
                model_id: model.id.clone(),
                feature_names: model.feature_names.clone(),
                mean_phi,
                mean_base_value: vals.iter().map(|v| v.base_value).sum::<f64>() / k,
                mean_prediction: vals.iter().map(|v| v.prediction).sum::<f64>() / k,
                exact: vals.iter().all(|v| v.exact),
            }
        })
        .collect();

    let m = dataset.n_features();
    let mut mean_feature_values = vec![0.0; m];
    for &id in instance_ids {
        for (a, v) in mean_feature_values.iter_mut().zip(dataset.row(id)) {
            *a += v;
        }
    }
    mean_feature_values.iter_mut().for_each(|a| *a /= k);

    Ok(SelectionSummary {
        instance_ids: instance_ids.to_vec(),
        models: summaries,
        feature_names: dataset.schema().names(),
        mean_feature_values,
    })
}
