//! Runs the algorithm × variant grid and assembles an immutable artifact.

mod artifact;

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::{normalize_importance, ImportanceVector};
use crate::data::{self, Dataset, SplitIndices, SplitRatios};
use crate::error::{Error, Result};
use crate::explain::{BackgroundSet, DEFAULT_BACKGROUND_SIZE};
use crate::metrics::{compute_metrics, rank_metric_columns, RankedMetricsTable};
use crate::models::{
    apply_variant_transform, predict_proba, raw_global_importance, train_model, tune_hyperparameters, AlgorithmKind,
    Hyperparameters, TrainedModel, TransformRecord, Variant,
};
use crate::rng::derive_seed;
use crate::DEFAULT_THRESHOLD;

pub use artifact::{load_artifact, save_artifact, Manifest, ManifestModel, ARTIFACT_SCHEMA_VERSION};
pub use crate::models::model_display_name;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        label_column: String,
        positive_label: String,
    },
    Synth {
        n: usize,
        m: usize,
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv {
                path,
                label_column,
                positive_label,
            } => data::load_csv(path, label_column, positive_label),
            DataSource::Synth { n, m, seed } => data::synth_dataset(*n, *m, *seed).map(|(ds, _)| ds),
        }
    }

    pub(crate) fn label_column(&self) -> &str {
        match self {
            DataSource::Csv { label_column, .. } => label_column,
            DataSource::Synth { .. } => "label",
        }
    }

    pub(crate) fn positive_label(&self) -> &str {
        match self {
            DataSource::Csv { positive_label, .. } => positive_label,
            DataSource::Synth { .. } => "1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub ratios: SplitRatios,
    pub seed: u64,
    pub hpo_budget: usize,
    pub algorithms: Vec<AlgorithmKind>,
    pub variants: Vec<Variant>,
    /// Store a verbatim copy of the data in the artifact directory.
    pub copy_dataset: bool,
    pub background_size: usize,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, seed: u64) -> Self {
        ExperimentConfig {
            source,
            ratios: SplitRatios::default(),
            seed,
            hpo_budget: 10,
            algorithms: AlgorithmKind::ALL.to_vec(),
            variants: Variant::ALL.to_vec(),
            copy_dataset: true,
            background_size: DEFAULT_BACKGROUND_SIZE,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.variants.is_empty() {
            return Err(Error::invalid("configure at least one algorithm and one variant"));
        }
        let dup = |n: usize, m: usize| n != m;
        let mut a = self.algorithms.clone();
        a.sort();
        a.dedup();
        let mut v = self.variants.clone();
        v.sort();
        v.dedup();
        if dup(a.len(), self.algorithms.len()) || dup(v.len(), self.variants.len()) {
            return Err(Error::invalid("algorithms and variants must not repeat"));
        }
        if self.hpo_budget == 0 {
            return Err(Error::invalid("hpo_budget must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPredictions {
    pub model_id: String,
    pub instance_ids: Vec<usize>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub created_unix_secs: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentArtifact {
    pub id: String,
    pub config: ExperimentConfig,
    pub dataset: Arc<Dataset>,
    pub dataset_fingerprint: String,
    pub split: SplitIndices,
    pub models: Vec<TrainedModel>,
    pub predictions: Vec<ModelPredictions>,
    pub metrics: RankedMetricsTable,
    pub global_fi: Vec<ImportanceVector>,
    pub metadata: ArtifactMetadata,
}

impl ExperimentArtifact {
    pub fn model(&self, id: &str) -> Option<&TrainedModel> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn predictions(&self, model_id: &str) -> Option<&ModelPredictions> {
        self.predictions.iter().find(|p| p.model_id == model_id)
    }

    pub fn global_fi(&self, model_id: &str) -> Option<&ImportanceVector> {
        self.global_fi.iter().find(|v| v.model_id == model_id)
    }

    pub fn test_labels(&self) -> Vec<u8> {
        self.split.test.iter().map(|&i| self.dataset.labels()[i]).collect()
    }

    /// Background rows for local explanations, fixed by the config seed.
    pub fn background(&self) -> Result<BackgroundSet> {
        BackgroundSet::sample(
            &self.dataset,
            &self.split.train,
            self.config.background_size,
            derive_seed(self.config.seed, "background"),
        )
    }

    pub fn explain_seed(&self) -> u64 {
        derive_seed(self.config.seed, "explain")
    }
}

fn artifact_id(config: &ExperimentConfig, fingerprint: &str) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config)?);
    h.update(fingerprint.as_bytes());
    Ok(format!("exp-{}", &hex::encode(h.finalize())[..12]))
}

struct Cell {
    model: TrainedModel,
    predictions: ModelPredictions,
    importance: ImportanceVector,
}

fn run_cell(
    algorithm: AlgorithmKind,
    variant: Variant,
    transformed: &(Dataset, TransformRecord),
    split: &SplitIndices,
    config: &ExperimentConfig,
) -> Result<Cell> {
    let (ds, record) = transformed;
    let seed = derive_seed(config.seed, &format!("{}:{}", algorithm.short_name(), variant.id()));
    let hp = if variant.tuned() {
        tune_hyperparameters(
            algorithm,
            ds,
            &split.train,
            &split.validation,
            config.hpo_budget,
            derive_seed(seed, "tune"),
        )?
    } else {
        Hyperparameters::defaults(algorithm)
    };
    let model = train_model(algorithm, &hp, ds, &split.train, seed)?.with_variant(variant, record.clone());
    let test_rows: Vec<Vec<f64>> = split.test.iter().map(|&i| ds.row(i).to_vec()).collect();
    let probabilities = predict_proba(&model, &test_rows)?;
    let importance = normalize_importance(&model.id, &model.feature_names, &raw_global_importance(&model))?;
    log::info!("trained {}", model.display_name);
    Ok(Cell {
        predictions: ModelPredictions {
            model_id: model.id.clone(),
            instance_ids: split.test.clone(),
            probabilities,
        },
        importance,
        model,
    })
}

/// Loads, splits, and trains every configured (algorithm, variant) cell in
/// parallel. Per-cell seeds are derived from the config seed and the cell
/// identity, so the artifact content is a pure function of the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentArtifact> {
    config.validate()?;
    let dataset = config.source.load()?;
    run_experiment_on(config, dataset)
}

/// As [`run_experiment`] with an already-loaded dataset.
pub fn run_experiment_on(config: &ExperimentConfig, dataset: Dataset) -> Result<ExperimentArtifact> {
    config.validate()?;
    let split = data::make_splits(&dataset, config.ratios, derive_seed(config.seed, "split"))?;
    let fingerprint = dataset.fingerprint();

    // variants sharing transform ops share the fitted transform
    let mut transforms: Vec<(Vec<crate::models::TransformOp>, (Dataset, TransformRecord))> = Vec::new();
    for v in &config.variants {
        let ops = v.transform_ops().to_vec();
        if !transforms.iter().any(|(o, _)| *o == ops) {
            let t = apply_variant_transform(&dataset, &ops, &split.train)?;
            transforms.push((ops, t));
        }
    }
    let transformed_for = |v: Variant| {
        &transforms
            .iter()
            .find(|(o, _)| o.as_slice() == v.transform_ops())
            .expect("transform fitted for every variant")
            .1
    };

    let grid: Vec<(AlgorithmKind, Variant)> = config
        .algorithms
        .iter()
        .flat_map(|&a| config.variants.iter().map(move |&v| (a, v)))
        .collect();
    let cells: Vec<Cell> = grid
        .par_iter()
        .map(|&(a, v)| {
            run_cell(a, v, transformed_for(v), &split, config).map_err(|e| Error::Stage {
                algorithm: a.short_name().to_string(),
                variant: v.id(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let labels: Vec<u8> = split.test.iter().map(|&i| dataset.labels()[i]).collect();
    let rows = cells
        .iter()
        .map(|c| compute_metrics(&c.model.id, &labels, &c.predictions.probabilities, DEFAULT_THRESHOLD))
        .collect::<Result<Vec<_>>>()?;
    let metrics = rank_metric_columns(rows)?;

    let mut models = Vec::with_capacity(cells.len());
    let mut predictions = Vec::with_capacity(cells.len());
    let mut global_fi = Vec::with_capacity(cells.len());
    for c in cells {
        models.push(c.model);
        predictions.push(c.predictions);
        global_fi.push(c.importance);
    }
    Ok(ExperimentArtifact {
        id: artifact_id(config, &fingerprint)?,
        config: config.clone(),
        dataset: Arc::new(dataset),
        dataset_fingerprint: fingerprint,
        split,
        models,
        predictions,
        metrics,
        global_fi,
        metadata: ArtifactMetadata {
            created_unix_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}
