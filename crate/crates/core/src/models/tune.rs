use rand::Rng as _;

use super::{train_model, AlgorithmKind, Hyperparameters};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::roc_auc;
use crate::rng::{self, Rng};

/// One random draw from the algorithm's search ranges.
pub fn search_space_sample(algorithm: AlgorithmKind, rng: &mut Rng) -> Hyperparameters {
    let map = algorithm
        .param_specs()
        .iter()
        .map(|s| {
            let (lo, hi) = s.search;
            let v = if s.integer {
                rng.random_range(lo as i64..=hi as i64) as f64
            } else if s.log_scale {
                (rng.random_range(lo.ln()..=hi.ln())).exp().clamp(lo, hi)
            } else {
                rng.random_range(lo..=hi)
            };
            (s.name.to_string(), v)
        })
        .collect();
    Hyperparameters::from_map(map)
}

/// Seeded random search maximizing validation ROC AUC.
///
/// Candidate #1 is always the default configuration; the remaining
/// `budget - 1` are random draws. Ties keep the earliest candidate.
pub fn tune_hyperparameters(
    algorithm: AlgorithmKind,
    dataset: &Dataset,
    train_indices: &[usize],
    val_indices: &[usize],
    budget: usize,
    seed: u64,
) -> Result<Hyperparameters> {
    if budget == 0 {
        return Err(Error::invalid("tuning budget must be at least 1"));
    }
    let mut rng = rng::seeded(seed);
    let val_rows: Vec<Vec<f64>> = val_indices.iter().map(|&i| dataset.row(i).to_vec()).collect();
    let val_labels: Vec<u8> = val_indices.iter().map(|&i| dataset.labels()[i]).collect();

    let mut best: Option<(f64, Hyperparameters)> = None;
    for k in 0..budget {
        let hp = if k == 0 {
            Hyperparameters::defaults(algorithm)
        } else {
            search_space_sample(algorithm, &mut rng)
        };
        let model = train_model(algorithm, &hp, dataset, train_indices, seed)?;
        let probs = super::predict_proba(&model, &val_rows)?;
        let auc = roc_auc(&val_labels, &probs)?;
        log::debug!("{algorithm} candidate {k}: validation auc {auc:.4}");
        if best.as_ref().is_none_or(|(b, _)| auc > *b) {
            best = Some((auc, hp));
        }
    }
    Ok(best.expect("budget >= 1").1)
}
