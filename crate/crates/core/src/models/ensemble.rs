//! Bagged forests and logistic-loss gradient boosting over [`Tree`]s.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{Criterion, LeafRule, Tree, TreeBuilder, TreeParams};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<Tree>,
}

impl ForestParams {
    /// Mean of leaf class frequencies over trees.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub feature_fraction: f64,
}

pub fn fit_forest(rows: &[Vec<f64>], y: &[f64], train: &[usize], s: &ForestSettings, rng: &mut Rng) -> ForestParams {
    let m = rows.first().map_or(0, Vec::len);
    let k = ((s.feature_fraction * m as f64).round() as usize).clamp(1, m.max(1));
    let params = TreeParams {
        criterion: Criterion::Gini,
        max_depth: s.max_depth,
        min_samples_leaf: s.min_samples_leaf,
        max_features: Some(k),
    };
    let trees = (0..s.n_trees)
        .map(|_| {
            let sample: Vec<usize> = (0..train.len()).map(|_| train[rng.random_range(0..train.len())]).collect();
            TreeBuilder::new(rows, y, LeafRule::Mean, params).build(&sample, rng)
        })
        .collect();
    ForestParams { trees }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedParams {
    /// Initial log-odds.
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl BoostedParams {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

pub struct BoostingSettings {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

/// Each round fits a squared-error regression tree to the residuals `y - p`
/// with Newton leaf values `Σ(y - p) / Σ p(1-p)`.
pub fn fit_boosting(rows: &[Vec<f64>], y: &[f64], train: &[usize], s: &BoostingSettings, rng: &mut Rng) -> BoostedParams {
    let n = rows.len();
    let pos: f64 = train.iter().map(|&i| y[i]).sum();
    let rate = (pos / train.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    let init = (rate / (1.0 - rate)).ln();
    let params = TreeParams {
        criterion: Criterion::SquaredError,
        max_depth: s.max_depth,
        min_samples_leaf: 1,
        max_features: None,
    };
    let mut score = vec![init; n];
    let mut residual = vec![0.0; n];
    let mut hessian = vec![0.0; n];
    let mut trees = Vec::with_capacity(s.n_rounds);
    for _ in 0..s.n_rounds {
        for &i in train {
            let p = sigmoid(score[i]);
            residual[i] = y[i] - p;
            hessian[i] = p * (1.0 - p);
        }
        let tree = TreeBuilder::new(rows, &residual, LeafRule::Newton { hessians: &hessian }, params).build(train, rng);
        for &i in train {
            score[i] += s.learning_rate * tree.predict(&rows[i]);
        }
        trees.push(tree);
    }
    BoostedParams {
        init,
        learning_rate: s.learning_rate,
        trees,
    }
}
