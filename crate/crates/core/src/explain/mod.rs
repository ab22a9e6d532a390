//! Local feature attributions (Shapley values) for black-box predictors.
//!
//! The value of a coalition `S` for instance `x` is the mean prediction over
//! the background rows with the features in `S` taken from `x`. Attributions
//! therefore satisfy `Σφ + base_value = f(x)` with `base_value` the mean
//! background prediction.

mod exact;
mod kernel;
mod selection;

use serde::{Deserialize, Serialize};

pub use exact::{exact_shapley, MAX_EXACT_FEATURES};
pub use kernel::{default_budget, kernel_shap, shapley_kernel_weight};
pub use selection::{shap_for_selection, BackgroundSet, ModelLocalImportance, SelectionSummary, ShapCache, DEFAULT_BACKGROUND_SIZE};

/// Black-box positive-class probability of one row.
pub type Predict<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", content = "coalitions", rename_all = "snake_case")]
pub enum CoalitionBudget {
    /// Enumerates every proper coalition when `n ≥ 2^m − 2`; otherwise
    /// enumerates the cheapest coalition sizes completely and samples the rest.
    Auto(usize),
    /// Always samples `n` coalitions i.i.d. from the Shapley kernel, even when
    /// full enumeration would be cheaper. Used to study estimator convergence.
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapValues {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
    /// Every proper coalition was evaluated.
    pub exact: bool,
    /// All coalition values were identical; `phi` is zero.
    pub degenerate: bool,
    /// Distinct coalitions used in the regression.
    pub n_coalitions: usize,
}

impl ShapValues {
    /// `|Σφ + base − f(x)|`.
    pub fn efficiency_residual(&self) -> f64 {
        (self.phi.iter().sum::<f64>() + self.base_value - self.prediction).abs()
    }
}
