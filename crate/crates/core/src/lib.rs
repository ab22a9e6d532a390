//! Candidate-model grid generation and multi-level model comparison.
//!
//! The crate trains a grid of binary classifiers (four algorithms, each under
//! four optimization variants), then provides the comparison machinery used
//! by the service layer:
//!
//! * [`metrics`]: confusion-matrix metrics, ROC AUC and dense column ranks.
//! * [`explain`]: Kernel SHAP local attributions with an exact enumeration
//!   oracle and a memoized selection summary.
//! * [`compare`]: importance normalization, panel ordering, pairwise
//!   probability scatter panels with quadrant semantics, brushing.
//! * [`experiment`]: orchestration and the on-disk artifact format.

pub mod compare;
pub mod data;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod metrics;
pub mod models;
mod rng;

pub use compare::{ImportanceVector, Outcome, RectSelection, ScatterPanel, ScatterPoint};
pub use data::{Dataset, FeatureKind, FeatureSchema, FeatureSpec, SplitIndices};
pub use error::{Error, Result};
pub use experiment::{ExperimentArtifact, ExperimentConfig};
pub use explain::{BackgroundSet, CoalitionBudget, SelectionSummary, ShapCache, ShapValues};
pub use metrics::{MetricsRow, RankedMetricsTable};
pub use models::{AlgorithmKind, Hyperparameters, TrainedModel, Variant};
pub use rng::derive_seed;

/// Probability threshold at and above which a prediction counts as positive.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
