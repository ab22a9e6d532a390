//! The in-repo model zoo: four algorithms, four optimization variants.

pub mod ensemble;
pub mod logistic;
pub mod transform;
pub mod tree;
mod tune;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

pub use ensemble::{BoostedParams, ForestParams};
pub use logistic::LogisticParams;
pub use transform::{apply_variant_transform, TransformOp, TransformRecord};
pub use tree::Tree;
pub use tune::{search_space_sample, tune_hyperparameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    LogisticRegression,
    DecisionTree,
    RandomForest,
    GradientBoosting,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [
        AlgorithmKind::LogisticRegression,
        AlgorithmKind::DecisionTree,
        AlgorithmKind::RandomForest,
        AlgorithmKind::GradientBoosting,
    ];

    /// Prefix used in model names.
    pub fn short_name(self) -> &'static str {
        match self {
            AlgorithmKind::LogisticRegression => "LogisticRegression",
            AlgorithmKind::DecisionTree => "DecisionTree",
            AlgorithmKind::RandomForest => "RandomForest",
            AlgorithmKind::GradientBoosting => "GBT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        match norm.as_str() {
            "logisticregression" | "logistic" | "lr" => Some(AlgorithmKind::LogisticRegression),
            "decisiontree" | "tree" | "dt" => Some(AlgorithmKind::DecisionTree),
            "randomforest" | "forest" | "rf" => Some(AlgorithmKind::RandomForest),
            "gradientboosting" | "gbt" | "boosting" => Some(AlgorithmKind::GradientBoosting),
            _ => None,
        }
    }

    pub(crate) fn param_specs(self) -> &'static [ParamSpec] {
        match self {
            AlgorithmKind::LogisticRegression => LOGISTIC_SPECS,
            AlgorithmKind::DecisionTree => TREE_SPECS,
            AlgorithmKind::RandomForest => FOREST_SPECS,
            AlgorithmKind::GradientBoosting => BOOSTING_SPECS,
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Optimization variant applied to an algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Variant {
    Default = 1,
    HyperparameterOptimization = 2,
    FeatureEngineering = 3,
    FeatureEngineeringHpo = 4,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Default,
        Variant::HyperparameterOptimization,
        Variant::FeatureEngineering,
        Variant::FeatureEngineeringHpo,
    ];

    pub fn from_id(id: u8) -> Result<Self> {
        Variant::ALL
            .get((id as usize).wrapping_sub(1))
            .copied()
            .ok_or(Error::InvalidVariant(id))
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Default => "Default",
            Variant::HyperparameterOptimization => "Hyperparameter Optimization",
            Variant::FeatureEngineering => "Feature Engineering",
            Variant::FeatureEngineeringHpo => "Feature Engineering + Hyperparameter Optimization",
        }
    }

    pub fn transform_ops(self) -> &'static [TransformOp] {
        match self {
            Variant::Default | Variant::HyperparameterOptimization => &[],
            Variant::FeatureEngineering | Variant::FeatureEngineeringHpo => {
                &[TransformOp::LogSkewed, TransformOp::Standardize]
            }
        }
    }

    pub fn tuned(self) -> bool {
        matches!(self, Variant::HyperparameterOptimization | Variant::FeatureEngineeringHpo)
    }
}

impl TryFrom<u8> for Variant {
    type Error = Error;
    fn try_from(id: u8) -> Result<Self> {
        Variant::from_id(id)
    }
}

impl From<Variant> for u8 {
    fn from(v: Variant) -> u8 {
        v.id()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamSpec {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub default: f64,
    pub integer: bool,
    /// Random-search range, a subset of `[min, max]`.
    pub search: (f64, f64),
    pub log_scale: bool,
}

const fn spec(name: &'static str, min: f64, max: f64, default: f64, integer: bool, search: (f64, f64), log_scale: bool) -> ParamSpec {
    ParamSpec {
        name,
        min,
        max,
        default,
        integer,
        search,
        log_scale,
    }
}

const LOGISTIC_SPECS: &[ParamSpec] = &[
    spec("learning_rate", 1e-6, 1.0, 0.5, false, (0.01, 1.0), true),
    spec("l2_penalty", 0.0, 10.0, 1e-3, false, (1e-5, 1e-1), true),
    spec("epochs", 1.0, 10_000.0, 300.0, true, (50.0, 500.0), false),
];
const TREE_SPECS: &[ParamSpec] = &[
    spec("max_depth", 1.0, 16.0, 6.0, true, (2.0, 12.0), false),
    spec("min_samples_leaf", 1.0, 1000.0, 1.0, true, (1.0, 50.0), false),
];
const FOREST_SPECS: &[ParamSpec] = &[
    spec("n_trees", 1.0, 500.0, 50.0, true, (10.0, 80.0), false),
    spec("max_depth", 1.0, 16.0, 8.0, true, (3.0, 12.0), false),
    spec("min_samples_leaf", 1.0, 1000.0, 1.0, true, (1.0, 20.0), false),
    spec("feature_subsample_fraction", 0.01, 1.0, 0.5, false, (0.2, 1.0), false),
];
const BOOSTING_SPECS: &[ParamSpec] = &[
    spec("n_rounds", 1.0, 2000.0, 100.0, true, (20.0, 200.0), false),
    spec("max_depth", 1.0, 16.0, 3.0, true, (1.0, 5.0), false),
    spec("learning_rate", 1e-4, 1.0, 0.1, false, (0.02, 0.5), true),
];

/// Named numeric hyperparameters, validated against per-algorithm bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperparameters(BTreeMap<String, f64>);

impl Hyperparameters {
    pub fn defaults(algorithm: AlgorithmKind) -> Self {
        Hyperparameters(
            algorithm
                .param_specs()
                .iter()
                .map(|s| (s.name.to_string(), s.default))
                .collect(),
        )
    }

    /// Defaults overridden by `values`, then validated.
    pub fn with(algorithm: AlgorithmKind, values: &[(&str, f64)]) -> Result<Self> {
        let mut hp = Self::defaults(algorithm);
        for (k, v) in values {
            hp.0.insert(k.to_string(), *v);
        }
        hp.validate(algorithm)?;
        Ok(hp)
    }

    pub fn validate(&self, algorithm: AlgorithmKind) -> Result<()> {
        let specs = algorithm.param_specs();
        for name in self.0.keys() {
            if !specs.iter().any(|s| s.name == name) {
                return Err(Error::UnknownHyperparameter {
                    name: name.clone(),
                    algorithm: algorithm.to_string(),
                });
            }
        }
        for s in specs {
            let value = *self.0.get(s.name).ok_or_else(|| Error::invalid(format!("missing hyperparameter `{}`", s.name)))?;
            if !(s.min..=s.max).contains(&value) || !value.is_finite() {
                return Err(Error::HyperparameterOutOfRange {
                    name: s.name.to_string(),
                    value,
                    min: s.min,
                    max: s.max,
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(f64::NAN)
    }

    fn count(&self, name: &str) -> usize {
        self.get(name).round() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub(crate) fn from_map(map: BTreeMap<String, f64>) -> Self {
        Hyperparameters(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(LogisticParams),
    Tree(Tree),
    Forest(ForestParams),
    Boosted(BoostedParams),
}

/// One candidate in the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// File-safe identifier, `{short}_{variant}`.
    pub id: String,
    pub display_name: String,
    pub algorithm: AlgorithmKind,
    pub variant: Variant,
    pub variant_name: String,
    pub hyperparameters: Hyperparameters,
    pub params: ModelParams,
    /// Input feature names after the variant transform.
    pub feature_names: Vec<String>,
    pub transform: TransformRecord,
    pub seed: u64,
}

/// `"{short}_{k}: {variant name}"`, e.g. `GBT_2: Hyperparameter Optimization`.
pub fn model_display_name(algorithm: AlgorithmKind, variant_id: u8, variant_name: &str) -> Result<String> {
    Variant::from_id(variant_id)?;
    Ok(format!("{}_{variant_id}: {variant_name}", algorithm.short_name()))
}

pub fn model_id(algorithm: AlgorithmKind, variant: Variant) -> String {
    format!("{}_{}", algorithm.short_name(), variant.id())
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Positive-class probability of one row in the model's input space.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let p = match &self.params {
            ModelParams::Logistic(p) => p.predict(x),
            ModelParams::Tree(t) => t.predict(x),
            ModelParams::Forest(f) => f.predict(x),
            ModelParams::Boosted(b) => b.predict(x),
        };
        p.clamp(0.0, 1.0)
    }

    /// Applies the variant transform, then predicts.
    pub fn predict_untransformed(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter()
            .map(|r| self.predict_row(&self.transform.apply_row(r)))
            .collect()
    }

    /// Reassigns grid identity after training on a transformed dataset.
    pub fn with_variant(mut self, variant: Variant, transform: TransformRecord) -> Self {
        self.variant = variant;
        self.variant_name = variant.name().to_string();
        self.id = model_id(self.algorithm, variant);
        self.display_name = format!("{}_{}: {}", self.algorithm.short_name(), variant.id(), variant.name());
        self.transform = transform;
        self
    }
}

pub fn predict_proba(model: &TrainedModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != model.n_features()) {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: bad.len(),
        });
    }
    Ok(rows.iter().map(|r| model.predict_row(r)).collect())
}

/// Unnormalized global importance: `|w|` on the standardized scale for
/// logistic models, summed impurity decrease for tree models.
pub fn raw_global_importance(model: &TrainedModel) -> Vec<f64> {
    let sum_trees = |trees: &[Tree]| {
        let mut acc = vec![0.0; model.n_features()];
        for t in trees {
            for (a, v) in acc.iter_mut().zip(t.feature_importance()) {
                *a += v;
            }
        }
        acc
    };
    match &model.params {
        ModelParams::Logistic(p) => p.weights.iter().map(|w| w.abs()).collect(),
        ModelParams::Tree(t) => t.feature_importance(),
        ModelParams::Forest(f) => sum_trees(&f.trees),
        ModelParams::Boosted(b) => sum_trees(&b.trees),
    }
}

pub fn train_model(
    algorithm: AlgorithmKind,
    hp: &Hyperparameters,
    dataset: &Dataset,
    train_indices: &[usize],
    seed: u64,
) -> Result<TrainedModel> {
    hp.validate(algorithm)?;
    if train_indices.is_empty() {
        return Err(Error::invalid("empty training split"));
    }
    let labels = dataset.labels();
    let pos = train_indices.iter().filter(|&&i| labels[i] == 1).count();
    if pos == 0 || pos == train_indices.len() {
        return Err(Error::SingleClass);
    }
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let rows = dataset.rows();
    let mut rng = rng::seeded(seed);

    let params = match algorithm {
        AlgorithmKind::LogisticRegression => {
            let x: Vec<Vec<f64>> = train_indices.iter().map(|&i| rows[i].clone()).collect();
            let ty: Vec<f64> = train_indices.iter().map(|&i| y[i]).collect();
            ModelParams::Logistic(logistic::fit(
                &x,
                &ty,
                hp.get("learning_rate"),
                hp.get("l2_penalty"),
                hp.count("epochs"),
            ))
        }
        AlgorithmKind::DecisionTree => {
            let params = tree::TreeParams {
                criterion: tree::Criterion::Gini,
                max_depth: hp.count("max_depth"),
                min_samples_leaf: hp.count("min_samples_leaf"),
                max_features: None,
            };
            ModelParams::Tree(tree::TreeBuilder::new(rows, &y, tree::LeafRule::Mean, params).build(train_indices, &mut rng))
        }
        AlgorithmKind::RandomForest => ModelParams::Forest(ensemble::fit_forest(
            rows,
            &y,
            train_indices,
            &ensemble::ForestSettings {
                n_trees: hp.count("n_trees"),
                max_depth: hp.count("max_depth"),
                min_samples_leaf: hp.count("min_samples_leaf"),
                feature_fraction: hp.get("feature_subsample_fraction"),
            },
            &mut rng,
        )),
        AlgorithmKind::GradientBoosting => ModelParams::Boosted(ensemble::fit_boosting(
            rows,
            &y,
            train_indices,
            &ensemble::BoostingSettings {
                n_rounds: hp.count("n_rounds"),
                max_depth: hp.count("max_depth"),
                learning_rate: hp.get("learning_rate"),
            },
            &mut rng,
        )),
    };
    let variant = Variant::Default;
    Ok(TrainedModel {
        id: model_id(algorithm, variant),
        display_name: format!("{}_1: {}", algorithm.short_name(), variant.name()),
        algorithm,
        variant,
        variant_name: variant.name().to_string(),
        hyperparameters: hp.clone(),
        params,
        feature_names: dataset.schema().names(),
        transform: TransformRecord::identity(dataset.schema()),
        seed,
    })
}
