use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::Json;
use lineup_core::compare::{
    align_to_universe, build_scatter_panel, order_feature_panels, probability_histogram, select_in_rect,
};
use lineup_core::explain::{default_budget, shap_for_selection, ModelLocalImportance};
use lineup_core::metrics::{Metric, MetricRanks};
use lineup_core::{
    AlgorithmKind, Hyperparameters, ImportanceVector, MetricsRow, RectSelection, ScatterPanel, TrainedModel, Variant,
    DEFAULT_THRESHOLD,
};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::{AppState, LoadedExperiment};

pub const DEFAULT_HISTOGRAM_BINS: usize = 20;
pub const MAX_LOCAL_FI_BUDGET: usize = 8192;

type St = State<Arc<AppState>>;

fn model<'a>(exp: &'a LoadedExperiment, id: &str) -> ApiResult<&'a TrainedModel> {
    exp.artifact
        .model(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown model {id:?}")))
}

fn test_probabilities<'a>(exp: &'a LoadedExperiment, id: &str) -> ApiResult<&'a [f64]> {
    model(exp, id)?;
    exp.artifact
        .predictions(id)
        .map(|p| p.probabilities.as_slice())
        .ok_or_else(|| ApiError::internal(format!("no stored predictions for {id}")))
}

fn split_ids(list: &str) -> ApiResult<Vec<String>> {
    let ids: Vec<String> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    if ids.is_empty() {
        return Err(ApiError::bad_request("empty model list"));
    }
    Ok(ids)
}

fn require_unique(ids: &[String]) -> ApiResult<()> {
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(ApiError::bad_request(format!("model {id:?} listed twice")));
        }
    }
    Ok(())
}

pub(crate) async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub id: String,
    pub dataset_name: String,
    pub dataset_fingerprint: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub n_test: usize,
    pub positive_class: String,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmKind>,
    pub variants: Vec<Variant>,
    pub n_models: usize,
}

pub(crate) async fn list_experiments(State(state): St) -> Json<Vec<ExperimentSummary>> {
    Json(
        state
            .experiments()
            .map(|e| {
                let a = &e.artifact;
                ExperimentSummary {
                    id: a.id.clone(),
                    dataset_name: a.dataset.name().to_string(),
                    dataset_fingerprint: a.dataset_fingerprint.clone(),
                    n_rows: a.dataset.n_rows(),
                    n_features: a.dataset.n_features(),
                    n_test: a.split.test.len(),
                    positive_class: a.dataset.positive_class_name().to_string(),
                    seed: a.config.seed,
                    algorithms: a.config.algorithms.clone(),
                    variants: a.config.variants.clone(),
                    n_models: a.models.len(),
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub display_name: String,
    pub algorithm: AlgorithmKind,
    pub variant: Variant,
    pub variant_name: String,
    pub hyperparameters: Hyperparameters,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsResponse {
    pub experiment_id: String,
    pub models: Vec<ModelSummary>,
}

pub(crate) async fn list_models(State(state): St, Path(id): Path<String>) -> ApiResult<Json<ModelsResponse>> {
    let exp = state.experiment(&id)?;
    Ok(Json(ModelsResponse {
        experiment_id: id,
        models: exp
            .artifact
            .models
            .iter()
            .map(|m| ModelSummary {
                id: m.id.clone(),
                display_name: m.display_name.clone(),
                algorithm: m.algorithm,
                variant: m.variant,
                variant_name: m.variant_name.clone(),
                hyperparameters: m.hyperparameters.clone(),
                feature_names: m.feature_names.clone(),
            })
            .collect(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub name: String,
    pub higher_is_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub experiment_id: String,
    pub threshold: f64,
    pub columns: Vec<MetricColumn>,
    pub rows: Vec<MetricsRow>,
    pub ranks: Vec<MetricRanks>,
}

pub(crate) async fn metrics(State(state): St, Path(id): Path<String>) -> ApiResult<Json<MetricsResponse>> {
    let exp = state.experiment(&id)?;
    Ok(Json(MetricsResponse {
        experiment_id: id,
        threshold: DEFAULT_THRESHOLD,
        columns: Metric::ALL
            .iter()
            .map(|m| MetricColumn {
                name: m.name().to_string(),
                higher_is_better: m.higher_is_better(),
            })
            .collect(),
        rows: exp.artifact.metrics.rows.clone(),
        ranks: exp.artifact.metrics.ranks.clone(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFiResponse {
    pub experiment_id: String,
    pub feature_universe: Vec<String>,
    /// Aligned to `feature_universe`, zero where a model lacks a feature.
    pub vectors: Vec<ImportanceVector>,
    pub panel_order: Vec<String>,
}

fn selected_models(exp: &LoadedExperiment, ids: Option<Vec<String>>) -> ApiResult<Vec<&TrainedModel>> {
    match ids {
        None => Ok(exp.artifact.models.iter().collect()),
        Some(ids) => {
            require_unique(&ids)?;
            ids.iter().map(|id| model(exp, id)).collect()
        }
    }
}

fn global_vectors(exp: &LoadedExperiment, models: &[&TrainedModel]) -> ApiResult<Vec<ImportanceVector>> {
    models
        .iter()
        .map(|m| {
            exp.artifact
                .global_fi(&m.id)
                .cloned()
                .ok_or_else(|| ApiError::internal(format!("no global importance for {}", m.id)))
        })
        .collect()
}

pub(crate) async fn global_fi(
    State(state): St,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<GlobalFiResponse>> {
    let exp = state.experiment(&id)?;
    let ids = q.get("models").map(|s| split_ids(s)).transpose()?;
    let models = selected_models(exp, ids)?;
    let raw = global_vectors(exp, &models)?;
    let (feature_universe, vectors) = align_to_universe(&raw);
    Ok(Json(GlobalFiResponse {
        experiment_id: id,
        panel_order: order_feature_panels(&raw),
        feature_universe,
        vectors,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterResponse {
    pub experiment_id: String,
    #[serde(flatten)]
    pub panel: ScatterPanel,
    pub bins: usize,
    pub histogram_x: Vec<usize>,
    pub histogram_y: Vec<usize>,
}

pub(crate) async fn scatter(
    State(state): St,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<ScatterResponse>> {
    let exp = state.experiment(&id)?;
    let param = |k: &str| q.get(k).ok_or_else(|| ApiError::bad_request(format!("missing query parameter {k:?}")));
    let (x, y) = (param("x")?, param("y")?);
    let bins = match q.get("bins") {
        None => DEFAULT_HISTOGRAM_BINS,
        Some(b) => b
            .parse::<usize>()
            .ok()
            .filter(|b| (2..=1000).contains(b))
            .ok_or_else(|| ApiError::bad_request(format!("bins must be an integer in [2, 1000], got {b:?}")))?,
    };
    let (px, py) = (test_probabilities(exp, x)?, test_probabilities(exp, y)?);
    let a = &exp.artifact;
    let panel = build_scatter_panel(x, y, &a.split.test, px, py, &a.test_labels(), DEFAULT_THRESHOLD)?;
    Ok(Json(ScatterResponse {
        experiment_id: id,
        bins,
        histogram_x: probability_histogram(px, bins)?,
        histogram_y: probability_histogram(py, bins)?,
        panel,
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalFiRequest {
    #[serde(default)]
    pub instance_ids: Option<Vec<usize>>,
    #[serde(default)]
    pub rect: Option<RectSelection>,
    #[serde(default)]
    pub model_ids: Option<Vec<String>>,
    #[serde(default)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMean {
    pub feature: String,
    /// Dataset column the feature is computed from.
    pub source_column: String,
    /// Mean of the untransformed source column over the selection.
    pub mean_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFiResponse {
    pub experiment_id: String,
    pub selection_size: usize,
    pub instance_ids: Vec<usize>,
    /// Coalition budget per model.
    pub budgets: Vec<usize>,
    pub models: Vec<ModelLocalImportance>,
    pub feature_universe: Vec<String>,
    /// Mean local attribution per model over `feature_universe`, zero-filled.
    pub aligned_mean_phi: Vec<Vec<f64>>,
    pub panel_order: Vec<String>,
    pub feature_means: Vec<FeatureMean>,
}

fn resolve_selection(exp: &LoadedExperiment, req: &LocalFiRequest) -> ApiResult<Vec<usize>> {
    let ids = match (&req.instance_ids, &req.rect) {
        (Some(ids), None) => ids.clone(),
        (None, Some(rect)) => {
            rect.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
            let (px, py) = (test_probabilities(exp, &rect.x_model)?, test_probabilities(exp, &rect.y_model)?);
            let a = &exp.artifact;
            let panel = build_scatter_panel(
                &rect.x_model,
                &rect.y_model,
                &a.split.test,
                px,
                py,
                &a.test_labels(),
                DEFAULT_THRESHOLD,
            )?;
            select_in_rect(&panel, rect)?
        }
        _ => return Err(ApiError::bad_request("give exactly one of instance_ids or rect")),
    };
    if ids.is_empty() {
        return Err(ApiError::bad_request("selection is empty"));
    }
    Ok(ids)
}

fn local_fi_blocking(exp: &LoadedExperiment, id: String, req: LocalFiRequest) -> ApiResult<LocalFiResponse> {
    if let Some(b) = req.budget {
        if !(2..=MAX_LOCAL_FI_BUDGET).contains(&b) {
            return Err(ApiError::bad_request(format!(
                "budget must be in [2, {MAX_LOCAL_FI_BUDGET}], got {b}"
            )));
        }
    }
    let models = selected_models(exp, req.model_ids.clone())?;
    let ids = resolve_selection(exp, &req)?;
    let a = &exp.artifact;
    let summary = shap_for_selection(
        &models,
        &ids,
        &a.dataset,
        &a.split.test,
        &exp.background,
        req.budget,
        a.explain_seed(),
        &exp.cache,
    )?;

    let as_vectors: Vec<ImportanceVector> = summary
        .models
        .iter()
        .map(|m| ImportanceVector {
            model_id: m.model_id.clone(),
            feature_names: m.feature_names.clone(),
            values: m.mean_phi.clone(),
            normalized: false,
            degenerate: false,
        })
        .collect();
    let (feature_universe, aligned) = align_to_universe(&as_vectors);
    let panel_order = order_feature_panels(&global_vectors(exp, &models)?);

    let schema = a.dataset.schema();
    let feature_means = feature_universe
        .iter()
        .map(|f| {
            let source = models
                .iter()
                .find_map(|m| m.transform.output_schema.entries().iter().find(|s| s.name == *f))
                .map_or(f.as_str(), |s| s.base_name());
            let j = schema
                .index_of(source)
                .ok_or_else(|| ApiError::internal(format!("feature {f} has no source column")))?;
            Ok(FeatureMean {
                feature: f.clone(),
                source_column: source.to_string(),
                mean_value: summary.mean_feature_values[j],
            })
        })
        .collect::<ApiResult<Vec<_>>>()?;

    Ok(LocalFiResponse {
        experiment_id: id,
        selection_size: ids.len(),
        budgets: models
            .iter()
            .map(|m| req.budget.unwrap_or_else(|| default_budget(m.n_features())))
            .collect(),
        instance_ids: summary.instance_ids,
        models: summary.models,
        feature_universe,
        aligned_mean_phi: aligned.into_iter().map(|v| v.values).collect(),
        panel_order,
        feature_means,
    })
}

pub(crate) async fn local_fi(State(state): St, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<LocalFiResponse>> {
    let exp = Arc::clone(state.experiment(&id)?);
    let req: LocalFiRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?;
    tokio::task::spawn_blocking(move || local_fi_blocking(&exp, id, req))
        .await
        .map_err(|e| ApiError::internal(format!("explanation task failed: {e}")))?
        .map(Json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawField {
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProbability {
    pub model_id: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResponse {
    pub experiment_id: String,
    pub instance_id: usize,
    pub label: u8,
    pub label_value: String,
    /// CSV cells as read, label column excluded.
    pub raw: Vec<RawField>,
    pub feature_names: Vec<String>,
    pub feature_values: Vec<f64>,
    pub predictions: Vec<ModelProbability>,
}

pub(crate) async fn instance(
    State(state): St,
    Path((id, idx)): Path<(String, String)>,
) -> ApiResult<Json<InstanceResponse>> {
    let exp = state.experiment(&id)?;
    let idx: usize = idx
        .parse()
        .map_err(|_| ApiError::bad_request(format!("instance id must be a nonnegative integer, got {idx:?}")))?;
    let a = &exp.artifact;
    let pos = a
        .split
        .test
        .binary_search(&idx)
        .map_err(|_| ApiError::not_found(format!("instance {idx} is not in the test split")))?;
    let raw_table = a.dataset.raw();
    let label_col = raw_table.columns.iter().position(|c| *c == raw_table.label_column);
    Ok(Json(InstanceResponse {
        experiment_id: id,
        instance_id: idx,
        label: a.dataset.labels()[idx],
        label_value: label_col.map(|c| raw_table.rows[idx][c].clone()).unwrap_or_default(),
        raw: raw_table
            .fields(idx)
            .into_iter()
            .map(|(column, value)| RawField { column, value })
            .collect(),
        feature_names: a.dataset.schema().names(),
        feature_values: a.dataset.row(idx).to_vec(),
        predictions: a
            .predictions
            .iter()
            .map(|p| ModelProbability {
                model_id: p.model_id.clone(),
                probability: p.probabilities[pos],
            })
            .collect(),
    }))
}
