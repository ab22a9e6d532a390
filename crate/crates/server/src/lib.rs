//! Read-only HTTP/JSON API over saved experiment artifacts.
//!
//! Every endpoint is a pure read of an immutable [`ExperimentArtifact`],
//! except local explanations, which are memoized per (model, instance).

mod error;
mod routes;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use lineup_core::experiment::load_artifact;
use lineup_core::{BackgroundSet, ExperimentArtifact, ShapCache};

pub use error::{ApiError, ApiResult};
pub use routes::{
    ExperimentSummary, GlobalFiResponse, InstanceResponse, LocalFiRequest, LocalFiResponse, MetricsResponse,
    ModelSummary, ScatterResponse, DEFAULT_HISTOGRAM_BINS, MAX_LOCAL_FI_BUDGET,
};

/// One loaded artifact plus the state needed to explain its predictions.
#[derive(Debug)]
pub struct LoadedExperiment {
    pub artifact: ExperimentArtifact,
    pub background: BackgroundSet,
    pub cache: ShapCache,
}

impl LoadedExperiment {
    pub fn new(artifact: ExperimentArtifact) -> lineup_core::Result<Self> {
        let background = artifact.background()?;
        Ok(LoadedExperiment {
            artifact,
            background,
            cache: ShapCache::new(),
        })
    }
}

#[derive(Debug, Default)]
pub struct AppState {
    experiments: BTreeMap<String, Arc<LoadedExperiment>>,
}

impl AppState {
    pub fn from_artifacts(artifacts: impl IntoIterator<Item = ExperimentArtifact>) -> lineup_core::Result<Self> {
        let mut experiments = BTreeMap::new();
        for a in artifacts {
            let id = a.id.clone();
            if experiments.insert(id.clone(), Arc::new(LoadedExperiment::new(a)?)).is_some() {
                return Err(lineup_core::Error::InvalidInput(format!("experiment {id} loaded twice")));
            }
        }
        Ok(AppState { experiments })
    }

    /// Loads `dir` itself if it holds a manifest, otherwise every immediate
    /// subdirectory that does.
    pub fn load_dir(dir: impl AsRef<Path>) -> lineup_core::Result<Self> {
        let dir = dir.as_ref();
        if dir.join("manifest.json").is_file() {
            return Self::from_artifacts([load_artifact(dir)?]);
        }
        let entries = std::fs::read_dir(dir).map_err(|_| lineup_core::Error::NoManifest(dir.to_path_buf()))?;
        let mut subdirs: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("manifest.json").is_file())
            .collect();
        if subdirs.is_empty() {
            return Err(lineup_core::Error::NoManifest(dir.to_path_buf()));
        }
        subdirs.sort();
        Self::from_artifacts(subdirs.iter().map(load_artifact).collect::<lineup_core::Result<Vec<_>>>()?)
    }

    pub fn experiment(&self, id: &str) -> ApiResult<&Arc<LoadedExperiment>> {
        self.experiments
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown experiment {id:?}")))
    }

    pub fn experiments(&self) -> impl Iterator<Item = &Arc<LoadedExperiment>> {
        self.experiments.values()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/experiments", get(routes::list_experiments))
        .route("/api/experiments/{id}/models", get(routes::list_models))
        .route("/api/experiments/{id}/metrics", get(routes::metrics))
        .route("/api/experiments/{id}/global-fi", get(routes::global_fi))
        .route("/api/experiments/{id}/scatter", get(routes::scatter))
        .route("/api/experiments/{id}/selection/local-fi", post(routes::local_fi))
        .route("/api/experiments/{id}/instances/{idx}", get(routes::instance))
        .fallback(routes::not_found)
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
