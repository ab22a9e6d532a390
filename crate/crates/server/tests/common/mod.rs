#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lineup_core::data::{parse_csv, synth_loan_csv};
use lineup_core::experiment::{run_experiment_on, save_artifact, DataSource};
use lineup_core::ExperimentConfig;
use lineup_server::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub const FIXTURE_ROWS: usize = 240;

pub fn fixture_csv() -> String {
    synth_loan_csv(FIXTURE_ROWS, 11)
}

/// Loan-style 16-model artifact written to a temp dir and served from disk.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub state: Arc<AppState>,
    pub app: Router,
    pub id: String,
}

pub fn fixture() -> Fixture {
    let ds = parse_csv(fixture_csv().as_bytes(), "loans", "grade", "A").unwrap();
    let mut config = ExperimentConfig::new(
        DataSource::Csv {
            path: PathBuf::from("loans.csv"),
            label_column: "grade".into(),
            positive_label: "A".into(),
        },
        7,
    );
    config.hpo_budget = 3;
    config.background_size = 20;
    let artifact = run_experiment_on(&config, ds).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_artifact(&artifact, dir.path()).unwrap();
    let state = Arc::new(AppState::load_dir(dir.path()).unwrap());
    Fixture {
        app: router(Arc::clone(&state)),
        id: artifact.id,
        state,
        dir,
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("non-JSON body ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).unwrap())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, bytes }
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Structural JSON equality; numbers compare within `tol` so goldens survive
/// last-bit libm differences across platforms.
pub fn json_diff(actual: &Value, expected: &Value, tol: f64, path: &str) -> Option<String> {
    match (actual, expected) {
        (Value::Number(a), Value::Number(b)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            ((x - y).abs() > tol).then(|| format!("{path}: {x} != {y}"))
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Some(format!("{path}: length {} != {}", a.len(), b.len()));
            }
            a.iter()
                .zip(b)
                .enumerate()
                .find_map(|(i, (x, y))| json_diff(x, y, tol, &format!("{path}[{i}]")))
        }
        (Value::Object(a), Value::Object(b)) => {
            let (ka, kb): (Vec<_>, Vec<_>) = (a.keys().collect(), b.keys().collect());
            if ka != kb {
                return Some(format!("{path}: keys {ka:?} != {kb:?}"));
            }
            a.iter().find_map(|(k, v)| json_diff(v, &b[k], tol, &format!("{path}.{k}")))
        }
        (a, b) => (a != b).then(|| format!("{path}: {a} != {b}")),
    }
}

/// Compares against `tests/golden/{name}.json`; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, actual: &Value) -> Result<(), String> {
    let path = golden_dir().join(format!("{name}.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
        return Ok(());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let expected: Value = serde_json::from_str(&text).unwrap();
    match json_diff(actual, &expected, 1e-9, name) {
        None => Ok(()),
        Some(d) => Err(d),
    }
}

/// `(name, method, uri, body)` for every golden request.
pub fn golden_requests(fx: &Fixture) -> Vec<(String, &'static str, String, Option<Value>)> {
    let id = &fx.id;
    let test = &fx.state.experiment(id).unwrap().artifact.split.test;
    let base = format!("/api/experiments/{id}");
    vec![
        ("experiments".into(), "GET", "/api/experiments".into(), None),
        ("models".into(), "GET", format!("{base}/models"), None),
        ("metrics".into(), "GET", format!("{base}/metrics"), None),
        ("global_fi_all".into(), "GET", format!("{base}/global-fi"), None),
        (
            "global_fi_pair".into(),
            "GET",
            format!("{base}/global-fi?models=LogisticRegression_1,LogisticRegression_3"),
            None,
        ),
        (
            "scatter".into(),
            "GET",
            format!("{base}/scatter?x=GBT_2&y=LogisticRegression_2&bins=10"),
            None,
        ),
        ("instance".into(), "GET", format!("{base}/instances/{}", test[0]), None),
        (
            "local_fi_ids".into(),
            "POST",
            format!("{base}/selection/local-fi"),
            Some(serde_json::json!({
                "instance_ids": [test[0], test[3]],
                "model_ids": ["GBT_1", "LogisticRegression_3"],
            })),
        ),
        (
            "local_fi_rect".into(),
            "POST",
            format!("{base}/selection/local-fi"),
            Some(serde_json::json!({
                "rect": {"x_model": "GBT_2", "y_model": "LogisticRegression_2", "x_range": [0.5, 1.0], "y_range": [0.0, 0.4999]},
                "model_ids": ["GBT_2", "LogisticRegression_2"],
                "budget": 16,
            })),
        ),
        ("error_unknown_experiment".into(), "GET", "/api/experiments/nope/metrics".into(), None),
        ("error_unknown_model".into(), "GET", format!("{base}/scatter?x=GBT_2&y=Nope_9"), None),
        ("error_instance_not_in_test".into(), "GET", format!("{base}/instances/99999"), None),
        (
            "error_empty_selection".into(),
            "POST",
            format!("{base}/selection/local-fi"),
            Some(serde_json::json!({"instance_ids": []})),
        ),
        (
            "error_budget_too_large".into(),
            "POST",
            format!("{base}/selection/local-fi"),
            Some(serde_json::json!({"instance_ids": [test[0]], "budget": 9000})),
        ),
    ]
}
