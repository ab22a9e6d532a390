use std::path::Path;

use lineup_core::experiment::{load_artifact, run_experiment, save_artifact, DataSource};
use lineup_core::metrics::{compute_metrics, rank_metric_columns};
use lineup_core::models::model_display_name;
use lineup_core::{AlgorithmKind, Error, ExperimentConfig, Variant};

fn small_config(seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(DataSource::Synth { n: 300, m: 5, seed: 8 }, seed);
    c.hpo_budget = 3;
    c
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    std::fs::read(dir.join(rel)).unwrap()
}

#[test]
fn full_grid_has_sixteen_conventionally_named_models() {
    let a = run_experiment(&small_config(1)).unwrap();
    assert_eq!(a.models.len(), 16);
    assert_eq!(a.metrics.rows.len(), 16);
    assert_eq!(a.global_fi.len(), 16);
    for algo in AlgorithmKind::ALL {
        for v in Variant::ALL {
            let name = model_display_name(algo, v.id(), v.name()).unwrap();
            assert_eq!(a.models.iter().filter(|m| m.display_name == name).count(), 1, "{name}");
        }
    }
    assert!(a.model("GBT_2").unwrap().display_name == "GBT_2: Hyperparameter Optimization");
    for p in &a.predictions {
        assert_eq!(p.instance_ids, a.split.test);
    }
}

#[test]
fn restricted_grid() {
    let mut c = small_config(1);
    c.algorithms = vec![AlgorithmKind::DecisionTree];
    c.variants = vec![Variant::Default, Variant::HyperparameterOptimization];
    let a = run_experiment(&c).unwrap();
    let names: Vec<&str> = a.models.iter().map(|m| m.display_name.as_str()).collect();
    assert_eq!(names, ["DecisionTree_1: Default", "DecisionTree_2: Hyperparameter Optimization"]);

    c.variants.clear();
    assert!(run_experiment(&c).is_err());
}

#[test]
fn feature_engineering_variants_see_log_features() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("loans.csv");
    std::fs::write(&csv, lineup_core::data::synth_loan_csv(400, 2)).unwrap();
    let mut c = ExperimentConfig::new(
        DataSource::Csv {
            path: csv,
            label_column: "grade".into(),
            positive_label: "A".into(),
        },
        5,
    );
    c.hpo_budget = 2;
    c.algorithms = vec![AlgorithmKind::LogisticRegression];
    let a = run_experiment(&c).unwrap();
    for m in &a.models {
        let has_log = m.feature_names.iter().any(|f| f == "log_installment");
        assert_eq!(has_log, matches!(m.variant.id(), 3 | 4), "{}", m.id);
    }
}

#[test]
fn stored_predictions_reproduce_the_metrics_table() {
    let a = run_experiment(&small_config(2)).unwrap();
    let labels = a.test_labels();
    let rows = a
        .predictions
        .iter()
        .map(|p| compute_metrics(&p.model_id, &labels, &p.probabilities, 0.5).unwrap())
        .collect();
    assert_eq!(rank_metric_columns(rows).unwrap(), a.metrics);
    for v in &a.global_fi {
        assert!(v.values.iter().all(|x| *x >= 0.0));
        assert!(v.degenerate || (v.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn two_runs_write_identical_files() {
    let c = small_config(3);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_artifact(&run_experiment(&c).unwrap(), d1.path()).unwrap();
    save_artifact(&run_experiment(&c).unwrap(), d2.path()).unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&read(d1.path(), "manifest.json")).unwrap();
    let files = manifest["files"].as_object().unwrap();
    assert!(files.len() >= 2 + 2 * 16);
    for rel in files.keys() {
        assert_eq!(read(d1.path(), rel), read(d2.path(), rel), "{rel}");
    }
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&small_config(4)).unwrap();
    let manifest = save_artifact(&a, dir.path()).unwrap();
    assert!(manifest.ends_with("manifest.json"));
    let b = load_artifact(dir.path()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn round_trip_without_dataset_copy_reloads_source() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(4);
    c.copy_dataset = false;
    c.algorithms = vec![AlgorithmKind::LogisticRegression];
    let a = run_experiment(&c).unwrap();
    save_artifact(&a, dir.path()).unwrap();
    assert!(!dir.path().join("dataset.csv").exists());
    assert_eq!(load_artifact(dir.path()).unwrap(), a);
}

#[test]
fn tampering_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(5);
    c.algorithms = vec![AlgorithmKind::DecisionTree];
    save_artifact(&run_experiment(&c).unwrap(), dir.path()).unwrap();
    let path = dir.path().join("predictions/DecisionTree_1.csv");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.extend_from_slice(b"0,0.5\n");
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(load_artifact(dir.path()), Err(Error::HashMismatch { .. })));
}

#[test]
fn bad_directories_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_artifact(dir.path()), Err(Error::NoManifest(_))));
    std::fs::write(dir.path().join("manifest.json"), br#"{"schema_version": 99}"#).unwrap();
    assert!(matches!(
        load_artifact(dir.path()),
        Err(Error::SchemaVersion { found: 99, .. })
    ));
}

#[test]
fn stage_errors_name_the_cell() {
    // 2 positives in 300 rows leave the validation split without any, so tuning has no AUC
    let mut csv = String::from("x,y\n");
    for i in 0..300 {
        csv.push_str(&format!("{},{}\n", i, u8::from(i % 150 == 0)));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rare.csv");
    std::fs::write(&path, csv).unwrap();
    let mut c = ExperimentConfig::new(
        DataSource::Csv {
            path,
            label_column: "y".into(),
            positive_label: "1".into(),
        },
        1,
    );
    c.algorithms = vec![AlgorithmKind::DecisionTree];
    c.variants = vec![Variant::HyperparameterOptimization];
    match run_experiment(&c) {
        Err(Error::Stage { algorithm, variant, .. }) => {
            assert_eq!((algorithm.as_str(), variant), ("DecisionTree", 2));
        }
        other => panic!("expected a stage error, got {other:?}"),
    }
}
