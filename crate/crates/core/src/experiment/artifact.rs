//! On-disk layout:
//!
//! ```text
//! manifest.json
//! dataset.csv              (when the config asks for a copy)
//! metrics.json
//! global_fi.json
//! models/{model_id}.json
//! predictions/{model_id}.csv
//! ```
//!
//! The manifest is written last and lists a SHA-256 for every other file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ArtifactMetadata, ExperimentArtifact, ExperimentConfig, ModelPredictions};
use crate::compare::ImportanceVector;
use crate::data::{self, Dataset, SplitIndices};
use crate::error::{Error, Result};
use crate::metrics::RankedMetricsTable;
use crate::models::{AlgorithmKind, TrainedModel, Variant};

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const DATASET: &str = "dataset.csv";
const METRICS: &str = "metrics.json";
const GLOBAL_FI: &str = "global_fi.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestModel {
    pub id: String,
    pub display_name: String,
    pub algorithm: AlgorithmKind,
    pub variant: Variant,
    pub model_file: String,
    pub predictions_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub id: String,
    pub dataset_name: String,
    pub dataset_fingerprint: String,
    pub config: ExperimentConfig,
    pub split: SplitIndices,
    pub models: Vec<ManifestModel>,
    /// Relative path → lowercase hex SHA-256.
    pub files: BTreeMap<String, String>,
    pub metadata: ArtifactMetadata,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer<'a> {
    root: &'a Path,
    files: BTreeMap<String, String>,
}

impl Writer<'_> {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

fn predictions_csv(p: &ModelPredictions) -> Vec<u8> {
    // `{}` on f64 prints the shortest string that parses back to the same bits
    let mut out = String::from("instance_id,probability\n");
    for (id, prob) in p.instance_ids.iter().zip(&p.probabilities) {
        out.push_str(&format!("{id},{prob}\n"));
    }
    out.into_bytes()
}

/// Writes `artifact` under `dir`, creating it if needed, and returns the
/// manifest path.
pub fn save_artifact(artifact: &ExperimentArtifact, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let root = dir.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut w = Writer {
        root,
        files: BTreeMap::new(),
    };

    if artifact.config.copy_dataset {
        let mut buf = Vec::new();
        artifact.dataset.raw().write_csv(&mut buf)?;
        w.put(DATASET, &buf)?;
    }
    w.put(METRICS, &serde_json::to_vec_pretty(&artifact.metrics)?)?;
    w.put(GLOBAL_FI, &serde_json::to_vec_pretty(&artifact.global_fi)?)?;

    let mut entries = Vec::with_capacity(artifact.models.len());
    for model in &artifact.models {
        let preds = artifact
            .predictions(&model.id)
            .ok_or_else(|| Error::invalid(format!("no predictions for {}", model.id)))?;
        let model_file = format!("models/{}.json", model.id);
        let predictions_file = format!("predictions/{}.csv", model.id);
        w.put(&model_file, &serde_json::to_vec_pretty(model)?)?;
        w.put(&predictions_file, &predictions_csv(preds))?;
        entries.push(ManifestModel {
            id: model.id.clone(),
            display_name: model.display_name.clone(),
            algorithm: model.algorithm,
            variant: model.variant,
            model_file,
            predictions_file,
        });
    }

    let manifest = Manifest {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        id: artifact.id.clone(),
        dataset_name: artifact.dataset.name().to_string(),
        dataset_fingerprint: artifact.dataset_fingerprint.clone(),
        config: artifact.config.clone(),
        split: artifact.split.clone(),
        models: entries,
        files: w.files,
        metadata: artifact.metadata.clone(),
    };
    let path = root.join(MANIFEST);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    log::info!("saved artifact {} to {}", artifact.id, root.display());
    Ok(path)
}

fn safe_relative(rel: &str) -> Result<()> {
    let ok = !rel.is_empty() && Path::new(rel).components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("manifest path {rel:?} escapes the artifact directory")))
    }
}

struct Verified {
    root: PathBuf,
    contents: BTreeMap<String, Vec<u8>>,
}

impl Verified {
    fn take(&mut self, rel: &str) -> Result<Vec<u8>> {
        self.contents.remove(rel).ok_or_else(|| Error::HashMismatch {
            file: self.root.join(rel).display().to_string(),
        })
    }
}

fn read_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST);
    if !path.is_file() {
        return Err(Error::NoManifest(root.to_path_buf()));
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if found != ARTIFACT_SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            found: found as u32,
            expected: ARTIFACT_SCHEMA_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}

fn parse_predictions(model_id: &str, bytes: &[u8]) -> Result<ModelPredictions> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut instance_ids = Vec::new();
    let mut probabilities = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = || Error::invalid(format!("malformed prediction row for {model_id}"));
        instance_ids.push(rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?);
        probabilities.push(rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?);
    }
    Ok(ModelPredictions {
        model_id: model_id.to_string(),
        instance_ids,
        probabilities,
    })
}

/// Loads and verifies an artifact. Every file listed in the manifest must
/// hash to its recorded digest, and the dataset (the stored copy, or the
/// original source when no copy was kept) must reproduce the fingerprint.
pub fn load_artifact(dir: impl AsRef<Path>) -> Result<ExperimentArtifact> {
    let root = dir.as_ref();
    let manifest = read_manifest(root)?;

    let mut verified = Verified {
        root: root.to_path_buf(),
        contents: BTreeMap::new(),
    };
    for (rel, digest) in &manifest.files {
        safe_relative(rel)?;
        let path = root.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != *digest {
            return Err(Error::HashMismatch {
                file: path.display().to_string(),
            });
        }
        verified.contents.insert(rel.clone(), bytes);
    }

    let source = &manifest.config.source;
    let dataset: Dataset = if manifest.config.copy_dataset {
        let bytes = verified.take(DATASET)?;
        data::parse_csv(
            bytes.as_slice(),
            &manifest.dataset_name,
            source.label_column(),
            source.positive_label(),
        )?
    } else {
        let ds = source.load()?;
        Dataset::new(
            manifest.dataset_name.clone(),
            ds.schema().clone(),
            ds.rows().to_vec(),
            ds.labels().to_vec(),
            ds.positive_class_name(),
            ds.raw().clone(),
        )?
    };
    if dataset.fingerprint() != manifest.dataset_fingerprint {
        return Err(Error::HashMismatch {
            file: "dataset (fingerprint)".to_string(),
        });
    }

    let metrics: RankedMetricsTable = serde_json::from_slice(&verified.take(METRICS)?)?;
    let global_fi: Vec<ImportanceVector> = serde_json::from_slice(&verified.take(GLOBAL_FI)?)?;
    let mut models = Vec::with_capacity(manifest.models.len());
    let mut predictions = Vec::with_capacity(manifest.models.len());
    for entry in &manifest.models {
        let model: TrainedModel = serde_json::from_slice(&verified.take(&entry.model_file)?)?;
        if model.id != entry.id {
            return Err(Error::invalid(format!("model file {} holds {}", entry.model_file, model.id)));
        }
        if model.feature_names.len() != model.transform.output_schema.len() {
            return Err(Error::DimensionMismatch {
                expected: model.transform.output_schema.len(),
                got: model.feature_names.len(),
            });
        }
        predictions.push(parse_predictions(&entry.id, &verified.take(&entry.predictions_file)?)?);
        models.push(model);
    }

    Ok(ExperimentArtifact {
        id: manifest.id,
        config: manifest.config,
        dataset: Arc::new(dataset),
        dataset_fingerprint: manifest.dataset_fingerprint,
        split: manifest.split,
        models,
        predictions,
        metrics,
        global_fi,
        metadata: manifest.metadata,
    })
}
