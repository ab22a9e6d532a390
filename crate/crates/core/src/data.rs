//! Tabular dataset ingestion, deterministic stratified splits and synthetic
//! fixtures with known ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// One-hot indicator derived from a categorical column.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Prefix such as `log_` that is already part of `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform_tag: Option<String>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            transform_tag: None,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical,
            transform_tag: None,
        }
    }

    /// Name of the untransformed column this feature was derived from.
    pub fn base_name(&self) -> &str {
        match &self.transform_tag {
            Some(tag) => self.name.strip_prefix(tag.as_str()).unwrap_or(&self.name),
            None => &self.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    entries: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(entries: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name `{}`", e.name)));
            }
            if let Some(tag) = &e.transform_tag {
                if !e.name.starts_with(tag.as_str()) {
                    return Err(Error::invalid(format!(
                        "feature `{}` does not carry its transform tag `{tag}`",
                        e.name
                    )));
                }
            }
        }
        Ok(FeatureSchema { entries })
    }

    pub fn entries(&self) -> &[FeatureSpec] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }
}

/// The CSV cells as read, before encoding or imputation. Kept so that raw
/// rows can be shown to users and the dataset can be copied verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub label_column: String,
}

impl RawTable {
    /// Column/value pairs of row `idx`, label column excluded.
    pub fn fields(&self, idx: usize) -> Vec<(String, String)> {
        self.columns
            .iter()
            .zip(&self.rows[idx])
            .filter(|(c, _)| **c != self.label_column)
            .map(|(c, v)| (c.clone(), v.clone()))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    schema: FeatureSchema,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
    positive_class_name: String,
    raw: RawTable,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        positive_class_name: impl Into<String>,
        raw: RawTable,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        if schema.is_empty() {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        if labels.len() != rows.len() || raw.rows.len() != rows.len() {
            return Err(Error::invalid("rows, labels and raw table differ in length"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != schema.len()) {
            return Err(Error::DimensionMismatch {
                expected: schema.len(),
                got: bad.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(Dataset {
            name: name.into(),
            schema,
            rows,
            labels,
            positive_class_name: positive_class_name.into(),
            raw,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
    pub fn row(&self, idx: usize) -> &[f64] {
        &self.rows[idx]
    }
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
    pub fn positive_class_name(&self) -> &str {
        &self.positive_class_name
    }
    pub fn raw(&self) -> &RawTable {
        &self.raw
    }
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Same labels and raw table with new encoded features.
    pub(crate) fn with_features(&self, schema: FeatureSchema, rows: Vec<Vec<f64>>) -> Result<Self> {
        Dataset::new(
            self.name.clone(),
            schema,
            rows,
            self.labels.clone(),
            self.positive_class_name.clone(),
            self.raw.clone(),
        )
    }

    /// SHA-256 over the encoded content (schema, values, labels).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for e in self.schema.entries() {
            h.update(e.name.as_bytes());
            h.update([0u8, e.kind as u8]);
        }
        for (row, label) in self.rows.iter().zip(&self.labels) {
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update([*label]);
        }
        h.update(self.positive_class_name.as_bytes());
        hex::encode(h.finalize())
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_csv(file, &name, label_column, positive_label)
}

/// Parses CSV with a header row. Numeric columns (every non-empty cell parses
/// as a finite number) are kept; other columns are one-hot encoded as
/// `{col}={value}`. Missing cells are imputed with the median or the mode.
pub fn parse_csv<R: Read>(
    reader: R,
    name: &str,
    label_column: &str,
    positive_label: &str,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let label_idx = columns
        .iter()
        .position(|c| c == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;

    let mut label_values = BTreeSet::new();
    for (r, row) in rows.iter().enumerate() {
        let v = row[label_idx].trim();
        if v.is_empty() {
            return Err(Error::MissingLabel(r));
        }
        label_values.insert(v.to_string());
    }
    match label_values.len() {
        1 => return Err(Error::ConstantLabel(label_column.to_string())),
        2 => {}
        distinct => {
            return Err(Error::NonBinaryLabel {
                column: label_column.to_string(),
                distinct,
            })
        }
    }
    if !label_values.contains(positive_label.trim()) {
        return Err(Error::UnknownPositiveLabel(positive_label.to_string()));
    }
    let labels: Vec<u8> = rows
        .iter()
        .map(|row| u8::from(row[label_idx].trim() == positive_label.trim()))
        .collect();

    let n = rows.len();
    let mut specs = Vec::new();
    let mut encoded: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (c, col) in columns.iter().enumerate() {
        if c == label_idx {
            continue;
        }
        let cells: Vec<&str> = rows.iter().map(|r| r[c].trim()).collect();
        let parsed: Vec<Option<f64>> = cells
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let numeric = cells
            .iter()
            .zip(&parsed)
            .all(|(s, p)| s.is_empty() || p.is_some());
        if numeric {
            let mut present: Vec<f64> = parsed.iter().flatten().copied().collect();
            let fill = median(&mut present).unwrap_or(0.0);
            specs.push(FeatureSpec::numeric(col.clone()));
            for (r, p) in parsed.iter().enumerate() {
                encoded[r].push(p.unwrap_or(fill));
            }
        } else {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for s in cells.iter().filter(|s| !s.is_empty()) {
                *counts.entry(s).or_default() += 1;
            }
            // BTreeMap iteration is sorted, so max_by_key keeps the last maximum;
            // reverse to make the lexicographically smallest mode win ties.
            let mode = counts
                .iter()
                .rev()
                .max_by_key(|(_, &k)| k)
                .map(|(v, _)| *v)
                .unwrap_or("");
            for value in counts.keys() {
                specs.push(FeatureSpec::categorical(format!("{col}={value}")));
                for (r, s) in cells.iter().enumerate() {
                    let s = if s.is_empty() { mode } else { s };
                    encoded[r].push(if s == *value { 1.0 } else { 0.0 });
                }
            }
        }
    }
    let schema = FeatureSchema::new(specs)?;
    let raw = RawTable {
        columns,
        rows,
        label_column: label_column.to_string(),
    };
    Dataset::new(name, schema, encoded, labels, positive_label.trim(), raw)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Stratified split. Validation and test sizes are the rounded fractions of
/// `n`; the remainder goes to train. Positives are allotted to each split in
/// proportion, again with the remainder going to train. Index lists are
/// sorted ascending.
pub fn make_splits(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<SplitIndices> {
    let SplitRatios {
        train,
        validation,
        test,
    } = ratios;
    if train <= 0.0 || validation <= 0.0 || test <= 0.0 || ((train + validation + test) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must be positive and sum to 1, got ({train}, {validation}, {test})"
        )));
    }
    let n = dataset.n_rows();
    let n_val = (n as f64 * validation).round() as usize;
    let n_test = (n as f64 * test).round() as usize;
    if n_val == 0 || n_test == 0 || n_val + n_test >= n {
        return Err(Error::TooFewRows { n });
    }
    let n_train = n - n_val - n_test;

    let mut pos: Vec<usize> = (0..n).filter(|&i| dataset.labels()[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| dataset.labels()[i] == 0).collect();
    let n_pos = pos.len();
    let mut rng = rng::seeded(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let share = |size: usize| -> usize {
        let ideal = (size as f64 * n_pos as f64 / n as f64).round() as usize;
        // keep the split fillable from the negatives that exist
        let min_pos = size.saturating_sub(n - n_pos);
        ideal.clamp(min_pos, size.min(n_pos))
    };
    let pos_test = share(n_test);
    let pos_val = share(n_val).min(n_pos - pos_test);
    let pos_train = n_pos - pos_test - pos_val;
    if pos_train > n_train {
        return Err(Error::TooFewRows { n });
    }

    let mut take = |pos_k: usize, size: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = pos.drain(..pos_k).collect();
        idx.extend(neg.drain(..size - pos_k));
        idx.sort_unstable();
        idx
    };
    let test_idx = take(pos_test, n_test);
    let val_idx = take(pos_val, n_val);
    let train_idx = take(pos_train, n_train);
    Ok(SplitIndices {
        train: train_idx,
        validation: val_idx,
        test: test_idx,
        seed,
    })
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gaussian features with a linear labelling rule `sigmoid(w·x) > 0.5`.
///
/// Features and weights are standard normal draws. If the positive rate falls
/// outside [0.3, 0.7] the draw is repeated with the next seed offset.
pub fn synth_dataset(n: usize, m: usize, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    if n < 4 || m < 1 {
        return Err(Error::invalid(format!("synth_dataset needs n >= 4 and m >= 1, got n={n}, m={m}")));
    }
    for offset in 0u64.. {
        let mut rng = rng::seeded(seed.wrapping_add(offset));
        let weights: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|x| {
                let z: f64 = x.iter().zip(&weights).map(|(a, b)| a * b).sum();
                u8::from(sigmoid(z) > 0.5)
            })
            .collect();
        let rate = labels.iter().map(|&l| l as f64).sum::<f64>() / n as f64;
        if !(0.3..=0.7).contains(&rate) {
            continue;
        }
        let names: Vec<String> = (0..m).map(|j| format!("x{j}")).collect();
        let schema = FeatureSchema::new(names.iter().cloned().map(FeatureSpec::numeric).collect())?;
        let mut columns = names;
        columns.push("label".to_string());
        let raw_rows = rows
            .iter()
            .zip(&labels)
            .map(|(x, l)| {
                let mut cells: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                cells.push(l.to_string());
                cells
            })
            .collect();
        let raw = RawTable {
            columns,
            rows: raw_rows,
            label_column: "label".to_string(),
        };
        let ds = Dataset::new(format!("synth_n{n}_m{m}_s{seed}"), schema, rows, labels, "1", raw)?;
        return Ok((ds, weights));
    }
    unreachable!("seed offsets are unbounded")
}

/// Loan-application style CSV used as a fixture: skewed nonnegative amounts,
/// a categorical term, a signed score and a `grade` label in {A, C}.
pub fn synth_loan_csv(n: usize, seed: u64) -> String {
    let mut rng = rng::seeded(seed);
    let mut out = String::from("installment,fico,term,dti,grade\n");
    for i in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let installment = (5.5 + 0.7 * z).exp();
        let fico_noise: f64 = rng.sample(StandardNormal);
        let fico = 700.0 + 35.0 * fico_noise;
        let term = if rng.random::<f64>() < 0.35 { "60mo" } else { "36mo" };
        let dti_noise: f64 = rng.sample(StandardNormal);
        let dti = 18.0 + 8.0 * dti_noise;
        let noise: f64 = rng.sample(StandardNormal);
        let score = 0.04 * (fico - 700.0) - 0.004 * (installment - 300.0)
            - if term == "60mo" { 0.8 } else { 0.0 }
            - 0.05 * (dti - 18.0)
            + 0.6 * noise;
        let grade = if score > 0.0 { "A" } else { "C" };
        // sprinkle a few missing cells to exercise imputation
        let dti_cell = if i % 37 == 5 {
            String::new()
        } else {
            format!("{dti:.2}")
        };
        let term_cell = if i % 53 == 7 { "" } else { term };
        out.push_str(&format!(
            "{installment:.2},{fico:.0},{term_cell},{dti_cell},{grade}\n"
        ));
    }
    out
}
