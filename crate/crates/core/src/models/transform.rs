//! Variant feature transforms fitted on training rows and replayable on
//! unseen rows.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, FeatureSchema, FeatureSpec};
use crate::error::{Error, Result};

pub const LOG_PREFIX: &str = "log_";
pub const SKEWNESS_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformOp {
    LogSkewed,
    Standardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TransformStep {
    LogSkewed { columns: Vec<usize> },
    Standardize { columns: Vec<usize>, mean: Vec<f64>, std: Vec<f64> },
}

impl TransformStep {
    fn apply(&self, row: &mut [f64]) {
        match self {
            TransformStep::LogSkewed { columns } => {
                for &j in columns {
                    // fit rows were nonnegative; clamp unseen negatives to the log1p domain
                    row[j] = row[j].max(0.0).ln_1p();
                }
            }
            TransformStep::Standardize { columns, mean, std } => {
                for (k, &j) in columns.iter().enumerate() {
                    row[j] = (row[j] - mean[k]) / std[k];
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub steps: Vec<TransformStep>,
    pub output_schema: FeatureSchema,
}

impl TransformRecord {
    pub fn identity(schema: &FeatureSchema) -> Self {
        TransformRecord {
            steps: Vec::new(),
            output_schema: schema.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = row.to_vec();
        for step in &self.steps {
            step.apply(&mut out);
        }
        out
    }

    pub fn apply_rows(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

/// Population skewness `m3 / m2^1.5`; zero for constant columns.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Fits `ops` on the rows in `fit_indices` and applies them to every row.
///
/// `LogSkewed` replaces each numeric column whose fit rows are all
/// nonnegative with skewness above [`SKEWNESS_THRESHOLD`] by `log(1+x)` and
/// renames it `log_{name}`. `Standardize` centres and scales numeric columns
/// using fit-row mean and population standard deviation. Indicator columns
/// are untouched.
pub fn apply_variant_transform(
    dataset: &Dataset,
    ops: &[TransformOp],
    fit_indices: &[usize],
) -> Result<(Dataset, TransformRecord)> {
    if fit_indices.is_empty() {
        return Err(Error::invalid("transform fit indices are empty"));
    }
    if ops.is_empty() {
        return Ok((dataset.clone(), TransformRecord::identity(dataset.schema())));
    }
    let mut specs: Vec<FeatureSpec> = dataset.schema().entries().to_vec();
    let mut rows: Vec<Vec<f64>> = dataset.rows().to_vec();
    let numeric: Vec<usize> = specs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == FeatureKind::Numeric)
        .map(|(j, _)| j)
        .collect();
    let fit_column = |rows: &[Vec<f64>], j: usize| -> Vec<f64> { fit_indices.iter().map(|&i| rows[i][j]).collect() };

    let mut steps = Vec::new();
    for op in ops {
        match op {
            TransformOp::LogSkewed => {
                let columns: Vec<usize> = numeric
                    .iter()
                    .copied()
                    .filter(|&j| {
                        let col = fit_column(&rows, j);
                        col.iter().all(|&v| v >= 0.0) && skewness(&col) > SKEWNESS_THRESHOLD
                    })
                    .collect();
                let step = TransformStep::LogSkewed { columns };
                apply_step(&step, &mut rows);
                if let TransformStep::LogSkewed { columns } = &step {
                    for &j in columns {
                        let spec = &mut specs[j];
                        spec.name = format!("{LOG_PREFIX}{}", spec.name);
                        spec.transform_tag = Some(LOG_PREFIX.to_string());
                    }
                }
                steps.push(step);
            }
            TransformOp::Standardize => {
                let mut mean = Vec::with_capacity(numeric.len());
                let mut std = Vec::with_capacity(numeric.len());
                for &j in &numeric {
                    let (mu, sd) = mean_std(&fit_column(&rows, j));
                    mean.push(mu);
                    std.push(sd);
                }
                let step = TransformStep::Standardize {
                    columns: numeric.clone(),
                    mean,
                    std,
                };
                apply_step(&step, &mut rows);
                steps.push(step);
            }
        }
    }
    let schema = FeatureSchema::new(specs)?;
    let record = TransformRecord {
        steps,
        output_schema: schema.clone(),
    };
    Ok((dataset.with_features(schema, rows)?, record))
}

fn apply_step(step: &TransformStep, rows: &mut [Vec<f64>]) {
    for row in rows.iter_mut() {
        step.apply(row);
    }
}

/// Mean and population standard deviation; a zero deviation is reported as 1.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_csv;

    fn fixture() -> Dataset {
        // installment: 1,1,1,1,2,2,3,20 -> strongly right-skewed
        let text = "installment,score,term,y\n\
                    1,-1,a,0\n1,2,b,1\n1,-3,a,0\n1,4,b,1\n2,-5,a,0\n2,6,b,1\n3,-7,a,0\n20,8,b,1\n";
        parse_csv(text.as_bytes(), "fx", "y", "1").unwrap()
    }

    #[test]
    fn empty_ops_is_identity() {
        let ds = fixture();
        let (out, rec) = apply_variant_transform(&ds, &[], &[0, 1, 2]).unwrap();
        assert_eq!(out, ds);
        assert!(rec.is_identity());
    }

    #[test]
    fn skewed_nonnegative_column_is_logged() {
        let ds = fixture();
        let col = ds.column(0);
        // m2 and m3 computed by hand for (1,1,1,1,2,2,3,20): mean 31/8
        let mean = 31.0 / 8.0;
        let m2: f64 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
        let m3: f64 = col.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / 8.0;
        let skew = m3 / m2.powf(1.5);
        assert!(skew > 2.0);
        assert!((skewness(&col) - skew).abs() < 1e-12);

        let all: Vec<usize> = (0..8).collect();
        let (out, rec) = apply_variant_transform(&ds, &[TransformOp::LogSkewed], &all).unwrap();
        assert_eq!(out.schema().entries()[0].name, "log_installment");
        assert_eq!(out.schema().entries()[0].base_name(), "installment");
        for (a, b) in out.column(0).iter().zip(&col) {
            assert_eq!(*a, b.ln_1p());
        }
        // score has negative values: untouched even if skewed
        assert_eq!(out.schema().entries()[1].name, "score");
        assert_eq!(out.column(1), ds.column(1));
        assert_eq!(rec.apply_rows(ds.rows()), out.rows());
    }

    #[test]
    fn negative_column_never_logged_even_if_skewed() {
        let text = "a,y\n-1,0\n0,1\n0,0\n0,1\n50,0\n";
        let ds = parse_csv(text.as_bytes(), "fx", "y", "1").unwrap();
        assert!(skewness(&ds.column(0)) > 1.0);
        let (out, _) = apply_variant_transform(&ds, &[TransformOp::LogSkewed], &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(out.schema().names(), vec!["a"]);
    }

    #[test]
    fn standardize_uses_fit_rows_only_and_skips_indicators() {
        let ds = fixture();
        let fit = [0, 1, 2, 3];
        let (out, rec) = apply_variant_transform(&ds, &[TransformOp::LogSkewed, TransformOp::Standardize], &fit).unwrap();
        // installment is constant on fit rows -> skew 0, not logged; std falls back to 1
        assert_eq!(out.schema().entries()[0].name, "installment");
        assert_eq!(out.row(0)[0], 0.0);
        let score_fit: Vec<f64> = fit.iter().map(|&i| out.row(i)[1]).collect();
        assert!(score_fit.iter().sum::<f64>().abs() < 1e-12);
        // one-hot columns untouched
        assert_eq!(out.column(2), ds.column(2));
        assert_eq!(rec.steps.len(), 2);
    }

    #[test]
    fn rejects_empty_fit_rows() {
        assert!(apply_variant_transform(&fixture(), &[TransformOp::Standardize], &[]).is_err());
    }
}
