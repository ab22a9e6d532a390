//! Cross-model comparison geometry: importance normalization and panel
//! order, pairwise probability scatter panels, brushing and histograms.
//!
//! Quadrants are numbered counterclockwise from the upper right of a panel
//! whose x axis is one model's probability and y axis the other's:
//!
//! ```text
//!   2 | 1        1: both predict positive   3: both predict negative
//!  ---+---       2: only y predicts positive 4: only x predicts positive
//!   3 | 4
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub model_id: String,
    pub feature_names: Vec<String>,
    pub values: Vec<f64>,
    pub normalized: bool,
    /// The raw vector was all zeros and could not be normalized.
    pub degenerate: bool,
}

impl ImportanceVector {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Divides each entry by the total. An all-zero vector is returned unchanged
/// and flagged degenerate.
pub fn normalize_importance(model_id: &str, feature_names: &[String], raw: &[f64]) -> Result<ImportanceVector> {
    if feature_names.len() != raw.len() {
        return Err(Error::DimensionMismatch {
            expected: feature_names.len(),
            got: raw.len(),
        });
    }
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
        return Err(Error::NegativeImportance { index, value });
    }
    let total: f64 = raw.iter().sum();
    let (values, degenerate) = if total > 0.0 {
        (raw.iter().map(|v| v / total).collect(), false)
    } else {
        (raw.to_vec(), true)
    };
    Ok(ImportanceVector {
        model_id: model_id.to_string(),
        feature_names: feature_names.to_vec(),
        values,
        normalized: !degenerate,
        degenerate,
    })
}

/// Union of feature names in first-appearance order.
pub fn feature_universe(vectors: &[ImportanceVector]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for v in vectors {
        for name in &v.feature_names {
            if seen.insert(name.as_str()) {
                out.push(name.clone());
            }
        }
    }
    out
}

/// Re-expresses every vector over the shared universe, zero-filling
/// features a model does not have.
pub fn align_to_universe(vectors: &[ImportanceVector]) -> (Vec<String>, Vec<ImportanceVector>) {
    let universe = feature_universe(vectors);
    let aligned = vectors
        .iter()
        .map(|v| {
            let lookup: BTreeMap<&str, f64> = v
                .feature_names
                .iter()
                .map(String::as_str)
                .zip(v.values.iter().copied())
                .collect();
            ImportanceVector {
                model_id: v.model_id.clone(),
                feature_names: universe.clone(),
                values: universe.iter().map(|n| lookup.get(n.as_str()).copied().unwrap_or(0.0)).collect(),
                normalized: v.normalized,
                degenerate: v.degenerate,
            }
        })
        .collect();
    (universe, aligned)
}

/// Feature names sorted by mean importance across models, descending;
/// ties alphabetical. Vectors are aligned to their union first.
pub fn order_feature_panels(vectors: &[ImportanceVector]) -> Vec<String> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let (universe, aligned) = align_to_universe(vectors);
    let k = aligned.len() as f64;
    let mut scored: Vec<(String, f64)> = universe
        .into_iter()
        .enumerate()
        .map(|(j, name)| (name, aligned.iter().map(|v| v.values[j]).sum::<f64>() / k))
        .collect();
    scored.sort_by(|(na, a), (nb, b)| b.total_cmp(a).then_with(|| na.cmp(nb)));
    scored.into_iter().map(|(n, _)| n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    TP,
    FP,
    TN,
    FN,
}

impl Outcome {
    pub fn of(prob: f64, label: u8, threshold: f64) -> Self {
        match (prob >= threshold, label == 1) {
            (true, true) => Outcome::TP,
            (true, false) => Outcome::FP,
            (false, false) => Outcome::TN,
            (false, true) => Outcome::FN,
        }
    }

    pub fn predicted_positive(self) -> bool {
        matches!(self, Outcome::TP | Outcome::FP)
    }
}

pub fn classify_quadrant(p_x: f64, p_y: f64, threshold: f64) -> u8 {
    match (p_x >= threshold, p_y >= threshold) {
        (true, true) => 1,
        (false, true) => 2,
        (false, false) => 3,
        (true, false) => 4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub instance_id: usize,
    pub p_x: f64,
    pub p_y: f64,
    pub label: u8,
    pub quadrant: u8,
    pub outcome_x: Outcome,
    pub outcome_y: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPanel {
    pub x_model_id: String,
    pub y_model_id: String,
    pub threshold: f64,
    pub points: Vec<ScatterPoint>,
    /// Counts for quadrants 1..=4.
    pub quadrant_counts: [usize; 4],
}

#[allow(clippy::too_many_arguments)]
pub fn build_scatter_panel(
    x_model_id: &str,
    y_model_id: &str,
    instance_ids: &[usize],
    preds_x: &[f64],
    preds_y: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<ScatterPanel> {
    let n = instance_ids.len();
    for len in [preds_x.len(), preds_y.len(), labels.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut counts = [0usize; 4];
    let points = (0..n)
        .map(|i| {
            let q = classify_quadrant(preds_x[i], preds_y[i], threshold);
            counts[q as usize - 1] += 1;
            ScatterPoint {
                instance_id: instance_ids[i],
                p_x: preds_x[i],
                p_y: preds_y[i],
                label: labels[i],
                quadrant: q,
                outcome_x: Outcome::of(preds_x[i], labels[i], threshold),
                outcome_y: Outcome::of(preds_y[i], labels[i], threshold),
            }
        })
        .collect();
    Ok(ScatterPanel {
        x_model_id: x_model_id.to_string(),
        y_model_id: y_model_id.to_string(),
        threshold,
        points,
        quadrant_counts: counts,
    })
}

/// Closed rectangle on one panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectSelection {
    pub x_model: String,
    pub y_model: String,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
}

impl RectSelection {
    pub fn validate(&self) -> Result<()> {
        for (axis, [lo, hi]) in [("x", self.x_range), ("y", self.y_range)] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::invalid(format!(
                    "{axis} range [{lo}, {hi}] must be a nonempty interval within [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p_x: f64, p_y: f64) -> bool {
        (self.x_range[0]..=self.x_range[1]).contains(&p_x) && (self.y_range[0]..=self.y_range[1]).contains(&p_y)
    }
}

/// Ids of the points inside `rect`, in panel order.
pub fn select_in_rect(panel: &ScatterPanel, rect: &RectSelection) -> Result<Vec<usize>> {
    rect.validate()?;
    if rect.x_model != panel.x_model_id || rect.y_model != panel.y_model_id {
        return Err(Error::invalid(format!(
            "rectangle drawn on ({}, {}) applied to panel ({}, {})",
            rect.x_model, rect.y_model, panel.x_model_id, panel.y_model_id
        )));
    }
    Ok(panel
        .points
        .iter()
        .filter(|p| rect.contains(p.p_x, p.p_y))
        .map(|p| p.instance_id)
        .collect())
}

/// Equal-width bins over [0, 1]; the last bin is closed on the right.
pub fn probability_histogram(preds: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins < 2 {
        return Err(Error::invalid("histogram needs at least 2 bins"));
    }
    let mut counts = vec![0usize; bins];
    for &p in preds {
        let b = ((p.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts)
}
