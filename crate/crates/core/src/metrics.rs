//! Binary classification metrics and within-column dense ranks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG_LOSS_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model_id: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the labels contain a single class.
    pub roc_auc: Option<f64>,
    pub log_loss: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
    RocAuc,
    LogLoss,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::RocAuc,
        Metric::LogLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::RocAuc => "roc_auc",
            Metric::LogLoss => "log_loss",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::LogLoss)
    }

    pub fn value(self, row: &MetricsRow) -> Option<f64> {
        match self {
            Metric::Accuracy => Some(row.accuracy),
            Metric::Precision => Some(row.precision),
            Metric::Recall => Some(row.recall),
            Metric::F1 => Some(row.f1),
            Metric::RocAuc => row.roc_auc,
            Metric::LogLoss => Some(row.log_loss),
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(model_id: &str, labels: &[u8], probs: &[f64], threshold: f64) -> Result<MetricsRow> {
    if labels.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: probs.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::invalid("metrics need at least one instance"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut log_loss = 0.0;
    for (&y, &p) in labels.iter().zip(probs) {
        match (p >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        let pc = p.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
        log_loss -= if y == 1 { pc.ln() } else { (1.0 - pc).ln() };
    }
    let n = labels.len();
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsRow {
        model_id: model_id.to_string(),
        accuracy: ratio(tp + tn, n),
        precision,
        recall,
        f1,
        roc_auc: roc_auc(labels, probs).ok(),
        log_loss: log_loss / n as f64,
        tp,
        fp,
        tn,
        fn_,
    })
}

/// Mann-Whitney statistic: the fraction of (positive, negative) pairs where
/// the positive scores higher, ties counting one half. Computed from
/// midranks in O(n log n).
pub fn roc_auc(labels: &[u8], probs: &[f64]) -> Result<f64> {
    if labels.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: probs.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    // sum of doubled midranks of positives keeps everything integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1, doubled midrank = i + j + 2
        let mid2 = (i + j + 2) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        rank_sum2 += mid2 * pos_in_group;
        i = j + 1;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    // U = R - p(p+1)/2, doubled
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRanks {
    pub accuracy: u32,
    pub precision: u32,
    pub recall: u32,
    pub f1: u32,
    pub roc_auc: Option<u32>,
    pub log_loss: u32,
}

impl MetricRanks {
    pub fn get(&self, metric: Metric) -> Option<u32> {
        match metric {
            Metric::Accuracy => Some(self.accuracy),
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::F1 => Some(self.f1),
            Metric::RocAuc => self.roc_auc,
            Metric::LogLoss => Some(self.log_loss),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMetricsTable {
    pub rows: Vec<MetricsRow>,
    /// Aligned with `rows`.
    pub ranks: Vec<MetricRanks>,
}

/// Dense ranks of `values` (1 = best). `None` entries stay unranked.
pub fn dense_ranks(values: &[Option<f64>], higher_is_better: bool) -> Vec<Option<u32>> {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
    distinct.sort_by(|a, b| if higher_is_better { b.total_cmp(a) } else { a.total_cmp(b) });
    distinct.dedup();
    values
        .iter()
        .map(|v| {
            v.map(|x| {
                let pos = distinct
                    .iter()
                    .position(|d| *d == x)
                    .expect("value present in distinct list");
                pos as u32 + 1
            })
        })
        .collect()
}

pub fn rank_metric_columns(rows: Vec<MetricsRow>) -> Result<RankedMetricsTable> {
    if rows.is_empty() {
        return Err(Error::invalid("metrics table needs at least one row"));
    }
    let column = |m: Metric| {
        let values: Vec<Option<f64>> = rows.iter().map(|r| m.value(r)).collect();
        dense_ranks(&values, m.higher_is_better())
    };
    let cols: Vec<Vec<Option<u32>>> = Metric::ALL.iter().map(|&m| column(m)).collect();
    let ranks = (0..rows.len())
        .map(|i| MetricRanks {
            accuracy: cols[0][i].expect("always defined"),
            precision: cols[1][i].expect("always defined"),
            recall: cols[2][i].expect("always defined"),
            f1: cols[3][i].expect("always defined"),
            roc_auc: cols[4][i],
            log_loss: cols[5][i].expect("always defined"),
        })
        .collect();
    Ok(RankedMetricsTable { rows, ranks })
}
