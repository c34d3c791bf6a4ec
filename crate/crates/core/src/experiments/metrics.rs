use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Accuracy,
    F1,
    /// F1 when positives make up less than 35% of the labels, else accuracy
    #[default]
    Auto,
}

pub const IMBALANCE_THRESHOLD: f64 = 0.35;

impl MetricKind {
    pub fn resolve(self, positive_fraction: f64) -> MetricKind {
        match self {
            MetricKind::Auto if positive_fraction < IMBALANCE_THRESHOLD => MetricKind::F1,
            MetricKind::Auto => MetricKind::Accuracy,
            k => k,
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "accuracy" => Ok(MetricKind::Accuracy),
            "f1" => Ok(MetricKind::F1),
            "auto" => Ok(MetricKind::Auto),
            other => Err(format!("unknown metric '{other}' (expected accuracy|f1|auto)")),
        }
    }
}

impl Metrics {
    /// Value of an already resolved metric.
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Accuracy => self.accuracy,
            MetricKind::F1 => self.f1,
            MetricKind::Auto => panic!("resolve the metric kind first"),
        }
    }
}

/// Positive class is +1. Precision is 0 when nothing is predicted positive,
/// and F1 is 0 when precision and recall are both 0.
pub fn evaluate(pred: &[i8], gold: &[i8]) -> Result<Metrics> {
    if pred.len() != gold.len() {
        bail!(InvalidInput, "{} predictions for {} labels", pred.len(), gold.len());
    }
    if pred.is_empty() {
        bail!(InvalidInput, "nothing to evaluate");
    }
    let (mut tp, mut fp, mut fn_, mut right) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gold) {
        right += (p == g) as usize;
        match (p == 1, g == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Metrics { n: pred.len(), accuracy: right as f64 / pred.len() as f64, precision, recall, f1 })
}
