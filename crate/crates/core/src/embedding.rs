use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Cosine,
    Euclidean,
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cosine" => Ok(DistanceMetric::Cosine),
            "euclidean" => Ok(DistanceMetric::Euclidean),
            other => Err(format!("unknown distance '{other}' (expected cosine|euclidean)")),
        }
    }
}

/// Fixed-order dot product. Every distance in the crate goes through this so
/// that the same pair always produces the same bits.
#[inline]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in u.iter().zip(v) {
        s += a * b;
    }
    s
}

#[inline]
pub(crate) fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

#[inline]
pub(crate) fn cosine_from_parts(uv: f64, nu: f64, nv: f64) -> f64 {
    (1.0 - uv / (nu * nv)).clamp(0.0, 2.0)
}

/// `1 - <u,v> / (|u| |v|)`, clamped to `[0, 2]`. NaN if either vector is zero.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "dimension mismatch");
    cosine_from_parts(dot(u, v), norm(u), norm(v))
}

pub fn euclidean_distance(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "dimension mismatch");
    let mut s = 0.0;
    for (a, b) in u.iter().zip(v) {
        let t = a - b;
        s += t * t;
    }
    s.sqrt()
}

/// n points in R^d, row-major, plus the distance used to compare them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n: usize,
    d: usize,
    data: Vec<f64>,
    metric: DistanceMetric,
}

impl EmbeddingSet {
    /// Validates that every entry is finite and no row is all zeros.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            bail!(InvalidInput, "embedding dimension must be positive");
        }
        if data.len() != n * d {
            bail!(InvalidInput, "embedding buffer has {} values, expected {}", data.len(), n * d);
        }
        for (i, row) in data.chunks_exact(d).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                bail!(Format, "non-finite embedding entry in row {i}");
            }
            if row.iter().all(|&x| x == 0.0) {
                bail!(Format, "embedding row {i} is the zero vector");
            }
        }
        Ok(EmbeddingSet { n, d, data, metric: DistanceMetric::Cosine })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            bail!(InvalidInput, "ragged embedding rows");
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn with_metric(mut self, metric: DistanceMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match self.metric {
            DistanceMetric::Cosine => cosine_distance(self.row(i), self.row(j)),
            DistanceMetric::Euclidean => euclidean_distance(self.row(i), self.row(j)),
        }
    }

    /// Copy of the rows listed in `idx`, same metric.
    pub fn select(&self, idx: &[usize]) -> EmbeddingSet {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingSet { n: idx.len(), d: self.d, data, metric: self.metric }
    }
}
