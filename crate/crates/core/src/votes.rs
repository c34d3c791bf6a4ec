use crate::error::{bail, Result};

/// n x m matrix of labeling-function outputs in {-1, 0, +1}; 0 is an abstain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteMatrix {
    n: usize,
    m: usize,
    data: Vec<i8>,
}

impl VoteMatrix {
    pub fn new(n: usize, m: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != n * m {
            bail!(InvalidInput, "vote buffer has {} entries, expected {}", data.len(), n * m);
        }
        if let Some(k) = data.iter().position(|v| !matches!(v, -1..=1)) {
            bail!(Format, "vote at (row {}, col {}) is {}, expected -1, 0 or 1", k / m.max(1), k % m.max(1), data[k]);
        }
        Ok(VoteMatrix { n, m, data })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            bail!(InvalidInput, "ragged vote rows");
        }
        Self::new(rows.len(), m, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.data[i * self.m + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn column(&self, j: usize) -> Vec<i8> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Overwrites column `j`.
    pub fn set_column(&mut self, j: usize, col: &[i8]) {
        assert_eq!(col.len(), self.n);
        for (i, &v) in col.iter().enumerate() {
            debug_assert!((-1..=1).contains(&v));
            self.data[i * self.m + j] = v;
        }
    }

    /// Row indices where source `j` votes.
    pub fn support(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.get(i, j) != 0).collect()
    }

    /// Row indices where source `j` abstains.
    pub fn abstains(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.get(i, j) == 0).collect()
    }

    /// Fraction of rows on which source `j` votes.
    pub fn coverage(&self, j: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let c = (0..self.n).filter(|&i| self.get(i, j) != 0).count();
        c as f64 / self.n as f64
    }

    /// Rows restricted to `idx`.
    pub fn select_rows(&self, idx: &[usize]) -> VoteMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.m);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        VoteMatrix { n: idx.len(), m: self.m, data }
    }
}

/// Gold or dev labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            bail!(Format, "label at row {i} is {}, expected -1 or 1", labels[i]);
        }
        Ok(LabelVector(labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.0.is_empty() {
            return f64::NAN;
        }
        self.0.iter().filter(|&&y| y == 1).count() as f64 / self.0.len() as f64
    }
}

/// Labeled subset of the points: `labels[k]` belongs to row `indices[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DevSet {
    pub indices: Vec<usize>,
    pub labels: Vec<i8>,
}

impl DevSet {
    pub fn new(indices: Vec<usize>, labels: Vec<i8>) -> Result<Self> {
        if indices.len() != labels.len() {
            bail!(InvalidInput, "dev set has {} indices but {} labels", indices.len(), labels.len());
        }
        LabelVector::new(labels.clone())?;
        Ok(DevSet { indices, labels })
    }

    /// Labels for the first `labels.len()` rows.
    pub fn prefix(labels: &LabelVector) -> Self {
        DevSet { indices: (0..labels.len()).collect(), labels: labels.as_slice().to_vec() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return f64::NAN;
        }
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.labels.len() as f64
    }

    pub(crate) fn check_bounds(&self, n: usize) -> Result<()> {
        if let Some(&i) = self.indices.iter().find(|&&i| i >= n) {
            bail!(InvalidInput, "dev index {i} out of range for {n} points");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_counts_nonzero_entries() {
        let v = VoteMatrix::new(4, 1, vec![1, 0, -1, 0]).unwrap();
        assert_eq!(v.coverage(0), 0.5);
        assert_eq!(v.support(0), vec![0, 2]);
        assert_eq!(v.abstains(0), vec![1, 3]);
    }

    #[test]
    fn rejects_out_of_alphabet_with_position() {
        let e = VoteMatrix::new(2, 2, vec![1, 0, 0, 2]).unwrap_err();
        let s = e.to_string();
        assert!(s.contains("row 1") && s.contains("col 1"), "{s}");
    }
}
