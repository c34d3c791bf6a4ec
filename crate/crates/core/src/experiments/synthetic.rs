//! Checkerboard tasks on the unit square with conditionally independent sources.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{DistanceMetric, EmbeddingSet};
use crate::error::{bail, Result};
use crate::votes::{DevSet, LabelVector, VoteMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelLayout {
    /// +1 on cells (i, j) of a k x k grid with i + j even
    Checkerboard { k: usize },
    /// independent fair coin per point
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub layout: LabelLayout,
    pub accuracies: Vec<f64>,
    pub coverages: Vec<f64>,
    /// the first `dev_size` points form the labeled dev set
    pub dev_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub config: SyntheticConfig,
    pub embeddings: EmbeddingSet,
    pub labels: LabelVector,
    pub votes: VoteMatrix,
}

impl SyntheticTask {
    pub fn dev(&self) -> DevSet {
        let d = self.config.dev_size;
        DevSet { indices: (0..d).collect(), labels: self.labels.as_slice()[..d].to_vec() }
    }

    /// Points outside the dev set.
    pub fn test_indices(&self) -> Vec<usize> {
        (self.config.dev_size..self.config.n).collect()
    }
}

// Independent random streams so that changing one knob (say an accuracy)
// leaves every other draw untouched.
const POINTS: u64 = 0;
const LABELS: u64 = 1;
fn support_stream(j: usize) -> u64 {
    16 + 2 * j as u64
}
fn noise_stream(j: usize) -> u64 {
    17 + 2 * j as u64
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn checkerboard_label(x: f64, y: f64, k: usize) -> i8 {
    let cx = ((x * k as f64).floor() as usize).min(k - 1);
    let cy = ((y * k as f64).floor() as usize).min(k - 1);
    if (cx + cy) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Each source votes on a uniformly random subset of `round(coverage * n)`
/// points and is correct there with probability equal to its accuracy.
pub fn sample_votes(labels: &[i8], accuracies: &[f64], coverages: &[f64], seed: u64) -> Result<VoteMatrix> {
    if accuracies.len() != coverages.len() {
        bail!(InvalidInput, "{} accuracies but {} coverages", accuracies.len(), coverages.len());
    }
    for (j, (&a, &p)) in accuracies.iter().zip(coverages).enumerate() {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&p) {
            bail!(InvalidInput, "source {j}: accuracy and coverage must lie in [0, 1]");
        }
    }
    let (n, m) = (labels.len(), accuracies.len());
    let mut data = vec![0i8; n * m];
    for j in 0..m {
        let size = (coverages[j] * n as f64).round() as usize;
        let mut r = rng(seed, support_stream(j));
        let mut in_support = vec![false; n];
        for i in sample(&mut r, n, size.min(n)) {
            in_support[i] = true;
        }
        let mut r = rng(seed, noise_stream(j));
        for i in 0..n {
            let u: f64 = r.random();
            if in_support[i] {
                data[i * m + j] = if u < accuracies[j] { labels[i] } else { -labels[i] };
            }
        }
    }
    VoteMatrix::new(n, m, data)
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticTask> {
    let n = config.n;
    if config.dev_size > n {
        bail!(InvalidInput, "dev size {} exceeds n = {n}", config.dev_size);
    }
    if let LabelLayout::Checkerboard { k: 0 } = config.layout {
        bail!(InvalidInput, "checkerboard needs k >= 1");
    }
    // coordinates are f32 values so a saved and reloaded task is identical
    let mut r = rng(config.seed, POINTS);
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        loop {
            let (x, y): (f32, f32) = (r.random(), r.random());
            if x != 0.0 || y != 0.0 {
                data.push(x as f64);
                data.push(y as f64);
                break;
            }
        }
    }
    let labels: Vec<i8> = match config.layout {
        LabelLayout::Checkerboard { k } => data.chunks_exact(2).map(|p| checkerboard_label(p[0], p[1], k)).collect(),
        LabelLayout::Random => {
            let mut r = rng(config.seed, LABELS);
            (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect()
        }
    };
    let votes = sample_votes(&labels, &config.accuracies, &config.coverages, config.seed)?;
    Ok(SyntheticTask {
        config: config.clone(),
        embeddings: EmbeddingSet::new(n, 2, data)?.with_metric(DistanceMetric::Euclidean),
        labels: LabelVector::new(labels)?,
        votes,
    })
}

/// Checkerboard task with a dev set of n/10 points.
pub fn generate_checkerboard(
    n: usize,
    k: usize,
    m: usize,
    accuracies: &[f64],
    coverages: &[f64],
    seed: u64,
) -> Result<SyntheticTask> {
    if accuracies.len() != m || coverages.len() != m {
        bail!(InvalidInput, "expected {m} accuracies and coverages");
    }
    generate(&SyntheticConfig {
        n,
        layout: LabelLayout::Checkerboard { k },
        accuracies: accuracies.to_vec(),
        coverages: coverages.to_vec(),
        dev_size: n / 10,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_cell_parity() {
        assert_eq!(checkerboard_label(0.05, 0.05, 10), 1);
        assert_eq!(checkerboard_label(0.15, 0.05, 10), -1);
        assert_eq!(checkerboard_label(0.15, 0.15, 10), 1);
        assert_eq!(checkerboard_label(0.999, 0.0, 2), -1);
    }

    #[test]
    fn generator_hits_coverage_and_accuracy() {
        let t = generate_checkerboard(10_000, 10, 3, &[0.89, 0.8, 0.8], &[0.1, 0.5, 0.5], 7).unwrap();
        assert_eq!(t.votes.coverage(0), 0.1);
        assert_eq!(t.votes.coverage(1), 0.5);
        let sup = t.votes.support(0);
        let right = sup.iter().filter(|&&i| t.votes.get(i, 0) == t.labels.as_slice()[i]).count();
        let acc = right as f64 / sup.len() as f64;
        assert!((acc - 0.89).abs() < 0.03, "{acc}");
        let pos = t.labels.positive_fraction();
        assert!((pos - 0.5).abs() < 0.03, "{pos}");
    }

    #[test]
    fn accuracy_change_keeps_supports_and_points() {
        let a = generate_checkerboard(2000, 10, 3, &[0.66, 0.7, 0.7], &[0.1, 0.2, 0.2], 3).unwrap();
        let b = generate_checkerboard(2000, 10, 3, &[0.94, 0.7, 0.7], &[0.1, 0.2, 0.2], 3).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.votes.support(0), b.votes.support(0));
        assert_eq!(a.votes.column(1), b.votes.column(1));
    }
}
