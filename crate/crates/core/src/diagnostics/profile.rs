//! Pair-sampling estimates of local smoothness as a function of radius.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{bail, Result};
use crate::votes::{DevSet, VoteMatrix};

pub const DEFAULT_PAIR_BUDGET: usize = 500_000;

/// `k` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && k >= 1);
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| match i {
            0 => lo,
            _ if i == k - 1 => hi,
            _ => (a + (b - a) * i as f64 / (k - 1) as f64).exp(),
        })
        .collect()
}

/// 32 log-spaced radii in [0.01, 1].
pub fn default_grid() -> Vec<f64> {
    log_grid(0.01, 1.0, 32)
}

/// Unordered pairs of distinct points with their distances, sorted by distance.
#[derive(Debug, Clone)]
pub struct PairSample {
    pairs: Vec<(u32, u32)>,
    dist: Vec<f64>,
    exhaustive: bool,
}

impl PairSample {
    /// All pairs of `points` if there are at most `budget` of them, otherwise
    /// `budget` uniformly random pairs drawn with replacement.
    pub fn draw(emb: &EmbeddingSet, points: &[usize], budget: usize, seed: u64) -> Self {
        let k = points.len();
        let total = k * k.saturating_sub(1) / 2;
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(total.min(budget));
        let exhaustive = total <= budget;
        if exhaustive {
            for a in 0..k {
                for b in a + 1..k {
                    pairs.push((points[a] as u32, points[b] as u32));
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..budget {
                let a = rng.random_range(0..k);
                let mut b = rng.random_range(0..k - 1);
                if b >= a {
                    b += 1;
                }
                pairs.push((points[a] as u32, points[b] as u32));
            }
        }
        let dist: Vec<f64> = pairs.par_iter().map(|&(a, b)| emb.distance(a as usize, b as usize)).collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&x, &y| dist[x].total_cmp(&dist[y]).then(x.cmp(&y)));
        PairSample {
            pairs: order.iter().map(|&i| pairs[i]).collect(),
            dist: order.iter().map(|&i| dist[i]).collect(),
            exhaustive,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn exhaustive(&self) -> bool {
        self.exhaustive
    }

    /// Number of sampled pairs at distance <= r.
    pub fn count_within(&self, r: f64) -> usize {
        self.dist.partition_point(|&d| d <= r)
    }

    /// Fraction of sampled pairs at distance <= r.
    pub fn within_fraction(&self, r: f64) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.count_within(r) as f64 / self.pairs.len() as f64
    }

    /// For each radius, the fraction of pairs within it on which `differ`
    /// is true; None where no pair is within the radius.
    pub fn rate<F: Fn(usize, usize) -> bool>(&self, grid: &[f64], differ: F) -> Vec<Option<f64>> {
        let mut cum = Vec::with_capacity(self.pairs.len() + 1);
        cum.push(0usize);
        for &(a, b) in &self.pairs {
            let last = *cum.last().unwrap();
            cum.push(last + differ(a as usize, b as usize) as usize);
        }
        grid.iter()
            .map(|&r| {
                let c = self.count_within(r);
                (c > 0).then(|| cum[c] as f64 / c as f64)
            })
            .collect()
    }
}

/// Disagreement rate of one binary attribute among close pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub grid: Vec<f64>,
    /// None where no sampled pair is within the radius
    pub rate: Vec<Option<f64>>,
    pub pairs_within: Vec<usize>,
    pub within_fraction: Vec<f64>,
    pub pairs: usize,
    pub exhaustive: bool,
}

/// Estimates Pr(attr(X) != attr(X') | d(X, X') <= r) over pairs of `points`;
/// `attr[k]` belongs to `points[k]`.
pub fn estimate_profile(
    emb: &EmbeddingSet,
    points: &[usize],
    attr: &[i8],
    grid: &[f64],
    budget: usize,
    seed: u64,
) -> Result<RateCurve> {
    if points.len() != attr.len() {
        bail!(InvalidInput, "{} points but {} attribute values", points.len(), attr.len());
    }
    if let Some(&i) = points.iter().find(|&&i| i >= emb.n()) {
        bail!(InvalidInput, "point {i} out of range");
    }
    let mut value = vec![0i8; emb.n()];
    for (&i, &a) in points.iter().zip(attr) {
        value[i] = a;
    }
    let sample = PairSample::draw(emb, points, budget, seed);
    Ok(RateCurve {
        grid: grid.to_vec(),
        rate: sample.rate(grid, |a, b| value[a] != value[b]),
        pairs_within: grid.iter().map(|&r| sample.count_within(r)).collect(),
        within_fraction: grid.iter().map(|&r| sample.within_fraction(r)).collect(),
        pairs: sample.len(),
        exhaustive: sample.exhaustive(),
    })
}

/// Radius-indexed smoothness estimates for labels and every source's support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub grid: Vec<f64>,
    /// label disagreement among close dev pairs; None if no pair or no dev set
    pub m_y: Vec<Option<f64>>,
    /// `l[j][g]`: support-indicator disagreement of source j among close pairs
    pub l: Vec<Vec<Option<f64>>>,
    /// fraction of all pairs within each radius
    pub p_d: Vec<f64>,
    pub pairs: usize,
    pub dev_pairs: usize,
    pub exhaustive: bool,
}

impl LipschitzProfile {
    /// Radii at which some estimate is undefined for lack of close pairs.
    pub fn undefined_radii(&self) -> Vec<f64> {
        self.grid
            .iter()
            .enumerate()
            .filter(|&(g, _)| self.l.iter().any(|c| c[g].is_none()) || self.m_y[g].is_none())
            .map(|(_, &r)| r)
            .collect()
    }
}

/// Holds both pair samples so that quantities at arbitrary radii come from
/// the same draws as the grid profile.
#[derive(Debug, Clone)]
pub struct SmoothnessSampler {
    all: PairSample,
    dev: Option<(PairSample, Vec<i8>)>,
    support: Vec<Vec<bool>>,
}

impl SmoothnessSampler {
    pub fn new(emb: &EmbeddingSet, votes: &VoteMatrix, dev: Option<&DevSet>, budget: usize, seed: u64) -> Result<Self> {
        if emb.n() != votes.n() {
            bail!(InvalidInput, "embeddings have {} rows but votes have {}", emb.n(), votes.n());
        }
        let everyone: Vec<usize> = (0..emb.n()).collect();
        let all = PairSample::draw(emb, &everyone, budget, seed);
        let dev = match dev {
            Some(d) => {
                d.check_bounds(emb.n())?;
                let mut label = vec![0i8; emb.n()];
                for (&i, &y) in d.indices.iter().zip(&d.labels) {
                    label[i] = y;
                }
                Some((PairSample::draw(emb, &d.indices, budget, seed ^ 0x9e37_79b9_7f4a_7c15), label))
            }
            None => None,
        };
        let support = (0..votes.m()).map(|j| (0..votes.n()).map(|i| votes.get(i, j) != 0).collect()).collect();
        Ok(SmoothnessSampler { all, dev, support })
    }

    pub fn has_dev(&self) -> bool {
        self.dev.is_some()
    }

    pub fn p_d(&self, r: f64) -> f64 {
        self.all.within_fraction(r)
    }

    pub fn l(&self, j: usize, grid: &[f64]) -> Vec<Option<f64>> {
        let s = &self.support[j];
        self.all.rate(grid, |a, b| s[a] != s[b])
    }

    pub fn m_y(&self, grid: &[f64]) -> Vec<Option<f64>> {
        match &self.dev {
            Some((sample, label)) => sample.rate(grid, |a, b| label[a] != label[b]),
            None => vec![None; grid.len()],
        }
    }

    pub fn profile(&self, grid: &[f64]) -> LipschitzProfile {
        LipschitzProfile {
            grid: grid.to_vec(),
            m_y: self.m_y(grid),
            l: (0..self.support.len()).map(|j| self.l(j, grid)).collect(),
            p_d: grid.iter().map(|&r| self.p_d(r)).collect(),
            pairs: self.all.len(),
            dev_pairs: self.dev.as_ref().map_or(0, |d| d.0.len()),
            exhaustive: self.all.exhaustive(),
        }
    }
}

pub fn lipschitz_profile(
    emb: &EmbeddingSet,
    votes: &VoteMatrix,
    dev: Option<&DevSet>,
    grid: &[f64],
    budget: usize,
    seed: u64,
) -> Result<LipschitzProfile> {
    Ok(SmoothnessSampler::new(emb, votes, dev, budget, seed)?.profile(grid))
}
