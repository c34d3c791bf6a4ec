//! Conditionally independent binary label model fitted by the triplet method.
//!
//! Each source i has accuracy a_i = Pr(lambda_i = Y | lambda_i != 0). With
//! Y in {-1, +1} and symmetric accuracy, E[lambda_i lambda_j | both vote]
//! = (2a_i - 1)(2a_j - 1), so three pairwise moments pin down each factor.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::extension::pairwise_overlap;
use crate::votes::VoteMatrix;

/// Estimated |2a - 1| is clamped into this interval before mapping to a.
pub const ACCURACY_CLAMP: (f64, f64) = (0.001, 0.999);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub source: usize,
    pub partners: (usize, usize),
    /// min of the three pairwise overlaps, the selection score
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletAssignment {
    pub triplets: Vec<Triplet>,
}

/// Empirical E[lambda_a lambda_b | both vote] and the both-vote counts.
#[derive(Debug, Clone)]
pub struct PairMoments {
    m: usize,
    counts: Vec<u64>,
    sums: Vec<i64>,
}

impl PairMoments {
    pub fn new(votes: &VoteMatrix) -> Self {
        let m = votes.m();
        let mut counts = vec![0u64; m * m];
        let mut sums = vec![0i64; m * m];
        for i in 0..votes.n() {
            let row = votes.row(i);
            for a in 0..m {
                if row[a] == 0 {
                    continue;
                }
                for b in a + 1..m {
                    if row[b] != 0 {
                        counts[a * m + b] += 1;
                        sums[a * m + b] += (row[a] * row[b]) as i64;
                    }
                }
            }
        }
        PairMoments { m, counts, sums }
    }

    fn key(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        a * self.m + b
    }

    pub fn count(&self, a: usize, b: usize) -> u64 {
        self.counts[self.key(a, b)]
    }

    /// None when the two sources never vote together.
    pub fn moment(&self, a: usize, b: usize) -> Option<f64> {
        let k = self.key(a, b);
        (self.counts[k] > 0).then(|| self.sums[k] as f64 / self.counts[k] as f64)
    }
}

/// For every source, the partner pair maximizing the smallest of the three
/// pairwise overlaps. Ties go to the lexicographically smallest pair.
pub fn select_triplets(votes: &VoteMatrix) -> Result<TripletAssignment> {
    let m = votes.m();
    if m < 3 {
        bail!(InvalidInput, "triplet method requires >= 3 sources, got {m}");
    }
    let o = pairwise_overlap(votes);
    let mut triplets = Vec::with_capacity(m);
    for i in 0..m {
        let mut best: Option<Triplet> = None;
        for j in 0..m {
            for k in j + 1..m {
                if j == i || k == i {
                    continue;
                }
                let score = o[i][j].min(o[i][k]).min(o[j][k]);
                if best.is_none_or(|b| score > b.score) {
                    best = Some(Triplet { source: i, partners: (j, k), score });
                }
            }
        }
        let best = best.expect("m >= 3");
        if best.score <= 0.0 {
            bail!(Degenerate, "no triplet with all-positive pairwise overlaps for source {i}");
        }
        triplets.push(best);
    }
    Ok(TripletAssignment { triplets })
}

/// |2a_i - 1| from E_ij, E_ik, E_jk, clamped.
pub fn triplet_estimate(m_ij: f64, m_ik: f64, m_jk: f64) -> Result<f64> {
    if m_jk == 0.0 {
        bail!(Degenerate, "degenerate triplet: partner moment is zero");
    }
    let v = (m_ij * m_ik / m_jk).abs().sqrt();
    Ok(v.clamp(ACCURACY_CLAMP.0, ACCURACY_CLAMP.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModelParams {
    pub accuracies: Vec<f64>,
    pub abstain_rates: Vec<f64>,
    pub prior: f64,
}

impl LabelModelParams {
    pub fn m(&self) -> usize {
        self.accuracies.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.accuracies.len() != self.abstain_rates.len() {
            bail!(InvalidInput, "params have {} accuracies but {} abstain rates", self.accuracies.len(), self.abstain_rates.len());
        }
        check_prior(self.prior)?;
        for (i, &a) in self.accuracies.iter().enumerate() {
            if !(a > 0.0 && a < 1.0) {
                bail!(InvalidInput, "accuracy of source {i} must lie in (0, 1), got {a}");
            }
        }
        for (i, &r) in self.abstain_rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                bail!(InvalidInput, "abstain rate of source {i} must lie in [0, 1], got {r}");
            }
        }
        Ok(())
    }
}

pub(crate) fn check_prior(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        bail!(InvalidInput, "class prior must lie in (0, 1), got {p}");
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOptions {
    /// Sources whose recovered sign is inverted (accuracy below one half).
    pub flip: Vec<usize>,
}

pub fn estimate_accuracies(votes: &VoteMatrix, prior: f64, opts: &FitOptions) -> Result<LabelModelParams> {
    check_prior(prior)?;
    let m = votes.m();
    if let Some(&i) = opts.flip.iter().find(|&&i| i >= m) {
        bail!(InvalidInput, "cannot flip source {i}: only {m} sources");
    }
    let triplets = select_triplets(votes)?;
    let moments = PairMoments::new(votes);
    let mut accuracies = Vec::with_capacity(m);
    for t in &triplets.triplets {
        let (i, (j, k)) = (t.source, t.partners);
        // selection guarantees positive overlaps, so all three moments exist
        let get = |a, b| moments.moment(a, b).expect("positive overlap");
        let e = triplet_estimate(get(i, j), get(i, k), get(j, k)).map_err(|_| {
            crate::error::Error::Degenerate(format!("degenerate triplet ({i}, {j}, {k}): E[l{j} l{k}] is zero"))
        })?;
        let e = if opts.flip.contains(&i) { -e } else { e };
        accuracies.push(0.5 * (e + 1.0));
    }
    let abstain_rates = (0..m).map(|j| 1.0 - votes.coverage(j)).collect();
    Ok(LabelModelParams { accuracies, abstain_rates, prior })
}

/// Pr(Y = +1 | votes) for each row. Abstaining sources and the coverage
/// factors of voting ones cancel between the two classes, so only the
/// accuracy terms of voting sources enter the log-odds.
pub fn posterior(params: &LabelModelParams, votes: &VoteMatrix) -> Result<Vec<f64>> {
    params.validate()?;
    if votes.m() != params.m() {
        bail!(InvalidInput, "votes have {} sources but params have {}", votes.m(), params.m());
    }
    let p = params.prior;
    let base = p.ln() - (1.0 - p).ln();
    let w: Vec<f64> = params.accuracies.iter().map(|a| a.ln() - (1.0 - a).ln()).collect();
    Ok((0..votes.n())
        .map(|i| {
            let row = votes.row(i);
            if row.iter().all(|&v| v == 0) {
                return p;
            }
            let mut logit = base;
            for (&v, wi) in row.iter().zip(&w) {
                if v != 0 {
                    logit += v as f64 * wi;
                }
            }
            1.0 / (1.0 + (-logit).exp())
        })
        .collect())
}

/// +1 iff posterior > 1/2; an exact 1/2 goes to the prior's majority class.
pub fn predict(posteriors: &[f64], prior: f64) -> Vec<i8> {
    let tie = if prior >= 0.5 { 1 } else { -1 };
    posteriors
        .iter()
        .map(|&q| match q.partial_cmp(&0.5) {
            Some(std::cmp::Ordering::Greater) => 1,
            Some(std::cmp::Ordering::Less) => -1,
            _ => tie,
        })
        .collect()
}

/// Sign of the vote sum, ties broken by the prior like `predict`.
pub fn majority_vote(votes: &VoteMatrix, prior: f64) -> Vec<i8> {
    let tie = if prior >= 0.5 { 1 } else { -1 };
    (0..votes.n())
        .map(|i| match votes.row(i).iter().map(|&v| v as i32).sum::<i32>().signum() {
            0 => tie,
            s => s as i8,
        })
        .collect()
}
