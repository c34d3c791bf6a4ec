//! Radius-based extension of labeling functions.
//!
//! A source that abstains on point x takes a vote derived from its own votes
//! on support points within its radius. Queries are answered against the
//! original support only, so extensions never chain.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{bail, Result};
use crate::scan::{summarize, Geometry, NeighborSummary, Plan, Strategy};
use crate::votes::VoteMatrix;

/// How neighbor votes are combined into the extended vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// Vote of the nearest support point; ties go to the lowest index.
    #[default]
    #[serde(rename = "1nn")]
    OneNearestNeighbor,
    /// Sign of the summed neighbor votes; a zero sum stays an abstain.
    #[serde(rename = "wsum")]
    ThresholdedWeightedSum,
}

impl std::str::FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "1nn" => Ok(Weighting::OneNearestNeighbor),
            "wsum" => Ok(Weighting::ThresholdedWeightedSum),
            other => Err(format!("unknown weighting '{other}' (expected 1nn|wsum)")),
        }
    }
}

/// One radius per source. A radius of 0 leaves that source unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusConfig {
    pub radii: Vec<f64>,
    #[serde(default)]
    pub weighting: Weighting,
}

impl RadiusConfig {
    pub fn new(radii: Vec<f64>, weighting: Weighting) -> Self {
        RadiusConfig { radii, weighting }
    }

    pub fn uniform(m: usize, r: f64, weighting: Weighting) -> Self {
        RadiusConfig { radii: vec![r; m], weighting }
    }

    /// Cosine similarity thresholds s become radii 1 - s.
    pub fn from_similarities(sims: &[f64], weighting: Weighting) -> Self {
        RadiusConfig { radii: sims.iter().map(|s| 1.0 - s).collect(), weighting }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.radii.len() != m {
            bail!(InvalidInput, "radius config has {} radii for {} sources", self.radii.len(), m);
        }
        if let Some((j, r)) = self.radii.iter().enumerate().find(|(_, r)| !r.is_finite() || **r < 0.0) {
            bail!(InvalidInput, "radius for source {j} must be finite and non-negative, got {r}");
        }
        Ok(())
    }
}

/// Support points of one source within a radius of a query, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub query: usize,
    pub source: usize,
    pub radius: f64,
    /// `(index, distance)` sorted by distance, then index.
    pub neighbors: Vec<(usize, f64)>,
}

pub fn neighbors_in_support(
    emb: &EmbeddingSet,
    votes: &VoteMatrix,
    source: usize,
    query: usize,
    radius: f64,
) -> Result<NeighborSet> {
    check_shapes(emb, votes)?;
    if source >= votes.m() || query >= votes.n() {
        bail!(InvalidInput, "source {source} or query {query} out of range");
    }
    let mut neighbors: Vec<(usize, f64)> = votes
        .support(source)
        .into_iter()
        .map(|q| (q, emb.distance(query, q)))
        .filter(|&(_, d)| d <= radius)
        .collect();
    neighbors.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(NeighborSet { query, source, radius, neighbors })
}

fn check_shapes(emb: &EmbeddingSet, votes: &VoteMatrix) -> Result<()> {
    if emb.n() != votes.n() {
        bail!(InvalidInput, "embeddings have {} rows but votes have {}", emb.n(), votes.n());
    }
    Ok(())
}

/// Precomputed neighbor information for a set of candidate radii per source,
/// so that extended votes at any listed radius are a cheap lookup.
#[derive(Debug, Clone)]
pub struct ExtensionTable {
    votes: VoteMatrix,
    weighting: Weighting,
    /// plan index for each source, if the source has candidate radii
    plan_of: Vec<Option<usize>>,
    summary: NeighborSummary,
}

impl ExtensionTable {
    /// `candidates[j]` lists radii of interest for source j; zeros are ignored.
    pub fn build(emb: &EmbeddingSet, votes: &VoteMatrix, candidates: &[Vec<f64>], weighting: Weighting) -> Result<Self> {
        Self::build_with(emb, votes, candidates, weighting, Strategy::Auto)
    }

    pub(crate) fn build_with(
        emb: &EmbeddingSet,
        votes: &VoteMatrix,
        candidates: &[Vec<f64>],
        weighting: Weighting,
        strategy: Strategy,
    ) -> Result<Self> {
        check_shapes(emb, votes)?;
        if candidates.len() != votes.m() {
            bail!(InvalidInput, "{} candidate lists for {} sources", candidates.len(), votes.m());
        }
        let mut plans = Vec::new();
        let mut plan_of = vec![None; votes.m()];
        for (j, c) in candidates.iter().enumerate() {
            if let Some(r) = c.iter().find(|r| !r.is_finite() || **r < 0.0) {
                bail!(InvalidInput, "radius for source {j} must be finite and non-negative, got {r}");
            }
            let mut radii: Vec<f64> = c.iter().copied().filter(|&r| r > 0.0).collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup();
            if !radii.is_empty() {
                plan_of[j] = Some(plans.len());
                plans.push(Plan { source: j, radii });
            }
        }
        let geo = Geometry::new(emb);
        let nearest = weighting == Weighting::OneNearestNeighbor;
        let summary = summarize(&geo, votes, plans, nearest, !nearest, strategy);
        Ok(ExtensionTable { votes: votes.clone(), weighting, plan_of, summary })
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn base(&self) -> &VoteMatrix {
        &self.votes
    }

    /// Extended column of source `j` at radius `r`, which must be 0 or one of
    /// the radii the table was built with.
    pub fn column(&self, j: usize, r: f64) -> Result<Vec<i8>> {
        let mut col = self.votes.column(j);
        if r == 0.0 {
            return Ok(col);
        }
        let Some(k) = self.plan_of.get(j).copied().flatten() else {
            bail!(InvalidInput, "source {j} has no candidate radii in this table");
        };
        let radii = &self.summary.plans()[k].radii;
        let Some(g) = radii.iter().position(|&x| x == r) else {
            bail!(InvalidInput, "radius {r} is not a candidate for source {j}");
        };
        for (p, v) in col.iter_mut().enumerate() {
            if *v != 0 {
                continue;
            }
            *v = match self.weighting {
                Weighting::OneNearestNeighbor => match self.summary.nearest(k, p) {
                    Some((d, q)) if d <= r => self.votes.get(q, j),
                    _ => 0,
                },
                Weighting::ThresholdedWeightedSum => self.summary.vote_sum(k, p, g).signum() as i8,
            };
        }
        Ok(col)
    }

    /// Votes with every source extended at its own radius.
    pub fn apply(&self, radii: &[f64]) -> Result<VoteMatrix> {
        if radii.len() != self.votes.m() {
            bail!(InvalidInput, "{} radii for {} sources", radii.len(), self.votes.m());
        }
        let mut out = self.votes.clone();
        for (j, &r) in radii.iter().enumerate() {
            if r != 0.0 {
                out.set_column(j, &self.column(j, r)?);
            }
        }
        Ok(out)
    }
}

pub fn extend_votes(emb: &EmbeddingSet, votes: &VoteMatrix, config: &RadiusConfig) -> Result<VoteMatrix> {
    config.validate(votes.m())?;
    let candidates: Vec<Vec<f64>> = config.radii.iter().map(|&r| vec![r]).collect();
    ExtensionTable::build(emb, votes, &candidates, config.weighting)?.apply(&config.radii)
}

/// Fraction of rows on which each source votes.
pub fn coverage(votes: &VoteMatrix) -> Vec<f64> {
    (0..votes.m()).map(|j| votes.coverage(j)).collect()
}

/// m x m matrix of the fraction of rows where both sources vote.
pub fn pairwise_overlap(votes: &VoteMatrix) -> Vec<Vec<f64>> {
    let (n, m) = (votes.n(), votes.m());
    let mut counts = vec![vec![0usize; m]; m];
    for i in 0..n {
        let row = votes.row(i);
        for a in 0..m {
            if row[a] == 0 {
                continue;
            }
            for b in a..m {
                if row[b] != 0 {
                    counts[a][b] += 1;
                }
            }
        }
    }
    let mut out = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a..m {
            let o = if n == 0 { 0.0 } else { counts[a][b] as f64 / n as f64 };
            out[a][b] = o;
            out[b][a] = o;
        }
    }
    out
}

/// `min_i max_{j != i}` pairwise overlap.
pub fn min_overlap(votes: &VoteMatrix) -> Result<f64> {
    let m = votes.m();
    if m < 2 {
        bail!(InvalidInput, "min overlap needs at least 2 sources, got {m}");
    }
    let o = pairwise_overlap(votes);
    Ok((0..m)
        .map(|i| (0..m).filter(|&j| j != i).map(|j| o[i][j]).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceExtension {
    pub source: usize,
    pub radius: f64,
    pub coverage_before: f64,
    pub coverage_after: f64,
    /// Points that were abstains and now carry a vote.
    pub newly_labeled: usize,
    pub newly_labeled_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub n: usize,
    pub m: usize,
    pub weighting: Weighting,
    pub sources: Vec<SourceExtension>,
    pub min_overlap_before: Option<f64>,
    pub min_overlap_after: Option<f64>,
}

impl ExtensionReport {
    pub fn compare(before: &VoteMatrix, after: &VoteMatrix, config: &RadiusConfig) -> Result<Self> {
        if before.n() != after.n() || before.m() != after.m() {
            bail!(InvalidInput, "vote matrices differ in shape");
        }
        config.validate(before.m())?;
        let n = before.n();
        let sources = (0..before.m())
            .map(|j| {
                let newly = (0..n).filter(|&i| before.get(i, j) == 0 && after.get(i, j) != 0).count();
                SourceExtension {
                    source: j,
                    radius: config.radii[j],
                    coverage_before: before.coverage(j),
                    coverage_after: after.coverage(j),
                    newly_labeled: newly,
                    newly_labeled_fraction: if n == 0 { 0.0 } else { newly as f64 / n as f64 },
                }
            })
            .collect();
        Ok(ExtensionReport {
            n,
            m: before.m(),
            weighting: config.weighting,
            sources,
            min_overlap_before: min_overlap(before).ok(),
            min_overlap_after: min_overlap(after).ok(),
        })
    }
}

pub fn extend_with_report(
    emb: &EmbeddingSet,
    votes: &VoteMatrix,
    config: &RadiusConfig,
) -> Result<(VoteMatrix, ExtensionReport)> {
    let ext = extend_votes(emb, votes, config)?;
    let report = ExtensionReport::compare(votes, &ext, config)?;
    Ok((ext, report))
}
