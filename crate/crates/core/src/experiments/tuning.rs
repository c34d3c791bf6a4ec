//! Choosing radii on a labeled dev set, empirically or from the lift bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricKind;
use super::sweep::fit_and_score;
use crate::diagnostics::{
    lift_curve, other_sources_constant, select_by_bound, LiftContext, LiftPoint, SmoothnessSampler, TheoryChoice,
    DEFAULT_PAIR_BUDGET,
};
use crate::embedding::EmbeddingSet;
use crate::error::{bail, Result};
use crate::extension::{ExtensionTable, RadiusConfig, Weighting};
use crate::label_model::{estimate_accuracies, FitOptions};
use crate::votes::{DevSet, VoteMatrix};

#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub weighting: Weighting,
    pub prior: f64,
    pub metric: MetricKind,
    pub fit: FitOptions,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { weighting: Weighting::default(), prior: 0.5, metric: MetricKind::Auto, fit: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub radius: f64,
    pub metric: f64,
    /// dev metric per grid radius; None where the label model failed
    pub metrics: Vec<Option<f64>>,
    pub note: Option<String>,
}

/// Sources that abstain somewhere; others are never extended.
fn extendable(votes: &VoteMatrix) -> Vec<bool> {
    (0..votes.m()).map(|j| votes.coverage(j) < 1.0).collect()
}

fn dev_metric(table: &ExtensionTable, radii: &[f64], dev: &DevSet, opts: &TuneOptions) -> Option<f64> {
    let ext = table.apply(radii).ok()?;
    fit_and_score(&ext, &dev.indices, &dev.labels, opts.prior, &opts.fit, opts.metric).ok()
}

fn check(emb: &EmbeddingSet, votes: &VoteMatrix, dev: &DevSet) -> Result<()> {
    if emb.n() != votes.n() {
        bail!(InvalidInput, "embeddings have {} rows but votes have {}", emb.n(), votes.n());
    }
    if dev.is_empty() {
        bail!(InvalidInput, "tuning needs a non-empty dev set");
    }
    dev.check_bounds(votes.n())
}

/// One radius for every source, chosen by dev metric over `grid`. Ties go to
/// the smaller radius.
pub fn tune_shared_radius(
    emb: &EmbeddingSet,
    votes: &VoteMatrix,
    dev: &DevSet,
    grid: &[f64],
    opts: &TuneOptions,
) -> Result<TuneOutcome> {
    check(emb, votes, dev)?;
    if grid.is_empty() {
        bail!(InvalidInput, "empty radius grid");
    }
    let open = extendable(votes);
    if !open.iter().any(|&x| x) {
        let metric = dev_metric_plain(votes, dev, opts)?;
        return Ok(TuneOutcome {
            radius: 0.0,
            metric,
            metrics: vec![Some(metric); grid.len()],
            note: Some("every source has full coverage; nothing to extend".into()),
        });
    }
    let candidates: Vec<Vec<f64>> = open.iter().map(|&o| if o { grid.to_vec() } else { Vec::new() }).collect();
    let table = ExtensionTable::build(emb, votes, &candidates, opts.weighting)?;
    let metrics: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&r| {
            let radii: Vec<f64> = open.iter().map(|&o| if o { r } else { 0.0 }).collect();
            dev_metric(&table, &radii, dev, opts)
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for (&r, m) in grid.iter().zip(&metrics) {
        if let Some(m) = *m {
            if best.is_none_or(|(br, bm)| m > bm || (m == bm && r < br)) {
                best = Some((r, m));
            }
        }
    }
    let Some((radius, metric)) = best else {
        bail!(Degenerate, "label model could not be fitted at any grid radius");
    };
    Ok(TuneOutcome { radius, metric, metrics, note: None })
}

fn dev_metric_plain(votes: &VoteMatrix, dev: &DevSet, opts: &TuneOptions) -> Result<f64> {
    fit_and_score(votes, &dev.indices, &dev.labels, opts.prior, &opts.fit, opts.metric)
}

/// Multiplicative neighborhood of a radius used by `refine_radii`.
pub fn default_local_grid(r: f64) -> Vec<f64> {
    [0.5, 0.67, 0.8, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0].iter().map(|f| f * r).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub config: RadiusConfig,
    pub metric: f64,
    /// dev metric after each pass, starting with the shared-radius value
    pub history: Vec<f64>,
}

/// Coordinate descent over per-source radii starting from `start` for every
/// extendable source. A source moves only to a strictly better radius, so
/// the dev metric never decreases. Full-coverage sources stay at 0.
pub fn refine_radii(
    emb: &EmbeddingSet,
    votes: &VoteMatrix,
    dev: &DevSet,
    start: f64,
    local_grids: &[Vec<f64>],
    passes: usize,
    opts: &TuneOptions,
) -> Result<RefineOutcome> {
    check(emb, votes, dev)?;
    let m = votes.m();
    if local_grids.len() != m {
        bail!(InvalidInput, "{} local grids for {m} sources", local_grids.len());
    }
    let open = extendable(votes);
    let candidates: Vec<Vec<f64>> = (0..m)
        .map(|j| if open[j] { local_grids[j].iter().copied().chain([start]).collect() } else { Vec::new() })
        .collect();
    let table = ExtensionTable::build(emb, votes, &candidates, opts.weighting)?;
    let mut radii: Vec<f64> = open.iter().map(|&o| if o { start } else { 0.0 }).collect();
    let Some(mut current) = dev_metric(&table, &radii, dev, opts) else {
        bail!(Degenerate, "label model could not be fitted at the starting radius");
    };
    let mut history = vec![current];
    for _ in 0..passes {
        let mut moved = false;
        for j in (0..m).filter(|&j| open[j]) {
            let mut grid = local_grids[j].clone();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let scores: Vec<Option<f64>> = grid
                .par_iter()
                .map(|&r| {
                    let mut trial = radii.clone();
                    trial[j] = r;
                    dev_metric(&table, &trial, dev, opts)
                })
                .collect();
            let mut best: Option<(f64, f64)> = None;
            for (&r, s) in grid.iter().zip(&scores) {
                if let Some(s) = *s {
                    if s > current && best.is_none_or(|(_, bs)| s > bs) {
                        best = Some((r, s));
                    }
                }
            }
            if let Some((r, s)) = best {
                radii[j] = r;
                current = s;
                moved = true;
            }
        }
        history.push(current);
        if !moved {
            break;
        }
    }
    Ok(RefineOutcome { config: RadiusConfig::new(radii, opts.weighting), metric: current, history })
}

#[derive(Debug, Clone)]
pub struct TheoryOptions {
    pub weighting: Weighting,
    pub prior: f64,
    pub fit: FitOptions,
    pub budget: usize,
    pub seed: u64,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        TheoryOptions {
            weighting: Weighting::default(),
            prior: 0.5,
            fit: FitOptions::default(),
            budget: DEFAULT_PAIR_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryGuided {
    pub choice: TheoryChoice,
    pub curve: Vec<LiftPoint>,
}

/// Grid radius maximizing the plug-in lift lower bound for `source`.
pub fn theory_guided_radius(
    emb: &EmbeddingSet,
    votes: &VoteMatrix,
    dev: &DevSet,
    source: usize,
    grid: &[f64],
    opts: &TheoryOptions,
) -> Result<TheoryGuided> {
    check(emb, votes, dev)?;
    if source >= votes.m() {
        bail!(InvalidInput, "source {source} out of range");
    }
    let params = estimate_accuracies(votes, opts.prior, &opts.fit)?;
    let sampler = SmoothnessSampler::new(emb, votes, Some(dev), opts.budget, opts.seed)?;
    let mut candidates = vec![Vec::new(); votes.m()];
    candidates[source] = grid.to_vec();
    let table = ExtensionTable::build(emb, votes, &candidates, opts.weighting)?;
    let ctx = LiftContext {
        coverage: votes.coverage(source),
        accuracy: params.accuracies[source],
        c: other_sources_constant(&params, votes, dev, source)?,
    };
    let curve = lift_curve(&table, source, grid, &sampler, &sampler.m_y(grid), Some(dev), &ctx)?;
    Ok(TheoryGuided { choice: select_by_bound(&curve), curve })
}
