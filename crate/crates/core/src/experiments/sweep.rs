use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricKind};
use super::synthetic::SyntheticTask;
use crate::diagnostics::{lift_curve, other_sources_constant, select_by_bound, LiftContext, SmoothnessSampler, TheoryChoice};
use crate::error::Result;
use crate::extension::{ExtensionTable, Weighting};
use crate::label_model::{estimate_accuracies, posterior, predict, FitOptions};
use crate::votes::VoteMatrix;

/// Fits the label model on all rows of `votes` and scores hard predictions
/// on `rows` against `gold` (aligned with `rows`).
pub fn fit_and_score(
    votes: &VoteMatrix,
    rows: &[usize],
    gold: &[i8],
    prior: f64,
    fit: &FitOptions,
    kind: MetricKind,
) -> Result<f64> {
    let params = estimate_accuracies(votes, prior, fit)?;
    let q = posterior(&params, &votes.select_rows(rows))?;
    let m = evaluate(&predict(&q, prior), gold)?;
    Ok(m.get(kind.resolve(gold.iter().filter(|&&y| y == 1).count() as f64 / gold.len() as f64)))
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub weighting: Weighting,
    pub prior: f64,
    pub metric: MetricKind,
    pub fit: FitOptions,
    /// also evaluate the lift lower bound with plug-in estimates
    pub with_bound: bool,
    pub budget: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            weighting: Weighting::ThresholdedWeightedSum,
            prior: 0.5,
            metric: MetricKind::Accuracy,
            fit: FitOptions::default(),
            with_bound: false,
            budget: crate::diagnostics::DEFAULT_PAIR_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub radius: f64,
    pub coverage: f64,
    /// test metric; None when the label model could not be fitted
    pub metric: Option<f64>,
    /// metric minus the unextended metric
    pub lift: Option<f64>,
    pub bound: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub source: usize,
    pub baseline: f64,
    pub points: Vec<SweepPoint>,
    /// bound maximizer, when bounds were requested
    pub theory: Option<TheoryChoice>,
}

impl SweepResult {
    /// Grid position of the largest lift; ties go to the smaller radius.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (g, p) in self.points.iter().enumerate() {
            if let Some(l) = p.lift {
                if best.is_none_or(|(_, b)| l > b) {
                    best = Some((g, l));
                }
            }
        }
        best.map(|b| b.0)
    }

    /// Largest lift over the grid.
    pub fn peak(&self) -> Option<f64> {
        self.argmax().and_then(|g| self.points[g].lift)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("radius,coverage,metric,lift,bound\n");
        let f = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for p in &self.points {
            s.push_str(&format!("{},{},{},{},{}\n", p.radius, p.coverage, f(p.metric), f(p.lift), f(p.bound)));
        }
        s
    }
}

/// Extends only `source` at each grid radius, refits, and scores the
/// predictions on the task's test points.
pub fn sweep_radius(task: &SyntheticTask, source: usize, grid: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    let votes = &task.votes;
    let test = task.test_indices();
    let gold: Vec<i8> = test.iter().map(|&i| task.labels.as_slice()[i]).collect();
    let baseline = fit_and_score(votes, &test, &gold, opts.prior, &opts.fit, opts.metric)?;
    let mut candidates = vec![Vec::new(); votes.m()];
    candidates[source] = grid.to_vec();
    let table = ExtensionTable::build(&task.embeddings, votes, &candidates, opts.weighting)?;
    let mut points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&r| -> Result<SweepPoint> {
            let col = table.column(source, r)?;
            let coverage = col.iter().filter(|&&v| v != 0).count() as f64 / col.len() as f64;
            let mut ext = votes.clone();
            ext.set_column(source, &col);
            let (metric, error) = match fit_and_score(&ext, &test, &gold, opts.prior, &opts.fit, opts.metric) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let lift = if r == 0.0 { Some(0.0) } else { metric.map(|v| v - baseline) };
            Ok(SweepPoint { radius: r, coverage, metric, lift, bound: None, error })
        })
        .collect::<Result<_>>()?;
    let mut theory = None;
    if opts.with_bound {
        let dev = task.dev();
        let params = estimate_accuracies(votes, opts.prior, &opts.fit)?;
        let sampler = SmoothnessSampler::new(&task.embeddings, votes, Some(&dev), opts.budget, opts.seed)?;
        let ctx = LiftContext {
            coverage: votes.coverage(source),
            accuracy: params.accuracies[source],
            c: other_sources_constant(&params, votes, &dev, source)?,
        };
        let curve = lift_curve(&table, source, grid, &sampler, &sampler.m_y(grid), Some(&dev), &ctx)?;
        for (p, c) in points.iter_mut().zip(&curve) {
            p.bound = c.bound.map(|b| b.value);
        }
        theory = Some(select_by_bound(&curve));
    }
    Ok(SweepResult { source, baseline, points, theory })
}
