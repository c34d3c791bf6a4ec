//! Smoothness estimates, bound arithmetic and the diagnostics report.

pub mod bounds;
pub mod lift;
pub mod profile;

use serde::{Deserialize, Serialize};

pub use bounds::{
    concentration_epsilon, ensemble_risk_bound, estimation_error_bound, extended_accuracy_bound,
    extended_risk_bound, lift_lower_bound, smoothness_from_model, EstimationConstants, LiftBound, SourceRiskTerms,
};
pub use lift::{lift_curve, lift_point, other_sources_constant, select_by_bound, LiftContext, LiftPoint, TheoryChoice};
pub use profile::{
    default_grid, estimate_profile, lipschitz_profile, log_grid, LipschitzProfile, PairSample, RateCurve,
    SmoothnessSampler, DEFAULT_PAIR_BUDGET,
};

use crate::embedding::EmbeddingSet;
use crate::error::{bail, Error, Result};
use crate::extension::{min_overlap, pairwise_overlap, ExtensionReport, ExtensionTable, RadiusConfig};
use crate::label_model::{estimate_accuracies, posterior, FitOptions, LabelModelParams, PairMoments};
use crate::votes::{DevSet, VoteMatrix};

/// Smoothness of a reference model, standing in for labels when no dev set
/// exists: label disagreement is bounded by model disagreement plus twice its risk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSmoothness {
    /// hard predictions of the model on every point
    pub predictions: Vec<i8>,
    pub risk: f64,
}

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    pub grid: Vec<f64>,
    pub budget: usize,
    pub seed: u64,
    pub delta: f64,
    pub fit: FitOptions,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            grid: default_grid(),
            budget: DEFAULT_PAIR_BUDGET,
            seed: 0,
            delta: 0.05,
            fit: FitOptions::default(),
        }
    }
}

/// A bound value, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOutcome {
    pub value: Option<f64>,
    pub error: Option<String>,
}

impl From<Result<f64>> for BoundOutcome {
    fn from(r: Result<f64>) -> Self {
        match r {
            Ok(v) => BoundOutcome { value: Some(v), error: None },
            Err(e) => BoundOutcome { value: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDiagnostics {
    pub source: usize,
    pub radius: f64,
    pub coverage: f64,
    /// label-model accuracy estimate on the original votes
    pub accuracy: f64,
    /// other-sources constant used by the lift bound
    pub c: f64,
    /// lift bound at the configured radius
    pub at_radius: LiftPoint,
    /// extension recommended: positive lift bound at the configured radius
    pub recommend: bool,
    pub lift_curve: Vec<LiftPoint>,
    pub theory_radius: TheoryChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub unextended: BoundOutcome,
    pub extended: BoundOutcome,
    pub constants_unextended: Option<EstimationConstants>,
    pub constants_extended: Option<EstimationConstants>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub m: usize,
    /// `dev` or `model`
    pub label_smoothness_from: String,
    pub loss_scale: String,
    pub config: RadiusConfig,
    pub extension: ExtensionReport,
    pub profile: LipschitzProfile,
    pub undefined_radii: Vec<f64>,
    pub sources: Vec<SourceDiagnostics>,
    pub estimation: EstimationSummary,
    /// ensemble risk bound, available with model smoothness inputs
    pub ensemble: Option<BoundOutcome>,
}

pub struct DiagnoseInputs<'a> {
    pub embeddings: &'a EmbeddingSet,
    pub votes: &'a VoteMatrix,
    /// extended votes; recomputed from `config` when absent
    pub extended: Option<&'a VoteMatrix>,
    pub dev: Option<&'a DevSet>,
    pub model: Option<&'a ModelSmoothness>,
    /// label-model parameters fitted on the extended votes; refitted when absent
    pub params: Option<&'a LabelModelParams>,
    pub prior: f64,
    pub config: &'a RadiusConfig,
}

fn estimation_constants(
    votes: &VoteMatrix,
    params: &LabelModelParams,
    delta: f64,
    l_min: f64,
    p_d_min: f64,
) -> Result<EstimationConstants> {
    let (n, m) = (votes.n(), votes.m());
    let mut patterns: Vec<&[i8]> = (0..n).map(|i| votes.row(i)).collect();
    patterns.sort_unstable();
    let mut rarest = usize::MAX;
    let mut k = 0;
    while k < patterns.len() {
        let mut e = k + 1;
        while e < patterns.len() && patterns[e] == patterns[k] {
            e += 1;
        }
        rarest = rarest.min(e - k);
        k = e;
    }
    let moments = PairMoments::new(votes);
    let overlap = pairwise_overlap(votes);
    let mut c1 = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            if overlap[a][b] > 0.0 {
                c1 = c1.min(moments.moment(a, b).unwrap_or(0.0).abs());
            }
        }
    }
    let q = posterior(params, votes)?;
    Ok(EstimationConstants {
        n,
        m,
        delta,
        o_min: min_overlap(votes)?,
        e_min: params.accuracies.iter().map(|a| (2.0 * a - 1.0).abs()).fold(f64::INFINITY, f64::min),
        c1: if c1.is_finite() { c1 } else { 0.0 },
        c2: q.iter().sum::<f64>() / n as f64,
        c_p: rarest as f64 / n as f64,
        l_min,
        p_d_min,
    })
}

pub fn diagnose(inp: &DiagnoseInputs, opts: &DiagnoseOptions) -> Result<DiagnosticsReport> {
    let (emb, votes, config) = (inp.embeddings, inp.votes, inp.config);
    let (n, m) = (votes.n(), votes.m());
    config.validate(m)?;
    if inp.dev.is_none() && inp.model.is_none() {
        bail!(Usage, "M_Y estimate requires a labeled dev set or model smoothness inputs");
    }
    if let Some(model) = inp.model {
        if model.predictions.len() != n {
            bail!(InvalidInput, "model predictions cover {} points, expected {n}", model.predictions.len());
        }
    }
    let sampler = SmoothnessSampler::new(emb, votes, inp.dev, opts.budget, opts.seed)?;
    let grid = &opts.grid;
    let mut profile = sampler.profile(grid);

    // label smoothness on arbitrary radii: dev pairs, else model disagreement + 2R
    let model_sampler = inp.model.map(|model| {
        let everyone: Vec<usize> = (0..n).collect();
        (PairSample::draw(emb, &everyone, opts.budget, opts.seed), model)
    });
    let label_smoothness = |radii: &[f64]| -> Vec<Option<f64>> {
        match (&model_sampler, inp.dev) {
            (Some((sample, model)), None) => sample
                .rate(radii, |a, b| model.predictions[a] != model.predictions[b])
                .into_iter()
                .map(|r| r.map(|mf| smoothness_from_model(mf, model.risk)))
                .collect(),
            _ => sampler.m_y(radii),
        }
    };
    profile.m_y = label_smoothness(grid);

    let table_candidates: Vec<Vec<f64>> = config
        .radii
        .iter()
        .map(|&r| grid.iter().copied().chain(std::iter::once(r)).collect())
        .collect();
    let table = ExtensionTable::build(emb, votes, &table_candidates, config.weighting)?;
    let computed;
    let extended = match inp.extended {
        Some(e) => e,
        None => {
            computed = table.apply(&config.radii)?;
            &computed
        }
    };
    let extension = ExtensionReport::compare(votes, extended, config)?;

    let base_params = estimate_accuracies(votes, inp.prior, &opts.fit);
    let ext_params = match inp.params {
        Some(p) => Ok(p.clone()),
        None => estimate_accuracies(extended, inp.prior, &opts.fit),
    };
    let base = base_params.as_ref().map_err(|e| Error::Degenerate(format!("label model on original votes: {e}")))?;

    let mut sources = Vec::with_capacity(m);
    for j in 0..m {
        let c = match inp.dev {
            Some(dev) => other_sources_constant(base, votes, dev, j)?,
            None => {
                // no labels: use the model's positive predictions as the positive class
                let model = inp.model.expect("checked above");
                let idx: Vec<usize> = (0..n).filter(|&i| model.predictions[i] == 1).collect();
                let pseudo = DevSet { labels: vec![1; idx.len()], indices: idx };
                other_sources_constant(base, votes, &pseudo, j)?
            }
        };
        let ctx = LiftContext { coverage: votes.coverage(j), accuracy: base.accuracies[j], c };
        let curve = lift_curve(&table, j, grid, &sampler, &profile.m_y, inp.dev, &ctx)?;
        let r = config.radii[j];
        let at = lift_curve(&table, j, &[r], &sampler, &label_smoothness(&[r]), inp.dev, &ctx)?.remove(0);
        let theory_radius = select_by_bound(&curve);
        sources.push(SourceDiagnostics {
            source: j,
            radius: r,
            coverage: ctx.coverage,
            accuracy: ctx.accuracy,
            c,
            recommend: at.bound.is_some_and(|b| b.informative),
            at_radius: at,
            lift_curve: curve,
            theory_radius,
        });
    }

    let extended_sources: Vec<usize> = (0..m).filter(|&j| config.radii[j] > 0.0).collect();
    let (l_min, p_d_min) = if extended_sources.is_empty() {
        (0.0, 0.0)
    } else {
        let l_min = extended_sources
            .iter()
            .map(|&j| sampler.l(j, &[config.radii[j]])[0].unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        let r_min = extended_sources.iter().map(|&j| config.radii[j]).fold(f64::INFINITY, f64::min);
        (l_min, sampler.p_d(r_min))
    };
    let k_base = estimation_constants(votes, base, opts.delta, 0.0, 0.0);
    let k_ext = ext_params
        .as_ref()
        .map_err(|e| Error::Degenerate(e.to_string()))
        .and_then(|p| estimation_constants(extended, p, opts.delta, l_min, p_d_min));
    let estimation = EstimationSummary {
        unextended: k_base.as_ref().map_err(clone_err).and_then(|k| estimation_error_bound(k, false)).into(),
        extended: k_ext.as_ref().map_err(clone_err).and_then(|k| estimation_error_bound(k, true)).into(),
        constants_unextended: k_base.ok(),
        constants_extended: k_ext.ok(),
    };

    let ensemble = inp.model.map(|model| ensemble_from_model(&sampler, &model_sampler, model, extended, config, base, inp.prior).into());

    Ok(DiagnosticsReport {
        n,
        m,
        label_smoothness_from: if inp.dev.is_some() { "dev".into() } else { "model".into() },
        loss_scale: "lift and estimation bounds use the loss |Y - Y'|/2; risk bounds are error probabilities".into(),
        config: config.clone(),
        extension,
        undefined_radii: profile.undefined_radii(),
        profile,
        sources,
        estimation,
        ensemble,
    })
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::Degenerate(s) => Error::Degenerate(s.clone()),
        other => Error::InvalidInput(other.to_string()),
    }
}

/// Ensemble bound with regions assigned to the lowest-index extended source
/// that votes; points no source covers form the uncovered region.
fn ensemble_from_model(
    sampler: &SmoothnessSampler,
    model_sampler: &Option<(PairSample, &ModelSmoothness)>,
    model: &ModelSmoothness,
    extended: &VoteMatrix,
    config: &RadiusConfig,
    base: &LabelModelParams,
    prior: f64,
) -> Result<f64> {
    let (n, m) = (extended.n(), extended.m());
    let mut counts = vec![0usize; m];
    let mut uncovered = 0usize;
    for i in 0..n {
        match (0..m).find(|&j| extended.get(i, j) != 0) {
            Some(j) => counts[j] += 1,
            None => uncovered += 1,
        }
    }
    let mut terms = Vec::with_capacity(m);
    for j in 0..m {
        let r = config.radii[j];
        let m_f = match model_sampler {
            Some((sample, _)) => sample.rate(&[r], |a, b| model.predictions[a] != model.predictions[b])[0],
            None => None,
        }
        .unwrap_or(0.0);
        let coverage = base.abstain_rates[j];
        terms.push(SourceRiskTerms {
            weight: counts[j] as f64 / n as f64,
            accuracy: base.accuracies[j],
            m_f,
            risk: model.risk,
            coverage: 1.0 - coverage,
            l: if r > 0.0 { sampler.l(j, &[r])[0].unwrap_or(0.0) } else { 0.0 },
            p_d: if r > 0.0 { sampler.p_d(r) } else { 0.0 },
        });
    }
    ensemble_risk_bound(&terms, prior, uncovered as f64 / n as f64)
}
