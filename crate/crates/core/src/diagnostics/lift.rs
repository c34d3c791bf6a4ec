//! Plug-in evaluation of the lift lower bound along a radius grid.

use serde::{Deserialize, Serialize};

use super::bounds::{extended_accuracy_bound, lift_lower_bound, LiftBound};
use super::profile::SmoothnessSampler;
use crate::error::Result;
use crate::extension::ExtensionTable;
use crate::label_model::{posterior, LabelModelParams};
use crate::votes::{DevSet, VoteMatrix};

/// Mean label-model posterior, computed from every source except `source`,
/// over positive dev points whose posterior is at least one half. Falls back
/// to one half when no dev point qualifies.
pub fn other_sources_constant(params: &LabelModelParams, votes: &VoteMatrix, dev: &DevSet, source: usize) -> Result<f64> {
    let keep: Vec<usize> = (0..params.m()).filter(|&j| j != source).collect();
    let sub = LabelModelParams {
        accuracies: keep.iter().map(|&j| params.accuracies[j]).collect(),
        abstain_rates: keep.iter().map(|&j| params.abstain_rates[j]).collect(),
        prior: params.prior,
    };
    let pos: Vec<usize> = dev.indices.iter().zip(&dev.labels).filter(|(_, &y)| y == 1).map(|(&i, _)| i).collect();
    let rows: Vec<i8> = pos.iter().flat_map(|&i| keep.iter().map(move |&j| votes.get(i, j))).collect();
    let sub_votes = VoteMatrix::new(pos.len(), keep.len(), rows)?;
    let q = posterior(&sub, &sub_votes)?;
    let high: Vec<f64> = q.into_iter().filter(|&x| x >= 0.5).collect();
    Ok(if high.is_empty() { 0.5 } else { high.iter().sum::<f64>() / high.len() as f64 })
}

/// Everything that went into the lift bound at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftPoint {
    pub radius: f64,
    pub l: Option<f64>,
    pub p_d: f64,
    pub m_y: Option<f64>,
    /// accuracy of the extended source
    pub acc_ext: Option<f64>,
    pub acc_ext_measured: bool,
    /// accuracy on the newly labeled region
    pub acc_new: Option<f64>,
    pub acc_new_measured: bool,
    pub bound: Option<LiftBound>,
}

/// Scalar inputs shared by every radius of one source.
#[derive(Debug, Clone, Copy)]
pub struct LiftContext {
    pub coverage: f64,
    pub accuracy: f64,
    pub c: f64,
}

/// Combines measured or bounded accuracies into a lift bound. Measured
/// values take precedence; missing ones come from the extended-accuracy
/// bound and its consequence for the newly labeled region. Accuracies are
/// clipped to [0, 1].
pub fn lift_point(
    radius: f64,
    l: Option<f64>,
    p_d: f64,
    m_y: Option<f64>,
    measured_ext: Option<f64>,
    measured_new: Option<f64>,
    ctx: &LiftContext,
) -> LiftPoint {
    let mut pt = LiftPoint {
        radius,
        l,
        p_d,
        m_y,
        acc_ext: measured_ext,
        acc_ext_measured: measured_ext.is_some(),
        acc_new: measured_new,
        acc_new_measured: measured_new.is_some(),
        bound: None,
    };
    if radius == 0.0 {
        pt.bound = Some(LiftBound { value: 0.0, informative: false });
        return pt;
    }
    let Some(l) = l else { return pt };
    let spread = l * p_d;
    if pt.acc_ext.is_none() {
        pt.acc_ext = m_y.and_then(|m| extended_accuracy_bound(ctx.accuracy, m, ctx.coverage, l, p_d).ok());
    }
    let Some(ext) = pt.acc_ext.map(|a| a.clamp(0.0, 1.0)) else { return pt };
    pt.acc_ext = Some(ext);
    if pt.acc_new.is_none() {
        pt.acc_new = if spread > 0.0 {
            m_y.map(|m| {
                ext - (2.0 * ctx.accuracy - 1.0) * m / (spread * ctx.coverage * ctx.coverage * (1.0 + spread))
            })
        } else {
            Some(ext)
        };
    }
    let Some(new) = pt.acc_new.map(|a| a.clamp(0.0, 1.0)) else { return pt };
    pt.acc_new = Some(new);
    pt.bound = Some(lift_lower_bound(l, p_d, ctx.coverage, new, ext, ctx.c));
    pt
}

fn dev_accuracy(dev: &DevSet, col: &[i8], keep: impl Fn(usize) -> bool) -> Option<f64> {
    let (mut hit, mut tot) = (0usize, 0usize);
    for (&i, &y) in dev.indices.iter().zip(&dev.labels) {
        if col[i] != 0 && keep(i) {
            tot += 1;
            hit += (col[i] == y) as usize;
        }
    }
    (tot > 0).then(|| hit as f64 / tot as f64)
}

/// Lift bound of `source` at each radius in `radii`. Each radius must be 0
/// or a candidate of `table` for this source.
pub fn lift_curve(
    table: &ExtensionTable,
    source: usize,
    radii: &[f64],
    sampler: &SmoothnessSampler,
    label_smoothness: &[Option<f64>],
    dev: Option<&DevSet>,
    ctx: &LiftContext,
) -> Result<Vec<LiftPoint>> {
    let base = table.base().column(source);
    let l = sampler.l(source, radii);
    radii
        .iter()
        .enumerate()
        .map(|(g, &r)| {
            let col = table.column(source, r)?;
            let (ext, new) = match dev {
                Some(dev) => (dev_accuracy(dev, &col, |_| true), dev_accuracy(dev, &col, |i| base[i] == 0)),
                None => (None, None),
            };
            Ok(lift_point(r, l[g], sampler.p_d(r), label_smoothness[g], ext, new, ctx))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryChoice {
    pub radius: f64,
    /// grid position of the chosen radius, None when falling back to 0
    pub index: Option<usize>,
    pub bound: f64,
    /// false when no radius has a positive bound
    pub informative: bool,
}

/// Radius with the largest lift bound; ties go to the smaller radius. If no
/// bound is positive the answer is radius 0, flagged non-informative.
pub fn select_by_bound(points: &[LiftPoint]) -> TheoryChoice {
    let mut best: Option<(usize, f64)> = None;
    for (g, p) in points.iter().enumerate() {
        if let Some(b) = p.bound {
            if best.is_none_or(|(_, v)| b.value > v) {
                best = Some((g, b.value));
            }
        }
    }
    match best {
        Some((g, v)) if v > 0.0 => TheoryChoice { radius: points[g].radius, index: Some(g), bound: v, informative: true },
        Some((_, v)) => TheoryChoice { radius: 0.0, index: None, bound: v, informative: false },
        None => TheoryChoice { radius: 0.0, index: None, bound: f64::NAN, informative: false },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_labels_pick_the_largest_radius() {
        let ctx = LiftContext { coverage: 0.3, accuracy: 0.85, c: 0.55 };
        let grid = [0.1, 0.2, 0.4, 0.8];
        let p_d = [0.01, 0.05, 0.2, 0.6];
        let pts: Vec<LiftPoint> =
            grid.iter().zip(p_d).map(|(&r, pd)| lift_point(r, Some(0.5), pd, Some(0.0), None, None, &ctx)).collect();
        for p in &pts {
            assert_eq!(p.acc_ext, Some(0.85));
            assert_eq!(p.acc_new, Some(0.85));
        }
        let c = select_by_bound(&pts);
        assert_eq!(c.index, Some(3));
        assert!(c.informative);
    }

    #[test]
    fn nonpositive_bounds_fall_back_to_zero() {
        let ctx = LiftContext { coverage: 0.3, accuracy: 0.5, c: 0.9 };
        let pts: Vec<LiftPoint> =
            [0.1, 0.2].iter().map(|&r| lift_point(r, Some(0.5), 0.1, Some(0.1), None, None, &ctx)).collect();
        let c = select_by_bound(&pts);
        assert_eq!(c.radius, 0.0);
        assert!(!c.informative);
    }
}
