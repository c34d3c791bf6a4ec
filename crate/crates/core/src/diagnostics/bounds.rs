//! Closed-form bounds relating extension radius, smoothness and accuracy.
//!
//! Notation shared by all functions:
//! `a` accuracy of a source on its original support, `p` its coverage,
//! `m_y` label disagreement rate among pairs within r, `l` rate at which the
//! source's support indicator changes among pairs within r, `p_d` fraction of
//! pairs within r.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

fn unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        bail!(InvalidInput, "{name} must lie in [0, 1], got {x}");
    }
    Ok(())
}

fn positive_coverage(p: f64) -> Result<()> {
    unit("coverage", p)?;
    if p == 0.0 {
        bail!(InvalidInput, "coverage must be positive");
    }
    Ok(())
}

/// Lower bound on the accuracy of the extended source:
/// `a - (2a - 1) m_y / (p^2 (1 + l p_d))`.
pub fn extended_accuracy_bound(a: f64, m_y: f64, p: f64, l: f64, p_d: f64) -> Result<f64> {
    unit("accuracy", a)?;
    unit("M_Y", m_y)?;
    unit("L", l)?;
    unit("p_d", p_d)?;
    positive_coverage(p)?;
    Ok(a - (2.0 * a - 1.0) * m_y / (p * p * (1.0 + l * p_d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftBound {
    pub value: f64,
    /// false when the bound is not positive and so says nothing
    pub informative: bool,
}

/// Lower bound on the asymptotic risk reduction from extending one source:
/// `l p_d p (0.5 (c + 1)(acc_new acc_ext + (1 - acc_new)(1 - acc_ext)) - c)`,
/// with `acc_new` the accuracy on the newly labeled region, `acc_ext` the
/// accuracy of the whole extended source and `c` the other-sources constant.
pub fn lift_lower_bound(l: f64, p_d: f64, p: f64, acc_new: f64, acc_ext: f64, c: f64) -> LiftBound {
    let agree = acc_new * acc_ext + (1.0 - acc_new) * (1.0 - acc_ext);
    let value = l * p_d * p * (0.5 * (c + 1.0) * agree - c);
    LiftBound { value, informative: value > 0.0 }
}

/// Constants of the parameter-estimation error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationConstants {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    /// minimum over sources of the best pairwise overlap
    pub o_min: f64,
    /// smallest |2a - 1|
    pub e_min: f64,
    /// smallest |E[l_i l_j | both vote]|
    pub c1: f64,
    /// E[Pr(Y = 1 | votes)]
    pub c2: f64,
    /// smallest probability of an observed vote pattern
    pub c_p: f64,
    /// smallest support-indicator rate among extended sources
    pub l_min: f64,
    /// pair fraction within the smallest extension radius
    pub p_d_min: f64,
}

pub fn concentration_epsilon(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// High-probability bound on the label-model estimation error. With
/// `extended` the effective sample size gains the factor
/// `1 + (2 l_min - l_min^2) p_d_min`.
pub fn estimation_error_bound(k: &EstimationConstants, extended: bool) -> Result<f64> {
    if k.n == 0 || !(k.delta > 0.0 && k.delta < 1.0) {
        bail!(InvalidInput, "need n > 0 and delta in (0, 1)");
    }
    if !(k.o_min > 0.0 && k.e_min > 0.0 && k.c1 > 0.0) {
        bail!(Degenerate, "estimation bound needs positive o_min, e_min and c_1");
    }
    let eps = concentration_epsilon(k.n, k.delta);
    if k.c_p <= eps {
        bail!(Degenerate, "bound vacuous at this n, delta (c_p = {} <= eps_n = {eps})", k.c_p);
    }
    let gain = if extended { 1.0 + (2.0 * k.l_min - k.l_min * k.l_min) * k.p_d_min } else { 1.0 };
    let lead = 81.0 * std::f64::consts::PI.sqrt() / (2.0 * k.e_min * k.c1 * k.c1);
    let first = lead * k.m as f64 / (k.n as f64 * k.o_min * gain).sqrt();
    Ok((first + eps * k.c2) / (k.c_p - eps))
}

/// Label smoothness implied by a model with smoothness `m_f` and risk `risk`.
pub fn smoothness_from_model(m_f: f64, risk: f64) -> f64 {
    (m_f + 2.0 * risk).min(1.0)
}

/// Risk of an extended source when label smoothness comes from a model:
/// `1 - a + (2a - 1)(m_f + 2 risk) / (p^2 (1 + l p_d))`.
pub fn extended_risk_bound(a: f64, m_f: f64, risk: f64, p: f64, l: f64, p_d: f64) -> Result<f64> {
    unit("accuracy", a)?;
    unit("M_f", m_f)?;
    unit("risk", risk)?;
    unit("L", l)?;
    unit("p_d", p_d)?;
    positive_coverage(p)?;
    Ok(1.0 - a + (2.0 * a - 1.0) * (m_f + 2.0 * risk) / (p * p * (1.0 + l * p_d)))
}

/// Per-source inputs of the ensemble bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceRiskTerms {
    /// probability mass of the region this source is responsible for
    pub weight: f64,
    pub accuracy: f64,
    pub m_f: f64,
    pub risk: f64,
    pub coverage: f64,
    pub l: f64,
    pub p_d: f64,
}

/// Risk of an ensemble of extended sources:
/// `2b sum_i w_i risk_i + 2 Pr(X0) p (1 - p)`, `b = max(p/(1-p), (1-p)/p)`,
/// where `X0` is the region no source covers.
pub fn ensemble_risk_bound(terms: &[SourceRiskTerms], prior: f64, uncovered: f64) -> Result<f64> {
    if !(prior > 0.0 && prior < 1.0) {
        bail!(InvalidInput, "prior must lie in (0, 1), got {prior}");
    }
    unit("uncovered mass", uncovered)?;
    let total: f64 = terms.iter().map(|t| t.weight).sum::<f64>() + uncovered;
    if (total - 1.0).abs() > 1e-9 || terms.iter().any(|t| t.weight < 0.0) {
        bail!(InvalidInput, "region weights must be non-negative and sum to 1 with the uncovered mass, got {total}");
    }
    let b = (prior / (1.0 - prior)).max((1.0 - prior) / prior);
    let mut avg = 0.0;
    for t in terms {
        if t.weight > 0.0 {
            avg += t.weight * extended_risk_bound(t.accuracy, t.m_f, t.risk, t.coverage, t.l, t.p_d)?;
        }
    }
    Ok(2.0 * b * avg + 2.0 * uncovered * prior * (1.0 - prior))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_accuracy_hand_values() {
        let v = extended_accuracy_bound(0.9, 0.05, 0.5, 0.4, 0.3).unwrap();
        assert!((v - (0.9 - 1.0 / 7.0)).abs() < 1e-12);
        assert_eq!(extended_accuracy_bound(0.8, 0.0, 0.3, 0.7, 0.2).unwrap(), 0.8);
        assert_eq!(extended_accuracy_bound(0.5, 0.3, 0.3, 0.7, 0.2).unwrap(), 0.5);
        assert!(extended_accuracy_bound(0.8, 0.1, 0.0, 0.7, 0.2).is_err());
    }

    #[test]
    fn lift_hand_values() {
        let b = lift_lower_bound(0.5, 0.2, 0.5, 0.9, 0.9, 0.6);
        assert!((b.value - 0.0028).abs() < 1e-12);
        assert!(b.informative);
        assert_eq!(lift_lower_bound(0.0, 0.2, 0.5, 0.9, 0.9, 0.6).value, 0.0);
        let b = lift_lower_bound(0.5, 0.2, 0.5, 0.5, 0.5, 0.5);
        assert!(b.value < 0.0 && !b.informative);
    }

    #[test]
    fn smoothness_and_risk_hand_values() {
        assert_eq!(smoothness_from_model(0.0, 0.0), 0.0);
        assert!((smoothness_from_model(0.1, 0.2) - 0.5).abs() < 1e-15);
        assert_eq!(smoothness_from_model(0.8, 0.3), 1.0);
        let r = extended_risk_bound(0.9, 0.05, 0.1, 0.5, 0.4, 0.3).unwrap();
        assert!((r - (0.1 + 0.8 * 0.25 / 0.28)).abs() < 1e-12);
        assert!((r - 0.8142857).abs() < 1e-7);
        assert_eq!(extended_risk_bound(0.5, 0.3, 0.2, 0.4, 0.1, 0.1).unwrap(), 0.5);
        assert_eq!(extended_risk_bound(1.0, 0.0, 0.15, 1.0, 0.0, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn ensemble_limits() {
        let perfect = SourceRiskTerms { weight: 0.5, accuracy: 1.0, m_f: 0.0, risk: 0.0, coverage: 0.5, l: 0.2, p_d: 0.1 };
        assert_eq!(ensemble_risk_bound(&[perfect, perfect], 0.5, 0.0).unwrap(), 0.0);
        assert_eq!(ensemble_risk_bound(&[], 0.5, 1.0).unwrap(), 0.5);
        assert!(ensemble_risk_bound(&[], 1.0, 1.0).is_err());
    }
}
