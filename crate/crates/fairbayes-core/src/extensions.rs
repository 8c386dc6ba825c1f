//! Equalized odds with two offsets, perfect demographic parity across many
//! groups, and cost-sensitive thresholds.

use alloc::format;
use alloc::vec::Vec;

use crate::disparity::{bilinear_coeffs, group_sign, DisparityKind, GroupStats};
use crate::error::{FairError, Result};
use crate::gaussian::{GroupAcceptance, GroupScoreDistribution};
use crate::solver::{search_bracket, solve_threshold, TryFnCurve, DOMAIN_MARGIN};

/// Offsets of the equalized-odds rule: `t1` weights the true-positive
/// constraint, `t2` the false-positive one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EqOddsThresholds {
    pub t1: f64,
    pub t2: f64,
}

/// Domains of `t1` and `t2`.
pub fn eqodds_domain(stats: &GroupStats) -> ((f64, f64), (f64, f64)) {
    ((-stats.cell(0, 1), stats.cell(1, 1)), (-stats.cell(1, 0), stats.cell(0, 0)))
}

/// Group threshold `T_a(t1, t2)` of the equalized-odds rule.
pub fn eqodds_group_threshold(stats: &GroupStats, a: u8, t1: f64, t2: f64) -> Result<f64> {
    let sg = group_sign(a);
    let p1 = stats.cell(a, 1);
    let p0 = stats.cell(a, 0);
    let den = 2.0 * p1 * p0 + sg * (t2 * p1 - t1 * p0);
    if !(den > 0.0) {
        return Err(FairError::Domain(format!(
            "equalized-odds threshold of group {a} undefined at (t1, t2) = ({t1}, {t2})"
        )));
    }
    Ok((p1 * p0 + sg * t2 * p1) / den)
}

/// `(DO, PD)` of the rule `η_a > T_a(t1, t2)`.
pub fn eqodds_disparities<G: GroupScoreDistribution + ?Sized>(
    dist: &G,
    stats: &GroupStats,
    t1: f64,
    t2: f64,
) -> Result<(f64, f64)> {
    let h1 = eqodds_group_threshold(stats, 1, t1, t2)?;
    let h0 = eqodds_group_threshold(stats, 0, t1, t2)?;
    let tpr = dist.survival(1, 1, h1) - dist.survival(0, 1, h0);
    let fpr = dist.survival(1, 0, h1) - dist.survival(0, 0, h0);
    Ok((tpr, fpr))
}

/// Misclassification rate of the equalized-odds rule.
pub fn eqodds_risk<G: GroupScoreDistribution + ?Sized>(dist: &G, stats: &GroupStats, t1: f64, t2: f64) -> Result<f64> {
    let mut risk = 0.0;
    for a in 0..2u8 {
        let h = eqodds_group_threshold(stats, a, t1, t2)?;
        risk += stats.cell(a, 1) * (1.0 - dist.survival(a, 1, h)) + stats.cell(a, 0) * dist.survival(a, 0, h);
    }
    Ok(risk)
}

fn bisect<F: FnMut(f64) -> Result<f64>>(mut lo: f64, mut hi: f64, tol: f64, mut f: F) -> Result<(f64, f64)> {
    // Requires f(lo) > 0 ≥ f(hi) (or the mirror); returns the endpoint where
    // f ≤ 0 together with the value there.
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo <= 0.0 {
        return Ok((lo, f_lo));
    }
    if f_hi > 0.0 {
        return Err(FairError::Infeasible(format!("no sign change on [{lo}, {hi}]")));
    }
    let mut v_hi = f_hi;
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            v_hi = v;
        }
    }
    Ok((hi, v_hi))
}

/// `δ`-fair offsets under equalized odds.
///
/// The optimum is one of: the unconstrained rule, a rule with one active
/// constraint, or a corner where both disparities sit on the band edge with
/// each offset sharing the sign of its edge. Every candidate is solved and
/// the feasible one with least risk is kept. Corners use nested bisection,
/// outer on `t2` and inner on `t1`.
pub fn solve_eqodds<G: GroupScoreDistribution + ?Sized>(
    dist: &G,
    stats: &GroupStats,
    delta: f64,
    tol: f64,
) -> Result<EqOddsThresholds> {
    let (dom1, dom2) = eqodds_domain(stats);
    let do_at = |t1: f64, t2: f64| eqodds_disparities(dist, stats, t1, t2).map(|d| d.0);
    let pd_at = |t1: f64, t2: f64| eqodds_disparities(dist, stats, t1, t2).map(|d| d.1);

    let acute_do = solve_threshold(&mut TryFnCurve::new(dom1.0, dom1.1, |t| do_at(t, 0.0)), delta, tol)?.t_star;
    let acute_pd = solve_threshold(&mut TryFnCurve::new(dom2.0, dom2.1, |t| pd_at(0.0, t)), delta, tol)?.t_star;

    let mut candidates = Vec::with_capacity(7);
    candidates.push((0.0, 0.0));
    candidates.push((acute_do, 0.0));
    candidates.push((0.0, acute_pd));

    let (b1, b2) = (search_bracket(dom1), search_bracket(dom2));
    let inner_tol = tol * 1e-3;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let edge1 = if s1 > 0.0 { b1.1 } else { b1.0 };
            let edge2 = if s2 > 0.0 { b2.1 } else { b2.0 };
            // t1 on the s1 side with s1·DO ≤ δ, as close to 0 as possible.
            let inner = |t2: f64| -> Result<f64> {
                bisect(0.0, edge1, inner_tol, |t1| Ok(s1 * do_at(t1, t2)? - delta)).map(|r| r.0)
            };
            let outer = |t2: f64| -> Result<f64> {
                let t1 = inner(t2)?;
                Ok(s2 * pd_at(t1, t2)? - delta)
            };
            // A corner without a sign change does not exist for this pattern.
            if let Ok((t2, _)) = bisect(0.0, edge2, tol, outer) {
                if let Ok(t1) = inner(t2) {
                    candidates.push((t1, t2));
                }
            }
        }
    }

    let mut best: Option<(f64, EqOddsThresholds)> = None;
    for (t1, t2) in candidates {
        let (a, b) = eqodds_disparities(dist, stats, t1, t2)?;
        if !(a.abs() <= delta && b.abs() <= delta) {
            continue;
        }
        let risk = eqodds_risk(dist, stats, t1, t2)?;
        if best.as_ref().is_none_or(|(r, _)| risk < *r) {
            best = Some((risk, EqOddsThresholds { t1, t2 }));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| FairError::Infeasible(format!("no equalized-odds rule meets delta = {delta}")))
}

/// Group offsets of the multi-group demographic-parity rule
/// `η_a > 1/2 + t_a / (2 p_a)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MulticlassThresholds {
    pub offsets: Vec<f64>,
    /// Common acceptance rate reached by every group.
    pub acceptance: f64,
}

impl MulticlassThresholds {
    pub fn group_threshold(&self, a: usize, group_mass: f64) -> f64 {
        0.5 + self.offsets[a] / (2.0 * group_mass)
    }
}

/// Offset `t_a` at which group `a` accepts exactly a fraction `s`.
fn offset_for_rate<G: GroupAcceptance + ?Sized>(group: &G, mass: f64, s: f64, idx: usize) -> Result<f64> {
    // Threshold τ ∈ [0, 1]; acceptance is non-increasing in τ.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if group.acceptance(mid) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    if (group.acceptance(tau) - s).abs() > 1e-7 {
        return Err(FairError::Degenerate {
            group: idx,
            reason: format!("acceptance rate {s} is not attained by any threshold"),
        });
    }
    Ok(2.0 * mass * (tau - 0.5))
}

/// Perfect demographic parity for `K ≥ 2` groups with continuous scores.
///
/// Parametrises by the common acceptance rate `s`, maps each group to its
/// offset `t_a(s)`, and bisects on `s` until `Σ t_a(s) = 0`.
pub fn solve_multiclass_dp<G: GroupAcceptance>(groups: &[G], masses: &[f64]) -> Result<MulticlassThresholds> {
    if groups.len() < 2 || groups.len() != masses.len() {
        return Err(FairError::Invalid("need at least two groups with one mass each".into()));
    }
    for (i, g) in groups.iter().enumerate() {
        let spread = g.acceptance(DOMAIN_MARGIN) - g.acceptance(1.0 - DOMAIN_MARGIN);
        if !(spread > 1e-9) {
            return Err(FairError::Degenerate { group: i, reason: "acceptance curve is flat".into() });
        }
    }
    let offsets_at = |s: f64| -> Result<Vec<f64>> {
        groups.iter().zip(masses).enumerate().map(|(i, (g, &m))| offset_for_rate(g, m, s, i)).collect()
    };
    let sum_at = |s: f64| offsets_at(s).map(|v| v.iter().sum::<f64>());

    // Σ t_a(s) decreases in s; bracket the root strictly inside (0, 1).
    let max_low = groups.iter().map(|g| g.acceptance(1.0 - DOMAIN_MARGIN)).fold(0.0, f64::max);
    let min_high = groups.iter().map(|g| g.acceptance(DOMAIN_MARGIN)).fold(1.0, f64::min);
    let (mut lo, mut hi) = (max_low + 1e-12, min_high - 1e-12);
    if !(lo < hi) {
        return Err(FairError::Infeasible("groups share no common acceptance rate".into()));
    }
    if sum_at(lo)? < 0.0 || sum_at(hi)? > 0.0 {
        return Err(FairError::Infeasible("offset sum does not change sign over acceptance rates".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if sum_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let mut offsets = offsets_at(s)?;
    // Remove the residual of the inner bisections so the offsets sum to zero.
    let shift = offsets.iter().sum::<f64>() / offsets.len() as f64;
    for t in offsets.iter_mut() {
        *t -= shift;
    }
    Ok(MulticlassThresholds { offsets, acceptance: s })
}

/// Threshold of the `δ`-fair rule under cost-sensitive risk with cost `c`
/// on false positives: `η > c + t·w(η, a)`.
pub fn cost_sensitive_threshold(kind: DisparityKind, stats: &GroupStats, a: u8, t: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(FairError::Domain(format!("cost {c} must lie in (0, 1)")));
    }
    bilinear_coeffs(kind, stats).cost_sensitive_threshold(a, t, c)
}
