//! Monotone bisection on disparity curves and Pareto-frontier tracing.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{FairError, Result};

/// Default bisection tolerance, `2^-15`.
pub const DEFAULT_TOL: f64 = 1.0 / 32768.0;

/// Margin by which a curve's natural domain is shrunk before bisecting.
pub const DOMAIN_MARGIN: f64 = 1e-9;

/// A non-increasing map `t ↦ D(t)` defined on `domain()`.
///
/// Evaluation takes `&mut self` so that empirical curves can keep warm-start
/// state between calls.
pub trait DisparityCurve {
    fn domain(&self) -> (f64, f64);
    fn disparity(&mut self, t: f64) -> Result<f64>;
}

/// Adapts a closure into a [`DisparityCurve`].
pub struct FnCurve<F> {
    f: F,
    lo: f64,
    hi: f64,
}

impl<F: FnMut(f64) -> f64> FnCurve<F> {
    pub fn new(lo: f64, hi: f64, f: F) -> Self {
        FnCurve { f, lo, hi }
    }
}

impl<F: FnMut(f64) -> f64> DisparityCurve for FnCurve<F> {
    fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn disparity(&mut self, t: f64) -> Result<f64> {
        Ok((self.f)(t))
    }
}

/// Adapts a fallible closure into a [`DisparityCurve`].
pub struct TryFnCurve<F> {
    f: F,
    lo: f64,
    hi: f64,
}

impl<F: FnMut(f64) -> Result<f64>> TryFnCurve<F> {
    pub fn new(lo: f64, hi: f64, f: F) -> Self {
        TryFnCurve { f, lo, hi }
    }
}

impl<F: FnMut(f64) -> Result<f64>> DisparityCurve for TryFnCurve<F> {
    fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn disparity(&mut self, t: f64) -> Result<f64> {
        (self.f)(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveResult {
    pub t_star: f64,
    /// `D(t_star)`; always within the target band for the returned side.
    pub d_at_t: f64,
    /// Number of curve evaluations.
    pub iterations: usize,
    pub converged: bool,
    /// `|D(lo) - D(hi)|` across the final bracket. Large values flag a jump of
    /// a step curve, where `D(t) = ±δ` is not attained exactly.
    pub step_at_exit: f64,
}

/// Search bracket: the natural domain shrunk by [`DOMAIN_MARGIN`],
/// intersected with `[-1, 1]`.
pub fn search_bracket(domain: (f64, f64)) -> (f64, f64) {
    let lo = (domain.0 + DOMAIN_MARGIN).max(-1.0);
    let hi = (domain.1 - DOMAIN_MARGIN).min(1.0);
    (lo, hi)
}

/// Smallest `|t|` with `|D(t)| ≤ δ`.
///
/// The returned point always lies on the feasible side of the final bracket.
pub fn solve_threshold<C: DisparityCurve + ?Sized>(
    curve: &mut C,
    delta: f64,
    tol: f64,
) -> Result<SolveResult> {
    if !(delta >= 0.0) {
        return Err(FairError::Invalid(format!("delta must be non-negative, got {delta}")));
    }
    if !(tol > 0.0) {
        return Err(FairError::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let (lo, hi) = search_bracket(curve.domain());
    if !(lo < 0.0 && 0.0 < hi) {
        return Err(FairError::Domain(format!("bracket [{lo}, {hi}] does not contain 0")));
    }
    let d0 = curve.disparity(0.0)?;
    if d0.abs() <= delta {
        return Ok(SolveResult { t_star: 0.0, d_at_t: d0, iterations: 1, converged: true, step_at_exit: 0.0 });
    }

    // Positive branch: keep D(inf) > δ ≥ D(feas), with `feas` further from 0.
    // Negative branch mirrors it around D = -δ.
    let (edge, target) = if d0 > delta { (hi, delta) } else { (lo, -delta) };
    let above = |d: f64| if d0 > delta { d > target } else { d < target };
    let d_edge = curve.disparity(edge)?;
    if above(d_edge) {
        return Err(FairError::Bracket { lo, hi, target, value: d_edge });
    }

    let mut infeasible = (0.0, d0);
    let mut feasible = (edge, d_edge);
    let mut evals = 2;
    while (feasible.0 - infeasible.0).abs() > tol {
        let mid = 0.5 * (feasible.0 + infeasible.0);
        let d = curve.disparity(mid)?;
        evals += 1;
        if above(d) {
            infeasible = (mid, d);
        } else {
            feasible = (mid, d);
        }
    }
    Ok(SolveResult {
        t_star: feasible.0,
        d_at_t: feasible.1,
        iterations: evals,
        converged: true,
        step_at_exit: (infeasible.1 - feasible.1).abs(),
    })
}

/// Upper bound on evaluations made by [`solve_threshold`] on a bracket of
/// the given width.
pub fn evaluation_bound(width: f64, tol: f64) -> usize {
    let ratio = (width / tol).max(1.0);
    // ceil(log2(ratio)) without std float functions.
    let mut k = 0usize;
    let mut w = 1.0f64;
    while w < ratio {
        w *= 2.0;
        k += 1;
    }
    k + 2
}

/// One point of the fairness-risk tradeoff.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrontierRow {
    pub delta: f64,
    pub t: f64,
    pub risk: f64,
    pub disparity: f64,
}

/// Solves the threshold at every `delta` and records the risk there.
pub fn trace_pareto<C, R>(curve: &mut C, mut risk_eval: R, deltas: &[f64], tol: f64) -> Result<Vec<FrontierRow>>
where
    C: DisparityCurve + ?Sized,
    R: FnMut(f64) -> Result<f64>,
{
    if deltas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(FairError::Invalid("deltas must be sorted ascending".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let sol = solve_threshold(curve, delta, tol)?;
        rows.push(FrontierRow { delta, t: sol.t_star, risk: risk_eval(sol.t_star)?, disparity: sol.d_at_t });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TradeoffCheck {
    pub holds: bool,
    /// Largest amount by which a pair exceeds its bounds (0 when all hold).
    pub worst_violation: f64,
    /// Index `i` of the offending pair `(rows[i], rows[i + 1])`.
    pub worst_pair: Option<usize>,
}

/// Checks `|t₂|·Δδ ≤ T(δ₁) − T(δ₂) ≤ |t₁|·Δδ` for adjacent frontier rows,
/// within `1e-6`.
pub fn check_tradeoff_bounds(rows: &[FrontierRow]) -> TradeoffCheck {
    const SLACK: f64 = 1e-6;
    let mut worst = 0.0;
    let mut worst_pair = None;
    for (i, w) in rows.windows(2).enumerate() {
        let (r1, r2) = (&w[0], &w[1]);
        let gap = r2.delta - r1.delta;
        let drop = r1.risk - r2.risk;
        let lower = r2.t.abs() * gap;
        let upper = r1.t.abs() * gap;
        let violation = (lower - drop).max(drop - upper);
        if violation > SLACK && violation > worst {
            worst = violation;
            worst_pair = Some(i);
        }
    }
    TradeoffCheck { holds: worst_pair.is_none(), worst_violation: worst, worst_pair }
}
