//! Label-conditional isotropic Gaussian model with closed-form regression
//! function, score distributions, disparity curves and risks.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::LabeledDataset;
use crate::disparity::{bilinear_coeffs, DisparityKind, GroupStats};
use crate::error::{FairError, Result};
use crate::math::{ln, normal_cdf, sigmoid, sqrt};
use crate::solver::{solve_threshold, DisparityCurve};

/// Score distribution of `η_a(X)` inside each `(a, y)` cell.
pub trait GroupScoreDistribution {
    /// `P(η_a(X) > τ | A = a, Y = y)`.
    fn survival(&self, a: u8, y: u8, tau: f64) -> f64;
}

/// Acceptance curve of one group: `τ ↦ P(η_a(X) > τ | A = a)`.
pub trait GroupAcceptance {
    fn acceptance(&self, tau: f64) -> f64;
}

/// One protected group: `X | A = a, Y = y ~ N(μ_y, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupGaussian {
    /// `P(A = a, Y = 1)` and `P(A = a, Y = 0)`.
    pub p1: f64,
    pub p0: f64,
    pub mean1: Vec<f64>,
    pub mean0: Vec<f64>,
    pub sigma: f64,
    separation: f64,
}

impl GroupGaussian {
    pub fn new(p1: f64, p0: f64, mean1: Vec<f64>, mean0: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(FairError::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(p1 > 0.0 && p0 > 0.0) {
            return Err(FairError::Invalid("cell probabilities must be positive".into()));
        }
        if mean1.len() != mean0.len() || mean1.is_empty() {
            return Err(FairError::Invalid("class means must share a positive dimension".into()));
        }
        let separation = sqrt(mean1.iter().zip(&mean0).map(|(a, b)| (a - b) * (a - b)).sum());
        if !(separation > 0.0) {
            return Err(FairError::Invalid("class means coincide; the regression function is constant".into()));
        }
        Ok(GroupGaussian { p1, p0, mean1, mean0, sigma, separation })
    }

    pub fn dim(&self) -> usize {
        self.mean1.len()
    }

    /// `‖μ_1 − μ_0‖`.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// `P(Y = 1 | X = x, A = a)`.
    pub fn eta(&self, x: &[f64]) -> f64 {
        let d1: f64 = x.iter().zip(&self.mean1).map(|(v, m)| (v - m) * (v - m)).sum();
        let d0: f64 = x.iter().zip(&self.mean0).map(|(v, m)| (v - m) * (v - m)).sum();
        sigmoid(ln(self.p1 / self.p0) + (d0 - d1) / (2.0 * self.sigma * self.sigma))
    }

    fn standard_score(&self, y: u8, tau: f64) -> f64 {
        let q = tau * self.p0 / ((1.0 - tau) * self.p1);
        let sign = if y == 1 { -1.0 } else { 1.0 };
        self.sigma * ln(q) / self.separation + sign * self.separation / (2.0 * self.sigma)
    }

    /// `P(η ≤ τ | Y = y)` for `τ ∈ (0, 1)`.
    pub fn psi(&self, y: u8, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(FairError::Domain(format!("psi needs t in (0, 1), got {tau}")));
        }
        Ok(normal_cdf(self.standard_score(y, tau)))
    }

    /// `P(η > τ | Y = y)`, extended by 1 below 0 and by 0 above 1.
    pub fn survival(&self, y: u8, tau: f64) -> f64 {
        if tau <= 0.0 {
            1.0
        } else if tau >= 1.0 {
            0.0
        } else {
            normal_cdf(-self.standard_score(y, tau))
        }
    }

    /// Acceptance, true-positive and false-positive rates of `η > τ`.
    pub fn rates(&self, tau: f64) -> GroupRates {
        let tpr = self.survival(1, tau);
        let fpr = self.survival(0, tau);
        let acceptance = (self.p1 * tpr + self.p0 * fpr) / (self.p1 + self.p0);
        GroupRates { acceptance, tpr, fpr }
    }

    /// Joint misclassification mass `P(error, A = a)` of `η > τ`.
    pub fn error_mass(&self, tau: f64) -> f64 {
        self.p1 * (1.0 - self.survival(1, tau)) + self.p0 * self.survival(0, tau)
    }
}

impl GroupAcceptance for GroupGaussian {
    fn acceptance(&self, tau: f64) -> f64 {
        self.rates(tau).acceptance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupRates {
    pub acceptance: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Two-group Gaussian model.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    stats: GroupStats,
    groups: [GroupGaussian; 2],
}

impl GaussianModel {
    /// `means` is indexed `[a][y]`.
    pub fn new(stats: GroupStats, means: [[Vec<f64>; 2]; 2], sigma: f64) -> Result<Self> {
        let [[m00, m01], [m10, m11]] = means;
        if m00.len() != m10.len() {
            return Err(FairError::Invalid("all mean vectors must share one dimension".into()));
        }
        let g0 = GroupGaussian::new(stats.cell(0, 1), stats.cell(0, 0), m01, m00, sigma)?;
        let g1 = GroupGaussian::new(stats.cell(1, 1), stats.cell(1, 0), m11, m10, sigma)?;
        Ok(GaussianModel { stats, groups: [g0, g1] })
    }

    /// Means with entries drawn independently from `Unif(0, 1)`.
    pub fn with_uniform_means(stats: GroupStats, dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..dim).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
        // Fixed draw order: (1,1), (1,0), (0,1), (0,0).
        let m11 = draw();
        let m10 = draw();
        let m01 = draw();
        let m00 = draw();
        GaussianModel::new(stats, [[m00, m01], [m10, m11]], sigma)
    }

    pub fn stats(&self) -> &GroupStats {
        &self.stats
    }

    pub fn group(&self, a: u8) -> &GroupGaussian {
        &self.groups[a as usize]
    }

    pub fn dim(&self) -> usize {
        self.groups[0].dim()
    }

    pub fn sigma(&self) -> f64 {
        self.groups[0].sigma
    }

    /// Class mean `μ_{a,y}`.
    pub fn mean(&self, a: u8, y: u8) -> &[f64] {
        let g = &self.groups[a as usize];
        if y == 1 {
            &g.mean1
        } else {
            &g.mean0
        }
    }

    pub fn eta(&self, a: u8, x: &[f64]) -> f64 {
        self.groups[a as usize].eta(x)
    }

    pub fn psi(&self, a: u8, y: u8, t: f64) -> Result<f64> {
        self.groups[a as usize].psi(y, t)
    }

    /// Disparity of the group-threshold rule `η_a > thresholds[a]`.
    pub fn disparity_at(&self, kind: DisparityKind, thresholds: [f64; 2]) -> f64 {
        let r1 = self.groups[1].rates(thresholds[1]);
        let r0 = self.groups[0].rates(thresholds[0]);
        match kind {
            DisparityKind::DemographicParity => r1.acceptance - r0.acceptance,
            DisparityKind::EqualOpportunity => r1.tpr - r0.tpr,
            DisparityKind::PredictiveEquality => r1.fpr - r0.fpr,
        }
    }

    /// Misclassification rate of the group-threshold rule.
    pub fn risk_at(&self, thresholds: [f64; 2]) -> f64 {
        self.groups[0].error_mass(thresholds[0]) + self.groups[1].error_mass(thresholds[1])
    }

    /// Group thresholds `H_a(t)` for the given kind.
    pub fn thresholds(&self, kind: DisparityKind, t: f64) -> Result<[f64; 2]> {
        let spec = bilinear_coeffs(kind, &self.stats);
        Ok([spec.threshold(0, t)?, spec.threshold(1, t)?])
    }

    fn check_domain(&self, kind: DisparityKind, t: f64) -> Result<()> {
        let (lo, hi) = kind.domain(&self.stats);
        if t < lo || t > hi {
            return Err(FairError::Domain(format!("t = {t} outside [{lo}, {hi}] for {kind}")));
        }
        Ok(())
    }

    /// Closed-form disparity curve `t ↦ Dis(f_t)`.
    pub fn disparity_curve(&self, kind: DisparityKind) -> ClosedFormCurve<'_> {
        ClosedFormCurve { model: self, kind }
    }

    /// Exact misclassification rate of `f_t`.
    pub fn risk(&self, kind: DisparityKind, t: f64) -> Result<f64> {
        self.check_domain(kind, t)?;
        Ok(self.risk_at(self.thresholds(kind, t)?))
    }

    /// `δ`-fair Bayes-optimal group-threshold rule.
    pub fn fair_classifier(&self, kind: DisparityKind, delta: f64, tol: f64) -> Result<TheoreticalRule> {
        let sol = solve_threshold(&mut self.disparity_curve(kind), delta, tol)?;
        let thresholds = self.thresholds(kind, sol.t_star)?;
        Ok(TheoreticalRule {
            t: sol.t_star,
            thresholds,
            risk: self.risk_at(thresholds),
            disparity: sol.d_at_t,
        })
    }

    /// `n` i.i.d. rows; `(a, y)` is drawn from the cell table, then
    /// `x ~ N(μ_{a,y}, σ² I)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(FairError::Invalid("sample size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let sigma = self.sigma();
        let cells = [(1u8, 1u8), (1, 0), (0, 1), (0, 0)];
        let mut data = LabeledDataset::with_capacity(d, n);
        let mut x = alloc::vec![0.0; d];
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut cell = cells[3];
            for &(a, y) in &cells {
                acc += self.stats.cell(a, y);
                if u < acc {
                    cell = (a, y);
                    break;
                }
            }
            let mu = self.mean(cell.0, cell.1);
            for (xi, m) in x.iter_mut().zip(mu) {
                let z: f64 = rng.sample(StandardNormal);
                *xi = m + sigma * z;
            }
            data.push(&x, cell.0, cell.1)?;
        }
        Ok(data)
    }
}

impl GroupScoreDistribution for GaussianModel {
    fn survival(&self, a: u8, y: u8, tau: f64) -> f64 {
        self.groups[a as usize].survival(y, tau)
    }
}

/// Closed-form disparity curve of a [`GaussianModel`].
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormCurve<'a> {
    model: &'a GaussianModel,
    kind: DisparityKind,
}

impl ClosedFormCurve<'_> {
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.model.check_domain(self.kind, t)?;
        Ok(self.model.disparity_at(self.kind, self.model.thresholds(self.kind, t)?))
    }
}

impl DisparityCurve for ClosedFormCurve<'_> {
    fn domain(&self) -> (f64, f64) {
        self.kind.domain(&self.model.stats)
    }

    fn disparity(&mut self, t: f64) -> Result<f64> {
        self.eval(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TheoreticalRule {
    pub t: f64,
    /// Indexed by group.
    pub thresholds: [f64; 2],
    pub risk: f64,
    pub disparity: f64,
}
