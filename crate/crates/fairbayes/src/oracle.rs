//! Oracle-equivalence suites: each solver against an exhaustive search.

use fairbayes_core::discrete::{brute_force_oracle, solve_randomized, Atom, FiniteDistribution};
use fairbayes_core::extensions::{eqodds_disparities, eqodds_domain, eqodds_risk, solve_eqodds};
use fairbayes_core::gaussian::GroupScoreDistribution;
use fairbayes_core::solver::{search_bracket, solve_threshold, TryFnCurve};
use fairbayes_core::{DisparityKind, GaussianModel, GroupStats, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model_file::ModelFile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    /// Names of failing instances.
    pub failures: Vec<String>,
    pub worst_residual: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    fn new(name: &str, tolerance: f64) -> Self {
        SuiteResult { name: name.into(), instances: 0, failures: Vec::new(), worst_residual: 0.0, tolerance }
    }

    fn record(&mut self, instance: impl FnOnce() -> String, residual: f64) {
        self.instances += 1;
        if residual.is_nan() || residual > self.worst_residual {
            self.worst_residual = residual;
        }
        if residual.is_nan() || residual > self.tolerance {
            self.failures.push(instance());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.instances > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleOptions {
    pub seed: u64,
    /// Perturb every solver output by this amount: thresholds for the
    /// continuous suites, the reported risk for the discrete one.
    pub fault: Option<f64>,
}

/// Random finite distribution with `atoms` atoms and both groups present.
pub fn random_instance(rng: &mut impl Rng, atoms: usize) -> FiniteDistribution<f64> {
    let atoms = atoms.max(2);
    let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let list = raw
        .iter()
        .enumerate()
        .map(|(i, m)| Atom {
            group: if i < 2 { i as u8 } else { rng.random_range(0..2u8) },
            mass: m / total,
            eta: rng.random_range(0.02..0.98),
        })
        .collect();
    FiniteDistribution::new(list).expect("generated instance is valid")
}

/// `solve_randomized` against [`brute_force_oracle`]: risk within `1e-9` and
/// the constraint met, over 200 random instances, all kinds and
/// `δ ∈ {0, 0.1, 0.3}`.
pub fn discrete_suite(opts: &OracleOptions) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new("discrete-exact", 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for inst in 0..200 {
        let n = rng.random_range(2..=6);
        let dist = random_instance(&mut rng, n);
        let cells = dist.cell_masses();
        for kind in DisparityKind::ALL {
            for delta in [0.0, 0.1, 0.3] {
                let sol = solve_randomized(&dist, kind, &cells, &delta)?;
                let (oracle_risk, _) = brute_force_oracle(&dist, kind, &cells, &delta)?;
                let mut risk = sol.risk;
                if let Some(eps) = opts.fault {
                    risk += eps;
                }
                let residual = (risk - oracle_risk).abs().max(sol.disparity.abs() - delta);
                suite.record(|| format!("instance {inst} ({n} atoms), {kind}, delta {delta}"), residual);
            }
        }
    }
    Ok(suite)
}

fn random_stats(rng: &mut impl Rng) -> GroupStats {
    let raw: [f64; 4] = core::array::from_fn(|_| rng.random_range(0.1..1.0));
    let total: f64 = raw.iter().sum();
    GroupStats::new([[raw[0] / total, raw[1] / total], [raw[2] / total, raw[3] / total]]).expect("valid stats")
}

/// Smallest `|t|` on a grid of the given step where `D` has entered the
/// band from the side of `D(0)`, scanning outward from 0.
pub fn grid_threshold(curve: impl Fn(f64) -> Result<f64>, domain: (f64, f64), delta: f64, step: f64) -> Result<Option<f64>> {
    let d0 = curve(0.0)?;
    if d0.abs() <= delta {
        return Ok(Some(0.0));
    }
    let (lo, hi) = search_bracket(domain);
    let dir = if d0 > 0.0 { 1.0 } else { -1.0 };
    let mut k = 1u64;
    loop {
        let t = dir * k as f64 * step;
        if t < lo || t > hi {
            return Ok(None);
        }
        if dir * curve(t)? <= delta {
            return Ok(Some(t));
        }
        k += 1;
    }
}

fn suite_models(rng: &mut impl Rng) -> Result<Vec<GaussianModel>> {
    let mut models = vec![ModelFile::synthetic().to_model()?];
    while models.len() < 10 {
        let stats = random_stats(rng);
        let dim = rng.random_range(2..=5);
        let sigma = rng.random_range(0.5..1.5);
        models.push(GaussianModel::with_uniform_means(stats, dim, sigma, rng.random())?);
    }
    Ok(models)
}

/// Bisection against a `1e-5` grid on 30 closed-form curves.
pub fn bisection_suite(opts: &OracleOptions) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new("bisection-vs-grid", 1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let shift = opts.fault.unwrap_or(0.0);
    for (m, model) in suite_models(&mut rng)?.iter().enumerate() {
        for (k, kind) in DisparityKind::ALL.into_iter().enumerate() {
            let exact = model.disparity_curve(kind);
            let d0 = exact.eval(0.0)?.abs();
            let delta = d0 * [0.0, 0.3, 0.6][(m + k) % 3];
            let domain = kind.domain(model.stats());
            let perturbed = |t: f64| -> fairbayes_core::Result<f64> {
                let h = model.thresholds(kind, t)?;
                Ok(model.disparity_at(kind, [h[0] + shift, h[1] + shift]))
            };
            let solved = solve_threshold(&mut TryFnCurve::new(domain.0, domain.1, perturbed), delta, DEFAULT_TOL)?;
            let grid = grid_threshold(|t| exact.eval(t).map_err(Into::into), domain, delta, 1e-5)?;
            let residual = grid.map_or(f64::INFINITY, |g| (solved.t_star - g).abs());
            suite.record(|| format!("model {m}, {kind}, delta {delta:.4}"), residual);
        }
    }
    Ok(suite)
}

/// Minimum-risk equalized-odds offsets on a grid: a coarse pass, then a
/// fine pass around the coarse optimum. Returns `(t1, t2, risk)`.
pub fn eqodds_grid_oracle<G: GroupScoreDistribution + ?Sized>(
    dist: &G,
    stats: &GroupStats,
    delta: f64,
    coarse: f64,
    fine: f64,
) -> Result<(f64, f64, f64)> {
    let (d1, d2) = eqodds_domain(stats);
    let (b1, b2) = (search_bracket(d1), search_bracket(d2));
    let scan = |r1: (f64, f64), r2: (f64, f64), step: f64| -> Result<Option<(f64, f64, f64)>> {
        let mut best: Option<(f64, f64, f64)> = None;
        let n1 = ((r1.1 - r1.0) / step).floor() as i64;
        let n2 = ((r2.1 - r2.0) / step).floor() as i64;
        for i in 0..=n1 {
            let t1 = r1.0 + i as f64 * step;
            for j in 0..=n2 {
                let t2 = r2.0 + j as f64 * step;
                let (a, b) = eqodds_disparities(dist, stats, t1, t2)?;
                if a.abs().max(b.abs()) > delta {
                    continue;
                }
                let r = eqodds_risk(dist, stats, t1, t2)?;
                if best.is_none_or(|(_, _, br)| r < br) {
                    best = Some((t1, t2, r));
                }
            }
        }
        Ok(best)
    };
    let (c1, c2, _) = scan(b1, b2, coarse)?
        .ok_or_else(|| fairbayes_core::FairError::Infeasible("no grid point meets the constraint".into()))?;
    let radius = 2.0 * coarse;
    let r1 = ((c1 - radius).max(b1.0), (c1 + radius).min(b1.1));
    let r2 = ((c2 - radius).max(b2.0), (c2 + radius).min(b2.1));
    Ok(scan(r1, r2, fine)?.expect("coarse optimum lies in the fine window"))
}

/// `solve_eqodds` on the built-in model at `δ ∈ {0.05, 0.1}`: both
/// disparities within `δ + 1e-4` and risk within `1e-4` of the grid optimum.
pub fn eqodds_suite(opts: &OracleOptions) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new("eqodds-vs-grid", 1e-4);
    let model = ModelFile::synthetic().to_model()?;
    let stats = *model.stats();
    for delta in [0.05, 0.1] {
        let sol = solve_eqodds(&model, &stats, delta, DEFAULT_TOL * 1e-3)?;
        let (t1, t2) = match opts.fault {
            Some(eps) => (sol.t1 + eps, sol.t2 + eps),
            None => (sol.t1, sol.t2),
        };
        let (a, b) = eqodds_disparities(&model, &stats, t1, t2)?;
        let risk = eqodds_risk(&model, &stats, t1, t2)?;
        let (_, _, grid_risk) = eqodds_grid_oracle(&model, &stats, delta, 1e-3, 1e-5)?;
        let residual = (a.abs().max(b.abs()) - delta).max((risk - grid_risk).abs());
        suite.record(|| format!("synthetic model, delta {delta}"), residual);
    }
    Ok(suite)
}

pub fn run_all(opts: &OracleOptions) -> Result<Vec<SuiteResult>> {
    Ok(vec![discrete_suite(opts)?, bisection_suite(opts)?, eqodds_suite(opts)?])
}
