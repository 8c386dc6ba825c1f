//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fairbayes::experiment::{cmd_multiclass, cmd_synthetic, MulticlassSpec, SyntheticSpec};
use fairbayes::model_file::ModelFile;
use fairbayes::oracle::{bisection_suite, discrete_suite, eqodds_suite, random_instance, OracleOptions, SuiteResult};
use fairbayes_core::algorithms::{cell_costs, fuds_proportions, FairFitConfig, FairPipeline, Method, Mode};
use fairbayes_core::discrete::{cost_sensitive_risk, dmin_dmax, FiniteDistribution, RandomizedClassifier};
use fairbayes_core::disparity::threshold;
use fairbayes_core::estimators::{LogisticObjective, Standardizer};
use fairbayes_core::extensions::{eqodds_disparities, eqodds_domain};
use fairbayes_core::solver::{check_tradeoff_bounds, trace_pareto};
use fairbayes_core::{DisparityCurve, DisparityKind, GaussianModel, GroupStats, LabeledDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn model() -> GaussianModel {
    ModelFile::synthetic().to_model().unwrap()
}

fn suite_outcome(s: &SuiteResult, elapsed: Duration, budget: Duration) -> Outcome {
    let detail = format!(
        "{} instances, {} failures, worst residual {:.2e} (tol {:.0e}), {:.1}s",
        s.instances,
        s.failures.len(),
        s.worst_residual,
        s.tolerance,
        elapsed.as_secs_f64()
    );
    check(s.passed() && elapsed <= budget, detail)
}

/// Criteria 1 and 2 from one 20-repeat run.
fn synthetic_run() -> (Outcome, Outcome) {
    let start = Instant::now();
    let report = match cmd_synthetic(&ModelFile::synthetic(), &SyntheticSpec::default(), true) {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst_band = (0.0f64, String::new());
    let mut worst_acc = (f64::INFINITY, String::new());
    for row in &report.rows {
        let label = format!("{} {} δ={}", row.method, row.kind, row.delta);
        let off = (row.disparity_abs_mean - row.delta).abs();
        if off >= worst_band.0 {
            worst_band = (off, label.clone());
        }
        let margin = row.accuracy_mean - row.theoretical_accuracy;
        if margin < worst_acc.0 {
            worst_acc = (margin, label);
        }
    }
    let rows = report.rows.len();
    let band = check(
        rows == 36 && worst_band.0 <= 0.03 && elapsed <= 300.0,
        format!("{rows} cells, worst |mean|D| - δ| = {:.4} at {} (tol 0.03), {elapsed:.0}s", worst_band.0, worst_band.1),
    );
    let acc = check(
        rows == 36 && worst_acc.0 >= -0.015,
        format!("worst accuracy - theory = {:+.4} at {} (tol -0.015)", worst_acc.0, worst_acc.1),
    );
    (band, acc)
}

fn discrete_exact() -> Outcome {
    let start = Instant::now();
    match discrete_suite(&OracleOptions::default()) {
        Ok(s) => suite_outcome(&s, start.elapsed(), Duration::from_secs(30)),
        Err(e) => Err(e.to_string()),
    }
}

fn bisection() -> Outcome {
    let start = Instant::now();
    match bisection_suite(&OracleOptions::default()) {
        Ok(s) => suite_outcome(&s, start.elapsed(), Duration::from_secs(300)),
        Err(e) => Err(e.to_string()),
    }
}

fn eqodds() -> Outcome {
    let start = Instant::now();
    match eqodds_suite(&OracleOptions::default()) {
        Ok(s) => suite_outcome(&s, start.elapsed(), Duration::from_secs(300)),
        Err(e) => Err(e.to_string()),
    }
}

/// Closed-form `D` and `R` against 10⁶ samples scored with the true `η`.
fn monte_carlo() -> Outcome {
    const N: usize = 1_000_000;
    let m = model();
    let data = m.sample(N, 2024).map_err(|e| e.to_string())?;
    let eta: Vec<f64> = (0..N).map(|i| m.eta(data.groups()[i], data.row(i))).collect();
    let mut worst = 0.0f64;
    let mut points = 0;
    for kind in DisparityKind::ALL {
        let (lo, hi) = kind.domain(m.stats());
        for k in 0..10 {
            let t = lo + (hi - lo) * (k as f64 + 0.5) / 10.0;
            let h = m.thresholds(kind, t).map_err(|e| e.to_string())?;
            let d = m.disparity_curve(kind).disparity(t).map_err(|e| e.to_string())?;
            let r = m.risk(kind, t).map_err(|e| e.to_string())?;
            let mut hits = [0usize; 2];
            let mut total = [0usize; 2];
            let mut errors = 0usize;
            for (i, &e) in eta.iter().enumerate() {
                let (a, y) = (data.groups()[i] as usize, data.labels()[i]);
                let accept = e > h[a];
                errors += (accept != (y == 1)) as usize;
                let counted = match kind {
                    DisparityKind::DemographicParity => true,
                    DisparityKind::EqualOpportunity => y == 1,
                    DisparityKind::PredictiveEquality => y == 0,
                };
                if counted {
                    total[a] += 1;
                    hits[a] += accept as usize;
                }
            }
            let rate = |a: usize| hits[a] as f64 / total[a] as f64;
            let se_d = (0..2).map(|a| rate(a) * (1.0 - rate(a)) / total[a] as f64).sum::<f64>().sqrt();
            let se_r = (r * (1.0 - r) / N as f64).sqrt();
            let emp_r = errors as f64 / N as f64;
            worst = worst.max(((rate(1) - rate(0)) - d).abs() / se_d).max((emp_r - r).abs() / se_r);
            points += 1;
        }
    }
    check(worst <= 3.0, format!("{points} points, worst deviation {worst:.2} SE (tol 3)"))
}

/// Risk frontier convex and within the tradeoff bounds for every kind.
fn frontier_shape() -> Outcome {
    let m = model();
    let mut worst_curv = f64::INFINITY;
    let mut worst_bound = 0.0f64;
    for kind in DisparityKind::ALL {
        let d0 = m.disparity_curve(kind).disparity(0.0).map_err(|e| e.to_string())?.abs();
        let deltas: Vec<f64> = (0..20).map(|i| d0 * i as f64 / 19.0).collect();
        let rows = trace_pareto(&mut m.disparity_curve(kind), |t| m.risk(kind, t), &deltas, 1e-12).map_err(|e| e.to_string())?;
        for w in rows.windows(3) {
            worst_curv = worst_curv.min(w[0].risk - 2.0 * w[1].risk + w[2].risk);
        }
        let c = check_tradeoff_bounds(&rows);
        worst_bound = worst_bound.max(c.worst_violation);
        if !c.holds {
            return Err(format!("{kind}: tradeoff bound violated by {:.2e} at pair {:?}", c.worst_violation, c.worst_pair));
        }
    }
    check(
        worst_curv >= -1e-8 && worst_bound <= 1e-6,
        format!("3 × 20 levels, min second difference {worst_curv:.2e} (tol -1e-8), worst bound violation {worst_bound:.2e} (tol 1e-6)"),
    )
}

fn atom_cases(seed: u64) -> impl Iterator<Item = (FiniteDistribution, GroupStats, DisparityKind, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..50).map(move |i| {
        let d = random_instance(&mut rng, 8);
        let s = GroupStats::new(d.cell_masses()).unwrap();
        let kind = DisparityKind::ALL[i % 3];
        let (lo, hi) = kind.domain(&s);
        let t = rng.random_range(0.95 * lo..0.95 * hi);
        (d, s, kind, t)
    })
}

/// The Bayes rule after FUDS reweighting is `η_a > H_a(t)` on every atom.
fn fuds_theorem() -> Outcome {
    let mut atoms = 0;
    for (d, s, kind, t) in atom_cases(71) {
        let p = fuds_proportions(&s, kind, Mode::Aware, t).map_err(|e| e.to_string())?;
        for at in d.atoms() {
            let a = at.group;
            let h = threshold(kind, &s, a, t).map_err(|e| e.to_string())?;
            if (at.eta - h).abs() < 1e-9 {
                continue;
            }
            let pos = at.mass * at.eta * p[a as usize][1] / s.cell(a, 1);
            let neg = at.mass * (1.0 - at.eta) * p[a as usize][0] / s.cell(a, 0);
            if (pos / (pos + neg) > 0.5) != (at.eta > h) {
                return Err(format!("{kind} t={t}: atom {at:?} disagrees"));
            }
            atoms += 1;
        }
    }
    Ok(format!("50 distributions, {atoms} atoms agree"))
}

/// The FCSC cost-sensitive minimizer is `η_a > H_a(t)` on every atom.
fn fcsc_theorem() -> Outcome {
    let mut atoms = 0;
    for (d, s, kind, t) in atom_cases(72) {
        let costs = cell_costs(kind, Mode::Aware, &s, t).map_err(|e| e.to_string())?;
        let none = RandomizedClassifier { accept: vec![0.0; d.len()] };
        let base = cost_sensitive_risk(&d, &costs, &none);
        for (i, at) in d.atoms().iter().enumerate() {
            let h = threshold(kind, &s, at.group, t).map_err(|e| e.to_string())?;
            if (at.eta - h).abs() < 1e-9 {
                continue;
            }
            let mut only = none.clone();
            only.accept[i] = 1.0;
            if (cost_sensitive_risk(&d, &costs, &only) < base) != (at.eta > h) {
                return Err(format!("{kind} t={t}: atom {at:?} disagrees"));
            }
            atoms += 1;
        }
    }
    Ok(format!("50 distributions, {atoms} atoms agree"))
}

fn multiclass() -> Outcome {
    let report = cmd_multiclass(&MulticlassSpec { groups: 3, dim: 5, sigma: 1.0, seed: 0 }).map_err(|e| e.to_string())?;
    let acc: Vec<f64> = report.groups.iter().map(|g| g.acceptance).collect();
    let range = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - acc.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        report.groups.len() == 3 && range < 1e-6 && report.offset_sum.abs() <= 1e-10,
        format!("acceptance range {range:.2e} (tol 1e-6), offset sum {:.2e} (tol 1e-10)", report.offset_sum),
    )
}

/// Every disparity curve is non-increasing on sampled grids, and the
/// closed-form risk is non-decreasing in `|t|`.
fn monotonicity() -> Outcome {
    let m = model();
    let mut curves = 0;
    for kind in DisparityKind::ALL {
        let (lo, hi) = kind.domain(m.stats());
        let grid: Vec<f64> = (0..=200).map(|k| if k == 200 { hi } else { lo + (hi - lo) * k as f64 / 200.0 }).collect();
        let mut curve = m.disparity_curve(kind);
        let d: Vec<f64> = grid.iter().map(|&t| curve.disparity(t)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        if let Some(i) = (1..d.len()).find(|&i| d[i] > d[i - 1]) {
            return Err(format!("closed-form {kind} rises at t={}", grid[i]));
        }
        let r: Vec<f64> = grid.iter().map(|&t| m.risk(kind, t)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        for i in 1..grid.len() {
            let outward = if grid[i] > 0.0 { r[i] - r[i - 1] } else { r[i - 1] - r[i] };
            let same_side = grid[i - 1] >= 0.0 || grid[i] <= 0.0;
            if same_side && outward < -1e-15 {
                return Err(format!("closed-form {kind} risk falls away from 0 at t={}", grid[i]));
            }
        }
        curves += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(73);
    for inst in 0..50 {
        let dist = random_instance(&mut rng, 6);
        let cells = dist.cell_masses();
        let s = GroupStats::new(cells).unwrap();
        for kind in DisparityKind::ALL {
            let (lo, hi) = kind.domain(&s);
            let mut prev = f64::INFINITY;
            for k in 0..=100 {
                let t = lo + (hi - lo) * k as f64 / 100.0;
                let (dmin, dmax) = dmin_dmax(&dist, kind, &cells, &t).map_err(|e| e.to_string())?;
                if dmin > dmax || dmax > prev {
                    return Err(format!("step curve {kind} of instance {inst} rises at t={t}"));
                }
                prev = dmin;
            }
            curves += 1;
        }
    }

    let stats = *m.stats();
    let ((lo1, hi1), (lo2, hi2)) = eqodds_domain(&stats);
    let n = 15;
    let at = |i: usize, lo: f64, hi: f64| 0.95 * (lo + (hi - lo) * i as f64 / (n - 1) as f64);
    for i in 0..n {
        for j in 0..n {
            let here = eqodds_disparities(&m, &stats, at(i, lo1, hi1), at(j, lo2, hi2)).map_err(|e| e.to_string())?;
            for (di, dj) in [(1, 0), (0, 1)] {
                if i + di < n && j + dj < n {
                    let next = eqodds_disparities(&m, &stats, at(i + di, lo1, hi1), at(j + dj, lo2, hi2)).map_err(|e| e.to_string())?;
                    if next.0 > here.0 || next.1 > here.1 {
                        return Err(format!("equalized-odds gaps rise at lattice ({i}, {j})"));
                    }
                }
            }
        }
    }
    curves += 2;

    let train = m.sample(10_000, 74).map_err(|e| e.to_string())?;
    for kind in DisparityKind::ALL {
        let mut p = FairPipeline::new(Method::Fpir, &train, FairFitConfig::new(kind, 0.0)).map_err(|e| e.to_string())?;
        let (lo, hi) = p.domain();
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let t = 0.99 * (lo + (hi - lo) * k as f64 / 100.0);
            let d = p.disparity(t).map_err(|e| e.to_string())?;
            if d > prev {
                return Err(format!("plug-in {kind} rises at t={t}"));
            }
            prev = d;
        }
        curves += 1;
    }
    Ok(format!("{curves} curves non-increasing, closed-form risk non-decreasing in |t|"))
}

/// Logistic gradient against central differences at 100 random points.
fn gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let mut data = LabeledDataset::new(3);
    for _ in 0..400 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z = 0.3 + x[0] - 2.0 * x[1] + 0.5 * x[2];
        let y = (rng.random::<f64>() < 1.0 / (1.0 + (-z).exp())) as u8;
        data.push(&x, rng.random_range(0..2u8), y).unwrap();
    }
    let weights: Vec<f64> = (0..data.len()).map(|_| rng.random_range(0.1..3.0)).collect();
    data.set_weights(weights).unwrap();
    let st = Standardizer::fit(&data);
    let obj = LogisticObjective::new(&data, &st, 0.05).map_err(|e| e.to_string())?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let grad = obj.gradient(&params);
        let mut err = 0.0;
        for j in 0..params.len() {
            let (mut up, mut down) = (params.clone(), params.clone());
            up[j] += h;
            down[j] -= h;
            err += ((obj.loss(&up) - obj.loss(&down)) / (2.0 * h) - grad[j]).powi(2);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        worst = worst.max(err.sqrt() / norm);
    }
    check(worst <= 1e-5, format!("100 points, worst relative error {worst:.2e} (tol 1e-5)"))
}

fn main() -> ExitCode {
    let (c1, c2) = synthetic_run();
    let results: Vec<(&str, Outcome)> = vec![
        ("synthetic disparity within δ ± 0.03", c1),
        ("synthetic accuracy within 0.015 of theory", c2),
        ("discrete solver equals exhaustive oracle", discrete_exact()),
        ("bisection agrees with 1e-5 grid", bisection()),
        ("closed-form D and R match Monte Carlo", monte_carlo()),
        ("frontier convex and within tradeoff bounds", frontier_shape()),
        ("FUDS reweighting gives the fair rule", fuds_theorem()),
        ("FCSC costs give the fair rule", fcsc_theorem()),
        ("equalized odds agrees with grid search", eqodds()),
        ("multiclass demographic parity", multiclass()),
        ("disparity curves monotone", monotonicity()),
        ("logistic gradient matches finite differences", gradient()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {:>2} {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
