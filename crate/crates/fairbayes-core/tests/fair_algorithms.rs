use approx::assert_abs_diff_eq;
use fairbayes_core::algorithms::{
    cell_costs, evaluate_decisions, fuds_proportions, fuds_resample, target_counts, FairFitConfig, FairPipeline,
    Method, Mode,
};
use fairbayes_core::discrete::{cost_sensitive_risk, Atom, FiniteDistribution, RandomizedClassifier};
use fairbayes_core::disparity::threshold;
use fairbayes_core::estimators::{fit_group_models, FitMode, LogisticConfig, LogisticModel, ProbModel, Standardizer};
use fairbayes_core::{DisparityCurve, DisparityKind, FairError, GaussianModel, GroupStats, LabeledDataset, DEFAULT_TOL};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use DisparityKind::{DemographicParity as DD, EqualOpportunity as DO, PredictiveEquality as PD};

fn stats() -> GroupStats {
    GroupStats::new([[0.18, 0.12], [0.21, 0.49]]).unwrap()
}

fn gaussian() -> GaussianModel {
    GaussianModel::with_uniform_means(stats(), 10, 1.0, 316).unwrap()
}

fn split(seed: u64) -> (LabeledDataset, LabeledDataset) {
    let g = gaussian();
    (g.sample(10_000, 2 * seed).unwrap(), g.sample(5_000, 2 * seed + 1).unwrap())
}

fn group_mass(s: &GroupStats, a: u8) -> f64 {
    s.cell(a, 0) + s.cell(a, 1)
}

#[test]
fn fuds_proportions_dd_example() {
    let p = fuds_proportions(&stats(), DD, Mode::Aware, 0.14).unwrap();
    assert_abs_diff_eq!(p[1][1], 0.42609, epsilon = 1e-5);
    assert_abs_diff_eq!(p[1][0], 0.27391, epsilon = 1e-5);
    assert_abs_diff_eq!(p[0][1], 0.19412, epsilon = 1e-5);
    assert_abs_diff_eq!(p[0][0], 0.10588, epsilon = 1e-5);
}

#[test]
fn fuds_proportions_identity_at_zero() {
    let s = stats();
    for kind in DisparityKind::ALL {
        for mode in [Mode::Aware, Mode::Blind] {
            let p = fuds_proportions(&s, kind, mode, 0.0).unwrap();
            for a in 0..2u8 {
                for y in 0..2u8 {
                    assert_abs_diff_eq!(p[a as usize][y as usize], s.cell(a, y), epsilon = 1e-15);
                }
            }
        }
    }
}

#[test]
fn blind_dd_proportions() {
    let s = stats();
    let t = 0.1;
    let p = fuds_proportions(&s, DD, Mode::Blind, t).unwrap();
    let raw = |a: u8, y: u8| {
        let sg = if a == 1 { 1.0 } else { -1.0 };
        let sy = if y == 1 { -1.0 } else { 1.0 };
        s.cell(a, y) * (1.0 + sg * sy * t / group_mass(&s, a))
    };
    let total: f64 = (0..2).flat_map(|a| (0..2).map(move |y| (a, y))).map(|(a, y)| raw(a, y)).sum();
    for a in 0..2u8 {
        for y in 0..2u8 {
            assert_abs_diff_eq!(p[a as usize][y as usize], raw(a, y) / total, epsilon = 1e-15);
        }
    }
}

fn stats_strategy() -> impl Strategy<Value = GroupStats> {
    prop::array::uniform4(0.02f64..1.0).prop_map(|r| {
        let s: f64 = r.iter().sum();
        GroupStats::new([[r[0] / s, r[1] / s], [r[2] / s, r[3] / s]]).unwrap()
    })
}

proptest! {
    #[test]
    fn fuds_proportions_preserve_marginals(s in stats_strategy(), k in 0usize..3, u in 0.0f64..1.0) {
        let kind = DisparityKind::ALL[k];
        let (lo, hi) = kind.domain(&s);
        let t = lo + (hi - lo) * u;
        let p = fuds_proportions(&s, kind, Mode::Aware, t).unwrap();
        let total: f64 = p.iter().flatten().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for a in 0..2u8 {
            let row = p[a as usize];
            prop_assert!((row[0] + row[1] - group_mass(&s, a)).abs() <= 1e-12);
            let h = threshold(kind, &s, a, t).unwrap();
            // Within-group ratio (1−H)·p_{a,1} : H·p_{a,0}.
            let lhs = row[1] * h * s.cell(a, 0);
            let rhs = row[0] * (1.0 - h) * s.cell(a, 1);
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}

fn small_data() -> LabeledDataset {
    let mut d = LabeledDataset::new(1);
    for i in 0..40 {
        d.push(&[i as f64], (i % 2) as u8, ((i / 2) % 2) as u8).unwrap();
    }
    d
}

fn multiset(d: &LabeledDataset) -> Vec<u64> {
    let mut v: Vec<u64> = (0..d.len()).map(|i| d.row(i)[0] as u64).collect();
    v.sort_unstable();
    v
}

#[test]
fn resample_exact_counts_and_reuse() {
    let data = small_data();
    let targets = [[3, 14], [7, 0]];
    let (first, state) = fuds_resample(&data, targets, 0.1, None, 5).unwrap();
    assert_eq!(first.cell_counts().unwrap(), targets);
    assert_eq!(state.counts(), targets);
    assert_eq!(state.t(), 0.1);
    let (again, _) = fuds_resample(&data, targets, 0.2, Some(state.clone()), 99).unwrap();
    assert_eq!(again, first);
    let (fresh, _) = fuds_resample(&data, targets, 0.1, None, 5).unwrap();
    assert_eq!(fresh, first);
    // Indices are drawn from the right cells.
    for &i in state.indices(0, 1) {
        assert_eq!((data.groups()[i], data.labels()[i]), (0, 1));
    }
}

#[test]
fn resample_shrink_then_regrow_is_stable() {
    let data = small_data();
    let full = [[8, 8], [8, 8]];
    let (orig, state) = fuds_resample(&data, full, 0.0, None, 1).unwrap();
    let (_, state) = fuds_resample(&data, [[2, 8], [8, 3]], 0.1, Some(state), 1).unwrap();
    let (regrown, _) = fuds_resample(&data, full, 0.0, Some(state), 1).unwrap();
    let (a, b) = (multiset(&orig), multiset(&regrown));
    let common = a.iter().filter(|v| b.contains(v)).count();
    assert!(a.len() - common <= 6 + 5);
    // Draws beyond a cell's size come with replacement.
    let (big, _) = fuds_resample(&data, [[25, 0], [0, 0]], 0.0, None, 1).unwrap();
    assert_eq!(big.len(), 25);
}

#[test]
fn resample_rejects_empty_source_cell() {
    let mut d = LabeledDataset::new(1);
    d.push(&[0.0], 0, 0).unwrap();
    d.push(&[1.0], 1, 1).unwrap();
    let err = fuds_resample(&d, [[1, 1], [0, 1]], 0.0, None, 0).unwrap_err();
    assert!(matches!(err, FairError::Estimation(_)), "{err}");
}

#[test]
fn target_counts_floor() {
    assert_eq!(target_counts(&[[0.18, 0.12], [0.21, 0.49]], 100), [[18, 12], [21, 49]]);
    assert_eq!(target_counts(&[[0.255, 0.245], [0.25, 0.25]], 10), [[2, 2], [2, 2]]);
}

/// Random finite distribution with both groups and both labels present.
fn atoms(rng: &mut impl Rng, n: usize) -> FiniteDistribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    FiniteDistribution::new(
        raw.iter()
            .enumerate()
            .map(|(i, m)| Atom {
                group: if i < 2 { i as u8 } else { rng.random_range(0..2u8) },
                mass: m / total,
                eta: rng.random_range(0.01..0.99),
            })
            .collect(),
    )
    .unwrap()
}

fn atom_stats(d: &FiniteDistribution) -> GroupStats {
    GroupStats::new(d.cell_masses()).unwrap()
}

#[test]
fn fuds_bayes_rule_is_fair_rule_on_atoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 50 {
        let d = atoms(&mut rng, 8);
        let s = atom_stats(&d);
        let kind = DisparityKind::ALL[checked % 3];
        let (lo, hi) = kind.domain(&s);
        let t = rng.random_range(0.95 * lo..0.95 * hi);
        let p = fuds_proportions(&s, kind, Mode::Aware, t).unwrap();
        for at in d.atoms() {
            let a = at.group;
            let h = threshold(kind, &s, a, t).unwrap();
            if (at.eta - h).abs() < 1e-9 {
                continue;
            }
            // Each cell is rescaled by p̃/p; the new regression function follows.
            let pos = at.mass * at.eta * p[a as usize][1] / s.cell(a, 1);
            let neg = at.mass * (1.0 - at.eta) * p[a as usize][0] / s.cell(a, 0);
            assert_eq!(pos / (pos + neg) > 0.5, at.eta > h, "{kind} t={t} atom {at:?}");
        }
        checked += 1;
    }
}

#[test]
fn fcsc_minimizer_is_fair_rule_on_atoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut checked = 0;
    while checked < 50 {
        let d = atoms(&mut rng, 8);
        let s = atom_stats(&d);
        let kind = DisparityKind::ALL[checked % 3];
        let (lo, hi) = kind.domain(&s);
        let t = rng.random_range(0.95 * lo..0.95 * hi);
        let costs = cell_costs(kind, Mode::Aware, &s, t).unwrap();
        let none = RandomizedClassifier { accept: vec![0.0; d.len()] };
        let base = cost_sensitive_risk(&d, &costs, &none);
        for (i, at) in d.atoms().iter().enumerate() {
            let h = threshold(kind, &s, at.group, t).unwrap();
            if (at.eta - h).abs() < 1e-9 {
                continue;
            }
            // The risk separates over atoms, so flipping one atom decides it.
            let mut only = none.clone();
            only.accept[i] = 1.0;
            let accept_better = cost_sensitive_risk(&d, &costs, &only) < base;
            assert_eq!(accept_better, at.eta > h, "{kind} t={t} atom {at:?}");
        }
        checked += 1;
    }
}

fn fixture8() -> (LabeledDataset, Vec<f64>) {
    // (group, label, decision)
    let rows = [(1, 1, 1.0), (1, 1, 0.5), (1, 0, 0.0), (1, 0, 1.0), (0, 1, 1.0), (0, 1, 0.0), (0, 0, 0.25), (0, 0, 0.0)];
    let mut d = LabeledDataset::new(1);
    let mut f = Vec::new();
    for (i, &(a, y, v)) in rows.iter().enumerate() {
        d.push(&[i as f64], a, y).unwrap();
        f.push(v);
    }
    (d, f)
}

#[test]
fn evaluate_examples() {
    let (d, f) = fixture8();
    let m = evaluate_decisions(&f, &d).unwrap();
    // Group 1 accepts 2.5 of 4, group 0 accepts 1.25 of 4.
    assert_eq!(m.demographic_parity, Some(2.5 / 4.0 - 1.25 / 4.0));
    assert_eq!(m.equal_opportunity, Some(1.5 / 2.0 - 1.0 / 2.0));
    assert_eq!(m.predictive_equality, Some(1.0 / 2.0 - 0.25 / 2.0));
    // Correct mass: 1 + 0.5 + 1 + 0 + 1 + 0 + 0.75 + 1.
    assert_eq!(m.accuracy, 5.25 / 8.0);

    let ones = evaluate_decisions(&[1.0; 8], &d).unwrap();
    assert_eq!(ones.accuracy, 0.5);
    for kind in DisparityKind::ALL {
        assert_eq!(ones.disparity(kind), Some(0.0));
    }
    let by_group: Vec<f64> = d.groups().iter().map(|&a| f64::from(a)).collect();
    assert_eq!(evaluate_decisions(&by_group, &d).unwrap().demographic_parity, Some(1.0));
}

#[test]
fn evaluate_reports_undefined_rates() {
    let mut d = LabeledDataset::new(1);
    d.push(&[0.0], 1, 1).unwrap();
    d.push(&[0.0], 1, 0).unwrap();
    d.push(&[0.0], 0, 0).unwrap();
    let m = evaluate_decisions(&[1.0, 0.0, 1.0], &d).unwrap();
    assert_eq!(m.equal_opportunity, None);
    assert_eq!(m.predictive_equality, Some(-1.0));
    assert!(evaluate_decisions(&[1.0], &d).is_err());
}

/// The exact regression function of a Gaussian group as a logistic model.
fn true_eta_model(g: &GaussianModel) -> ProbModel {
    let groups = (0..2u8)
        .map(|a| {
            let gg = g.group(a);
            let s2 = gg.sigma * gg.sigma;
            let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
            let intercept = (gg.p1 / gg.p0).ln() - (sq(&gg.mean1) - sq(&gg.mean0)) / (2.0 * s2);
            let coef = gg.mean1.iter().zip(&gg.mean0).map(|(m1, m0)| (m1 - m0) / s2).collect();
            let d = gg.dim();
            LogisticModel {
                standardizer: Standardizer { mean: vec![0.0; d], scale: vec![1.0; d] },
                intercept,
                coef,
                epochs_run: 0,
            }
        })
        .collect();
    ProbModel::GroupAware { groups }
}

#[test]
fn fpir_with_true_eta_finds_closed_form_offset() {
    let g = gaussian();
    // Plug-in noise in the equal-opportunity weights η/p̂_{a,1} is about
    // 1e-3 in t at 10⁶ rows, so four times as many are drawn.
    let data = g.sample(4_000_000, 21).unwrap();
    let model = true_eta_model(&g);
    for i in 0..100 {
        let a = data.groups()[i];
        assert_abs_diff_eq!(model.group_proba(data.row(i), a).unwrap(), g.eta(a, data.row(i)), epsilon = 1e-12);
    }
    for kind in DisparityKind::ALL {
        let delta = 0.1;
        let exact = g.fair_classifier(kind, delta, 1e-10).unwrap().t;
        let config = FairFitConfig { tol: 1e-7, ..FairFitConfig::new(kind, delta) };
        let (_, report) = FairPipeline::with_model(&data, model.clone(), config).unwrap().solve(delta).unwrap();
        assert!((report.t_hat - exact).abs() <= 1e-3, "{kind}: {} vs {exact}", report.t_hat);
    }
}

#[test]
fn loose_level_returns_unconstrained_rule() {
    let (train, _) = split(1);
    for method in Method::ALL {
        let mut p = FairPipeline::new(method, &train, FairFitConfig::new(DD, 1.0)).unwrap();
        let (_, report) = p.solve(1.0).unwrap();
        assert_eq!(report.t_hat, 0.0);
        assert_eq!(report.evaluations, 1);
        if method == Method::Fpir {
            assert_eq!(report.group_thresholds, Some([0.5, 0.5]));
        }
    }
}

#[test]
fn fcsc_at_zero_matches_plain_fit() {
    let (train, _) = split(2);
    let mut p = FairPipeline::new(Method::Fcsc, &train, FairFitConfig::new(DD, 0.0)).unwrap();
    let fair = p.classifier_at(0.0).unwrap();
    let plain = fit_group_models(&train, FitMode::GroupAware, &LogisticConfig::default()).unwrap();
    let (ProbModel::GroupAware { groups: a }, ProbModel::GroupAware { groups: b }) = (&fair.model, &plain) else {
        panic!("expected group-aware models");
    };
    for (x, y) in a.iter().zip(b) {
        assert_abs_diff_eq!(x.intercept, y.intercept, epsilon = 1e-8);
        for (u, v) in x.coef.iter().zip(&y.coef) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-8);
        }
    }
}

fn test_metrics(method: Method, kind: DisparityKind, delta: f64, seed: u64) -> (f64, f64) {
    let (train, test) = split(seed);
    let (clf, _) = FairPipeline::new(method, &train, FairFitConfig::new(kind, delta)).unwrap().solve(delta).unwrap();
    let m = evaluate_decisions(&clf.decisions(&test).unwrap(), &test).unwrap();
    (m.disparity(kind).unwrap(), m.accuracy)
}

#[test]
fn fuds_dd_tracks_theory() {
    let g = gaussian();
    let (dis, acc) = test_metrics(Method::Fuds, DD, 0.1, 3);
    let theory = 1.0 - g.fair_classifier(DD, 0.1, 1e-10).unwrap().risk;
    assert!((dis.abs() - 0.1).abs() <= 0.03, "disparity {dis}");
    assert!((acc - theory).abs() <= 0.01, "accuracy {acc} vs {theory}");
}

#[test]
fn fpir_do_tracks_level() {
    let (dis, _) = test_metrics(Method::Fpir, DO, 0.2, 4);
    assert!((dis.abs() - 0.2).abs() <= 0.05, "disparity {dis}");
}

#[test]
fn fcsc_tracks_each_level() {
    for delta in [0.0, 0.1, 0.2, 0.3] {
        let (dis, _) = test_metrics(Method::Fcsc, DD, delta, 5);
        assert!((dis.abs() - delta).abs() <= 0.03, "δ={delta}: disparity {dis}");
    }
}

#[test]
fn methods_agree_on_accuracy() {
    for kind in DisparityKind::ALL {
        for delta in [0.0, 0.1, 0.2, 0.3] {
            let accs: Vec<f64> = Method::ALL.iter().map(|&m| test_metrics(m, kind, delta, 6).1).collect();
            let spread = accs.iter().cloned().fold(f64::MIN, f64::max) - accs.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 0.01, "{kind} δ={delta}: accuracies {accs:?}");
        }
    }
}

#[test]
fn train_disparity_within_band() {
    let (train, _) = split(7);
    for method in Method::ALL {
        for kind in [DD, PD] {
            for delta in [0.0, 0.15] {
                let (_, r) = FairPipeline::new(method, &train, FairFitConfig::new(kind, delta)).unwrap().solve(delta).unwrap();
                assert!(
                    r.train_disparity.abs() <= delta + 2.0 * r.step_at_exit,
                    "{method} {kind} δ={delta}: {} (step {})",
                    r.train_disparity,
                    r.step_at_exit
                );
            }
        }
    }
}

/// Group-conditional acceptance rates of `decisions` for `kind`, with row counts.
fn group_rates(kind: DisparityKind, data: &LabeledDataset, decisions: &[f64]) -> [(f64, f64); 2] {
    let mut out = [(0.0, 0.0); 2];
    for (i, &f) in decisions.iter().enumerate() {
        let (a, y) = (data.groups()[i] as usize, data.labels()[i]);
        let counted = match kind {
            DD => true,
            DO => y == 1,
            PD => y == 0,
        };
        if counted {
            out[a].0 += f;
            out[a].1 += 1.0;
        }
    }
    out.map(|(s, n)| (s / n, n))
}

#[test]
fn empirical_curves_are_monotone() {
    let (train, _) = split(8);
    for method in Method::ALL {
        for kind in DisparityKind::ALL {
            let mut p = FairPipeline::new(method, &train, FairFitConfig::new(kind, 0.0)).unwrap();
            let (lo, hi) = p.domain();
            let mut prev: Option<f64> = None;
            for k in 0..10 {
                let t = 0.9 * (lo + (hi - lo) * (k as f64 + 0.5) / 10.0);
                let d = p.disparity(t).unwrap();
                let rates = group_rates(kind, &train, &p.classifier_at(t).unwrap().decisions(&train).unwrap());
                let se = rates.iter().map(|(r, n)| r * (1.0 - r) / n).sum::<f64>().sqrt();
                if let Some(prev) = prev {
                    assert!(d <= prev + se, "{method} {kind} t={t}: {d} after {prev} (se {se})");
                }
                prev = Some(d);
            }
        }
    }
}

#[test]
fn blind_refits_cut_disparity() {
    let (train, test) = split(9);
    for method in [Method::Fuds, Method::Fcsc] {
        let run = |delta: f64| {
            let config = FairFitConfig { mode: Mode::Blind, ..FairFitConfig::new(DD, delta) };
            let (clf, _) = FairPipeline::new(method, &train, config).unwrap().solve(delta).unwrap();
            evaluate_decisions(&clf.decisions(&test).unwrap(), &test).unwrap().demographic_parity.unwrap()
        };
        let (free, fair) = (run(10.0), run(0.0));
        assert!(fair.abs() <= 0.2 * free.abs(), "{method}: {fair} vs unconstrained {free}");
    }
}

#[test]
fn pipelines_are_deterministic() {
    let (train, _) = split(10);
    for method in Method::ALL {
        let run = || FairPipeline::new(method, &train, FairFitConfig::new(PD, 0.05)).unwrap().solve(0.05).unwrap();
        assert_eq!(run(), run());
    }
}

#[test]
fn rejects_bad_config() {
    let (train, _) = split(11);
    assert!(FairPipeline::new(Method::Fpir, &train, FairFitConfig::new(DD, -0.1)).is_err());
    let config = FairFitConfig { tol: 0.0, ..FairFitConfig::new(DD, 0.1) };
    assert!(FairPipeline::new(Method::Fuds, &train, config).is_err());
    assert_eq!(FairFitConfig::new(DD, 0.1).tol, DEFAULT_TOL);
}
