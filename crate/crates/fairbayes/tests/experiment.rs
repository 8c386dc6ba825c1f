use std::collections::HashSet;

use approx::assert_abs_diff_eq;
use fairbayes::experiment::{
    closed_form_frontier, cmd_fit, cmd_multiclass, cmd_synthetic, derive_seed, empirical_frontier, even_grid, parse_grid, write_frontier,
    FitSpec, FrontierRecord, MulticlassSpec, SyntheticSpec,
};
use fairbayes::model_file::{ModelFile, SYNTHETIC_MEAN_SEED};
use fairbayes_core::algorithms::Method;
use fairbayes_core::solver::trace_pareto;
use fairbayes_core::{DisparityKind, DEFAULT_TOL};

#[test]
fn grid_parsing() {
    assert_eq!(parse_grid("0,0.1, 0.25").unwrap(), [0.0, 0.1, 0.25]);
    assert_eq!(parse_grid("0.3").unwrap(), [0.3]);
    assert_eq!(parse_grid("0.1,0.1").unwrap(), [0.1, 0.1]);
    for bad in ["", "0.2,0.1", "-0.1", "0,x", "0,NaN", "0,,1"] {
        assert!(parse_grid(bad).is_err(), "{bad:?}");
    }
}

#[test]
fn even_grids() {
    assert!(even_grid(0, 1.0).is_empty());
    assert_eq!(even_grid(1, 1.0), [0.0]);
    assert_eq!(even_grid(5, 0.4), [0.0, 0.1, 0.2, 0.30000000000000004, 0.4]);
    let g = even_grid(20, 0.37);
    assert_eq!(g.len(), 20);
    assert_eq!(g[19], 0.37);
}

#[test]
fn derived_seeds_are_distinct_and_stable() {
    let seeds: HashSet<u64> = (0..10_000).map(|i| derive_seed(7, i)).collect();
    assert_eq!(seeds.len(), 10_000);
    assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
}

#[test]
fn closed_form_frontier_matches_trace() {
    let model = ModelFile::synthetic().to_model().unwrap();
    let deltas = even_grid(20, 0.4);
    for kind in DisparityKind::ALL {
        let rows = closed_form_frontier(&model, kind, &deltas, DEFAULT_TOL).unwrap();
        let trace = trace_pareto(&mut model.disparity_curve(kind), |t| model.risk(kind, t), &deltas, DEFAULT_TOL).unwrap();
        assert_eq!(rows.len(), trace.len());
        for (r, p) in rows.iter().zip(&trace) {
            assert_eq!(r.delta, p.delta);
            assert_eq!(r.t, p.t);
            assert_eq!(r.accuracy, 1.0 - p.risk);
            let own = match kind {
                DisparityKind::DemographicParity => r.dd,
                DisparityKind::EqualOpportunity => r.do_,
                DisparityKind::PredictiveEquality => r.pd,
            };
            assert_abs_diff_eq!(own.unwrap(), p.disparity, epsilon = 1e-12);
        }
    }
}

#[test]
fn frontier_csv_layout() {
    let mut buf = Vec::new();
    write_frontier(&mut buf, &[]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "delta,t,accuracy,dd,do,pd\n");

    let row = FrontierRecord { delta: 0.1, t: -0.5, accuracy: 0.75, dd: Some(0.1), do_: None, pd: Some(-0.2) };
    let mut buf = Vec::new();
    write_frontier(&mut buf, &[row]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "delta,t,accuracy,dd,do,pd\n0.1,-0.5,0.75,0.1,,-0.2\n");
}

fn gaussian_data(n: usize, seed: u64) -> fairbayes_core::LabeledDataset {
    ModelFile::synthetic().to_model().unwrap().sample(n, seed).unwrap()
}

#[test]
fn fit_is_deterministic() {
    let data = gaussian_data(3000, 1);
    for method in Method::ALL {
        let spec = FitSpec { seed: 5, ..FitSpec::new(method, DisparityKind::DemographicParity, 0.1) };
        let a = serde_json::to_string(&cmd_fit(&data, &spec).unwrap()).unwrap();
        let b = serde_json::to_string(&cmd_fit(&data, &spec).unwrap()).unwrap();
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn fit_split_and_loose_level() {
    let data = gaussian_data(2000, 2);
    let doc = cmd_fit(&data, &FitSpec::new(Method::Fpir, DisparityKind::EqualOpportunity, 10.0)).unwrap();
    assert_eq!(doc.n_train + doc.n_test, 2000);
    assert_eq!(doc.n_train, 1400);
    assert_eq!(doc.t_hat, 0.0);
    assert_eq!(doc.group_thresholds, Some([0.5, 0.5]));
}

#[test]
fn fpir_frontier_is_the_same_in_parallel() {
    let data = gaussian_data(3000, 3);
    let spec = FitSpec::new(Method::Fpir, DisparityKind::PredictiveEquality, 0.0);
    let deltas = [0.0, 0.05, 0.1, 0.2, 0.4];
    let seq = empirical_frontier(&data, &spec, &deltas, false).unwrap();
    let par = empirical_frontier(&data, &spec, &deltas, true).unwrap();
    assert_eq!(seq, par);
    // Larger budgets move the offset towards zero.
    for w in seq.windows(2) {
        assert!(w[1].t.abs() <= w[0].t.abs());
    }
}

#[test]
fn small_synthetic_run() {
    let file = ModelFile::synthetic();
    let model = file.to_model().unwrap();
    let spec = SyntheticSpec { n_train: 2000, n_test: 1000, repeats: 2, seed: 4, ..SyntheticSpec::default() };
    let report = cmd_synthetic(&file, &spec, false).unwrap();
    assert_eq!(report.rows.len(), 36);
    let mut i = 0;
    for method in Method::ALL {
        for kind in DisparityKind::ALL {
            for delta in [0.0, 0.1, 0.2, 0.3] {
                let row = &report.rows[i];
                assert_eq!((row.method, row.kind, row.delta), (method, kind, delta));
                let th = model.fair_classifier(kind, delta, DEFAULT_TOL).unwrap();
                assert_eq!(row.theoretical_accuracy, 1.0 - th.risk);
                assert_eq!(row.theoretical_t, th.t);
                assert!(row.disparity_abs_mean >= row.disparity_mean.abs() - 1e-15);
                assert!((0.0..=1.0).contains(&row.accuracy_mean));
                i += 1;
            }
        }
    }
    assert_eq!(cmd_synthetic(&file, &spec, true).unwrap(), report);
    let none = SyntheticSpec { repeats: 0, ..spec };
    assert!(cmd_synthetic(&file, &none, false).is_err());
}

#[test]
fn multiclass_report() {
    let spec = MulticlassSpec { groups: 3, dim: 4, sigma: 1.0, seed: 2 };
    let report = cmd_multiclass(&spec).unwrap();
    assert_eq!(report.groups.len(), 3);
    assert!(report.offset_sum.abs() <= 1e-10);
    assert_abs_diff_eq!(report.groups.iter().map(|g| g.mass).sum::<f64>(), 1.0, epsilon = 1e-12);
    for g in &report.groups {
        assert!((g.acceptance - report.common_acceptance).abs() < 1e-6);
    }
    assert!(cmd_multiclass(&MulticlassSpec { groups: 1, ..spec }).is_err());
    assert!(cmd_multiclass(&MulticlassSpec { dim: 0, ..spec }).is_err());
}

#[test]
fn model_file_round_trip() {
    let file = ModelFile::synthetic();
    assert_eq!(file.seed, Some(SYNTHETIC_MEAN_SEED));
    assert_eq!(file.mu_ay[1][0].len(), 10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    file.save(&path).unwrap();
    assert_eq!(ModelFile::load(&path).unwrap(), file);

    let bad = ModelFile { sigma: -1.0, ..file.clone() };
    assert!(bad.to_model().is_err());
    std::fs::write(&path, "{\"p_ay\": 3}").unwrap();
    assert!(ModelFile::load(&path).is_err());
    assert!(ModelFile::load(dir.path().join("missing.json")).is_err());
}
