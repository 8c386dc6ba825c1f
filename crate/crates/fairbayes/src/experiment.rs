//! Experiment drivers behind the CLI subcommands.

use std::io::Write;
use std::thread;

use fairbayes_core::algorithms::{evaluate, FairClassifier, FairFitConfig, FairPipeline, FitReport, Method, Metrics, Mode};
use fairbayes_core::extensions::{solve_multiclass_dp, MulticlassThresholds};
use fairbayes_core::gaussian::{GroupAcceptance, GroupGaussian};
use fairbayes_core::solver::trace_pareto;
use fairbayes_core::{DisparityKind, GaussianModel, LabeledDataset, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_file::ModelFile;

/// Environment variable read for the default seed.
pub const SEED_ENV: &str = "FAIRBAYES_SEED";

/// Independent seed for sub-task `index` of a run seeded with `base`
/// (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub method: Method,
    pub kind: DisparityKind,
    pub mode: Mode,
    pub delta: f64,
    pub tol: f64,
    pub seed: u64,
    /// Training fraction of the split.
    pub split: f64,
}

impl FitSpec {
    pub fn new(method: Method, kind: DisparityKind, delta: f64) -> Self {
        FitSpec { method, kind, mode: Mode::Aware, delta, tol: DEFAULT_TOL, seed: 0, split: 0.7 }
    }

    fn config(&self, seed: u64) -> FairFitConfig {
        let mut c = FairFitConfig::new(self.kind, self.delta);
        c.mode = self.mode;
        c.tol = self.tol;
        c.seed = seed;
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDocument {
    pub command: &'static str,
    pub spec: FitSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub t_hat: f64,
    pub group_thresholds: Option<[f64; 2]>,
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
    pub report: FitReport,
    pub classifier: FairClassifier,
}

/// Seeded split, one pipeline run, and metrics on both halves.
pub fn cmd_fit(data: &LabeledDataset, spec: &FitSpec) -> Result<FitDocument> {
    let (train, test) = data.split(spec.split, spec.seed)?;
    let mut pipeline = FairPipeline::new(spec.method, &train, spec.config(derive_seed(spec.seed, 0)))?;
    let (classifier, report) = pipeline.solve(spec.delta)?;
    Ok(FitDocument {
        command: "fit",
        spec: *spec,
        n_train: train.len(),
        n_test: test.len(),
        t_hat: report.t_hat,
        group_thresholds: report.group_thresholds,
        train_metrics: evaluate(&classifier, &train)?,
        test_metrics: evaluate(&classifier, &test)?,
        report,
        classifier,
    })
}

/// One frontier point; disparities are empty when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierRecord {
    pub delta: f64,
    pub t: f64,
    pub accuracy: f64,
    pub dd: Option<f64>,
    #[serde(rename = "do")]
    pub do_: Option<f64>,
    pub pd: Option<f64>,
}

impl FrontierRecord {
    fn from_metrics(delta: f64, t: f64, m: &Metrics) -> Self {
        FrontierRecord {
            delta,
            t,
            accuracy: m.accuracy,
            dd: m.demographic_parity,
            do_: m.equal_opportunity,
            pd: m.predictive_equality,
        }
    }
}

/// Parses a comma-separated, ascending list of non-negative levels.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Input(format!("'{s}' is not a number"))))
        .collect::<Result<_>>()?;
    if grid.is_empty() || grid.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::Input("delta grid needs non-negative values".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Input("delta grid must be sorted ascending".into()));
    }
    Ok(grid)
}

/// `points` evenly spaced levels from 0 to `max`.
pub fn even_grid(points: usize, max: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| max * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Empirical frontier on the test half of a seeded split.
///
/// Sequentially, all levels share one pipeline and its cached fits. With
/// `parallel`, level `i` gets its own pipeline seeded by index.
pub fn empirical_frontier(data: &LabeledDataset, spec: &FitSpec, deltas: &[f64], parallel: bool) -> Result<Vec<FrontierRecord>> {
    let (train, test) = data.split(spec.split, spec.seed)?;
    let point = |pipeline: &mut FairPipeline<'_>, delta: f64| -> Result<FrontierRecord> {
        let (clf, report) = pipeline.solve(delta)?;
        Ok(FrontierRecord::from_metrics(delta, report.t_hat, &evaluate(&clf, &test)?))
    };
    if parallel {
        thread::scope(|s| {
            let handles: Vec<_> = deltas
                .iter()
                .enumerate()
                .map(|(i, &delta)| {
                    let (train, point) = (&train, &point);
                    s.spawn(move || {
                        let mut p = FairPipeline::new(spec.method, train, spec.config(derive_seed(spec.seed, i as u64 + 1)))?;
                        point(&mut p, delta)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("frontier worker panicked")).collect()
        })
    } else {
        let mut pipeline = FairPipeline::new(spec.method, &train, spec.config(derive_seed(spec.seed, 0)))?;
        deltas.iter().map(|&d| point(&mut pipeline, d)).collect()
    }
}

/// Exact frontier of a Gaussian model.
pub fn closed_form_frontier(model: &GaussianModel, kind: DisparityKind, deltas: &[f64], tol: f64) -> Result<Vec<FrontierRecord>> {
    let rows = trace_pareto(&mut model.disparity_curve(kind), |t| model.risk(kind, t), deltas, tol)?;
    rows.iter()
        .map(|r| {
            let h = model.thresholds(kind, r.t)?;
            let d = |k| Some(model.disparity_at(k, h));
            Ok(FrontierRecord {
                delta: r.delta,
                t: r.t,
                accuracy: 1.0 - r.risk,
                dd: d(DisparityKind::DemographicParity),
                do_: d(DisparityKind::EqualOpportunity),
                pd: d(DisparityKind::PredictiveEquality),
            })
        })
        .collect()
}

pub fn write_frontier<W: Write>(writer: W, rows: &[FrontierRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["delta", "t", "accuracy", "dd", "do", "pd"])?;
    }
    w.flush().map_err(|e| Error::io("<frontier output>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub repeats: usize,
    pub seed: u64,
    pub deltas: Vec<f64>,
    pub methods: Vec<Method>,
    pub kinds: Vec<DisparityKind>,
    pub tol: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_train: 10_000,
            n_test: 5_000,
            repeats: 20,
            seed: 0,
            deltas: vec![0.0, 0.1, 0.2, 0.3],
            methods: Method::ALL.to_vec(),
            kinds: DisparityKind::ALL.to_vec(),
            tol: DEFAULT_TOL,
        }
    }
}

/// Mean and spread over repeats for one `(method, kind, δ)`, beside the
/// exact values of the fair Bayes-optimal rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRow {
    pub method: Method,
    pub kind: DisparityKind,
    pub delta: f64,
    pub disparity_mean: f64,
    pub disparity_abs_mean: f64,
    pub disparity_std: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub t_hat_mean: f64,
    pub theoretical_t: f64,
    pub theoretical_accuracy: f64,
    pub theoretical_disparity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub command: String,
    pub model: ModelFile,
    pub spec: SyntheticSpec,
    pub rows: Vec<SyntheticRow>,
}

/// `(t̂, test disparity, test accuracy)` for every `(method, kind, δ)` of one repeat.
fn synthetic_repeat(model: &GaussianModel, spec: &SyntheticSpec, r: usize) -> Result<Vec<[f64; 3]>> {
    let train = model.sample(spec.n_train, derive_seed(spec.seed, 2 * r as u64))?;
    let test = model.sample(spec.n_test, derive_seed(spec.seed, 2 * r as u64 + 1))?;
    let mut out = Vec::with_capacity(spec.methods.len() * spec.kinds.len() * spec.deltas.len());
    for &method in &spec.methods {
        for &kind in &spec.kinds {
            let mut config = FairFitConfig::new(kind, 0.0);
            config.tol = spec.tol;
            config.seed = derive_seed(spec.seed, 2 * r as u64);
            let mut pipeline = FairPipeline::new(method, &train, config)?;
            for &delta in &spec.deltas {
                let (clf, report) = pipeline.solve(delta)?;
                let m = evaluate(&clf, &test)?;
                let d = m.disparity(kind).ok_or_else(|| Error::Input(format!("{kind} undefined on the test sample")))?;
                out.push([report.t_hat, d, m.accuracy]);
            }
        }
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Repeated train/test draws from `model`, every pipeline at every level.
pub fn cmd_synthetic(model_file: &ModelFile, spec: &SyntheticSpec, parallel: bool) -> Result<SyntheticReport> {
    if spec.repeats == 0 {
        return Err(Error::Input("need at least one repeat".into()));
    }
    let model = model_file.to_model()?;
    let runs: Vec<Vec<[f64; 3]>> = if parallel {
        thread::scope(|s| {
            let handles: Vec<_> = (0..spec.repeats).map(|r| {
                let model = &model;
                s.spawn(move || synthetic_repeat(model, spec, r))
            }).collect();
            handles.into_iter().map(|h| h.join().expect("synthetic worker panicked")).collect::<Result<_>>()
        })?
    } else {
        (0..spec.repeats).map(|r| synthetic_repeat(&model, spec, r)).collect::<Result<_>>()?
    };

    let mut rows = Vec::new();
    let mut idx = 0;
    for &method in &spec.methods {
        for &kind in &spec.kinds {
            for &delta in &spec.deltas {
                let col = |j: usize| runs.iter().map(|r| r[idx][j]).collect::<Vec<f64>>();
                let (t_mean, _) = mean_std(&col(0));
                let disp = col(1);
                let (d_mean, d_std) = mean_std(&disp);
                let (a_mean, a_std) = mean_std(&col(2));
                let th = model.fair_classifier(kind, delta, spec.tol)?;
                rows.push(SyntheticRow {
                    method,
                    kind,
                    delta,
                    disparity_mean: d_mean,
                    disparity_abs_mean: disp.iter().map(|d| d.abs()).sum::<f64>() / disp.len() as f64,
                    disparity_std: d_std,
                    accuracy_mean: a_mean,
                    accuracy_std: a_std,
                    t_hat_mean: t_mean,
                    theoretical_t: th.t,
                    theoretical_accuracy: 1.0 - th.risk,
                    theoretical_disparity: th.disparity,
                });
                idx += 1;
            }
        }
    }
    Ok(SyntheticReport { command: "synthetic".into(), model: model_file.clone(), spec: spec.clone(), rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSpec {
    pub groups: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
}

/// `K` Gaussian groups with masses and means drawn from `seed`.
pub fn multiclass_groups(spec: &MulticlassSpec) -> Result<(Vec<GroupGaussian>, Vec<f64>)> {
    if spec.groups < 2 || spec.dim == 0 {
        return Err(Error::Input("need at least two groups and one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw: Vec<f64> = (0..spec.groups).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut groups = Vec::with_capacity(spec.groups);
    let mut masses = Vec::with_capacity(spec.groups);
    for w in raw {
        let mass = w / total;
        let positive = rng.random_range(0.3..0.7);
        let mut draw = || (0..spec.dim).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
        let (m1, m0) = (draw(), draw());
        groups.push(GroupGaussian::new(mass * positive, mass * (1.0 - positive), m1, m0, spec.sigma)?);
        masses.push(mass);
    }
    Ok((groups, masses))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassGroup {
    pub mass: f64,
    pub offset: f64,
    pub threshold: f64,
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassReport {
    pub command: String,
    pub spec: MulticlassSpec,
    pub common_acceptance: f64,
    pub offset_sum: f64,
    pub groups: Vec<MulticlassGroup>,
}

pub fn cmd_multiclass(spec: &MulticlassSpec) -> Result<MulticlassReport> {
    let (groups, masses) = multiclass_groups(spec)?;
    let sol: MulticlassThresholds = solve_multiclass_dp(&groups, &masses)?;
    let rows = groups
        .iter()
        .zip(&masses)
        .enumerate()
        .map(|(a, (g, &m))| {
            let threshold = sol.group_threshold(a, m);
            MulticlassGroup { mass: m, offset: sol.offsets[a], threshold, acceptance: g.acceptance(threshold) }
        })
        .collect();
    Ok(MulticlassReport {
        command: "multiclass".into(),
        spec: *spec,
        common_acceptance: sol.acceptance,
        offset_sum: sol.offsets.iter().sum(),
        groups: rows,
    })
}
