//! Learning fair classifiers from data: resampling (FUDS), cost-sensitive
//! weighting (FCSC) and plug-in thresholding (FPIR), each either aware of
//! the protected attribute at prediction time or blind to it.
//!
//! All three wrap a disparity estimate `t ↦ D̂(t)` in the bisection of
//! [`solve_threshold`]; they differ only in how the classifier at `t` is
//! built.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::LabeledDataset;
use crate::disparity::{bilinear_coeffs, cost_weights, empirical_disparity, group_sign, DisparityKind, GroupStats, PredictionRecord};
use crate::error::{FairError, Result};
use crate::estimators::{fit_group_models, fit_logistic_warm, FitMode, LogisticConfig, LogisticModel, ProbModel, Standardizer};
use crate::solver::{search_bracket, solve_threshold, DisparityCurve, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Fuds,
    Fcsc,
    Fpir,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fuds, Method::Fcsc, Method::Fpir];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fuds => "fuds",
            Method::Fcsc => "fcsc",
            Method::Fpir => "fpir",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = FairError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FairError::Invalid(format!("unknown method '{s}' (expected fuds, fcsc or fpir)")))
    }
}

/// Whether the protected attribute is available when predicting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    Aware,
    Blind,
}

impl Mode {
    fn fit_mode(self) -> FitMode {
        match self {
            Mode::Aware => FitMode::GroupAware,
            Mode::Blind => FitMode::Blind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FairFitConfig {
    pub kind: DisparityKind,
    pub delta: f64,
    pub tol: f64,
    pub mode: Mode,
    /// Seed of the resampling draws.
    pub seed: u64,
    pub learner: LogisticConfig,
    /// Start each refit from the coefficients of the previous one.
    pub warm_start: bool,
}

impl FairFitConfig {
    pub fn new(kind: DisparityKind, delta: f64) -> Self {
        FairFitConfig {
            kind,
            delta,
            tol: DEFAULT_TOL,
            mode: Mode::Aware,
            seed: 0,
            learner: LogisticConfig::default(),
            warm_start: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(FairError::Invalid(format!("delta must be non-negative, got {}", self.delta)));
        }
        if !(self.tol > 0.0) {
            return Err(FairError::Invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Slope `κ_{a,y}` of the attribute-blind costs `c_{a,y}(t) = 1/2 + t·κ_{a,y}/2`.
fn blind_slope(kind: DisparityKind, stats: &GroupStats, a: u8, y: u8) -> f64 {
    let sg = group_sign(a);
    match kind {
        DisparityKind::DemographicParity => sg * (1.0 - 2.0 * f64::from(y)) / stats.group(a),
        DisparityKind::EqualOpportunity if y == 1 => -sg / stats.cell(a, 1),
        DisparityKind::PredictiveEquality if y == 0 => sg / stats.cell(a, 0),
        _ => 0.0,
    }
}

/// Blind weighting function `w_X(x)` from `P(A = 1 | x)` and the
/// per-group regression estimates `[η_0(x), η_1(x)]`.
pub fn blind_weight(kind: DisparityKind, stats: &GroupStats, attribute: f64, eta: [f64; 2]) -> f64 {
    let (q1, q0) = (attribute, 1.0 - attribute);
    match kind {
        DisparityKind::DemographicParity => q1 / stats.group(1) - q0 / stats.group(0),
        DisparityKind::EqualOpportunity => eta[1] * q1 / stats.cell(1, 1) - eta[0] * q0 / stats.cell(0, 1),
        DisparityKind::PredictiveEquality => {
            (1.0 - eta[1]) * q1 / stats.cell(1, 0) - (1.0 - eta[0]) * q0 / stats.cell(0, 0)
        }
    }
}

/// Misclassification costs `[a][y]` whose cost-sensitive Bayes rule is the
/// fair rule at offset `t`.
pub fn cell_costs(kind: DisparityKind, mode: Mode, stats: &GroupStats, t: f64) -> Result<[[f64; 2]; 2]> {
    let mut c = [[0.0; 2]; 2];
    for a in 0..2u8 {
        for y in 0..2u8 {
            let v = match mode {
                Mode::Aware => cost_weights(kind, stats, a, y, t)?,
                Mode::Blind => 0.5 + 0.5 * t * blind_slope(kind, stats, a, y),
            };
            if !(v >= 0.0) || (mode == Mode::Aware && v > 1.0) {
                return Err(FairError::Domain(format!("cost of cell (a={a}, y={y}) is {v} at t = {t}")));
            }
            c[a as usize][y as usize] = v;
        }
    }
    Ok(c)
}

/// Cell proportions `[a][y]` of the resampled distribution whose
/// unconstrained Bayes rule is the fair rule at `t`.
///
/// In aware mode each group keeps its marginal `p_a`; in blind mode the
/// cost-scaled cells are normalized jointly.
pub fn fuds_proportions(stats: &GroupStats, kind: DisparityKind, mode: Mode, t: f64) -> Result<[[f64; 2]; 2]> {
    let costs = cell_costs(kind, mode, stats, t)?;
    let mut p = [[0.0; 2]; 2];
    for a in 0..2u8 {
        for y in 0..2u8 {
            p[a as usize][y as usize] = costs[a as usize][y as usize] * stats.cell(a, y);
        }
    }
    match mode {
        Mode::Aware => {
            for (a, row) in p.iter_mut().enumerate() {
                let total = row[0] + row[1];
                if !(total > 0.0) {
                    return Err(FairError::Domain(format!("group {a} vanishes after reweighting at t = {t}")));
                }
                let scale = stats.group(a as u8) / total;
                row.iter_mut().for_each(|v| *v *= scale);
            }
        }
        Mode::Blind => {
            let total: f64 = p.iter().flatten().sum();
            if !(total > 0.0) {
                return Err(FairError::Domain(format!("all cells vanish at t = {t}")));
            }
            p.iter_mut().flatten().for_each(|v| *v /= total);
        }
    }
    Ok(p)
}

/// `⌊n·p̃_{a,y}⌋` per cell. A `1e-9` guard keeps exact products such as
/// `n·p_{a,y}` at `t = 0` from rounding down.
pub fn target_counts(proportions: &[[f64; 2]; 2], n: usize) -> [[usize; 2]; 2] {
    let mut c = [[0usize; 2]; 2];
    for a in 0..2 {
        for y in 0..2 {
            c[a][y] = (n as f64 * proportions[a][y] + 1e-9) as usize;
        }
    }
    c
}

/// Draw order of one cell: a uniform permutation of its rows, extended by
/// uniform draws with replacement once exhausted. Every resample of size
/// `k` is the first `k` entries, so growing and shrinking move as few
/// points as possible.
#[derive(Debug, Clone)]
struct CellDraws {
    pool: Vec<usize>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl CellDraws {
    fn new(pool: Vec<usize>, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut order = pool.clone();
        order.shuffle(&mut rng);
        CellDraws { pool, order, rng }
    }

    fn extend_to(&mut self, k: usize) {
        while self.order.len() < k {
            let j = self.rng.random_range(0..self.pool.len());
            self.order.push(self.pool[j]);
        }
    }
}

/// Resampled index multisets per cell, with the offset they were built for.
#[derive(Debug, Clone)]
pub struct ResampleState {
    t: f64,
    counts: [[usize; 2]; 2],
    cells: [[CellDraws; 2]; 2],
}

impl ResampleState {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn counts(&self) -> [[usize; 2]; 2] {
        self.counts
    }

    /// Source-row indices currently drawn for cell `(a, y)`.
    pub fn indices(&self, a: u8, y: u8) -> &[usize] {
        let c = &self.cells[a as usize][y as usize];
        &c.order[..self.counts[a as usize][y as usize]]
    }
}

fn cell_rows(data: &LabeledDataset) -> [[Vec<usize>; 2]; 2] {
    let mut rows: [[Vec<usize>; 2]; 2] = Default::default();
    for (i, (&a, &y)) in data.groups().iter().zip(data.labels()).enumerate() {
        rows[a as usize][y as usize].push(i);
    }
    rows
}

/// Resamples `data` to exactly `targets[a][y]` rows per cell, reusing `prev`
/// so that only the change in counts is drawn.
pub fn fuds_resample(
    data: &LabeledDataset,
    targets: [[usize; 2]; 2],
    t: f64,
    prev: Option<ResampleState>,
    seed: u64,
) -> Result<(LabeledDataset, ResampleState)> {
    data.require_binary_groups()?;
    let rows = cell_rows(data);
    let mut cells = match prev {
        Some(state) => {
            for a in 0..2 {
                for y in 0..2 {
                    if state.cells[a][y].pool.len() != rows[a][y].len() {
                        return Err(FairError::Invalid("resample state belongs to a different dataset".into()));
                    }
                }
            }
            state.cells
        }
        None => {
            let [[r00, r01], [r10, r11]] = rows;
            [
                [CellDraws::new(r00, seed, 0), CellDraws::new(r01, seed, 1)],
                [CellDraws::new(r10, seed, 2), CellDraws::new(r11, seed, 3)],
            ]
        }
    };
    let total: usize = targets.iter().flatten().sum();
    let mut order = Vec::with_capacity(total);
    for a in [1usize, 0] {
        for y in [1usize, 0] {
            let k = targets[a][y];
            let cell = &mut cells[a][y];
            if k > 0 && cell.pool.is_empty() {
                return Err(FairError::Estimation(format!("cell (a={a}, y={y}) is empty but {k} rows were requested")));
            }
            cell.extend_to(k);
            order.extend_from_slice(&cell.order[..k]);
        }
    }
    Ok((data.subset(&order), ResampleState { t, counts: targets, cells }))
}

/// Logit of models fitted to a single class.
const SATURATED_LOGIT: f64 = 30.0;

fn constant_model(dim: usize, accept: bool) -> LogisticModel {
    LogisticModel {
        standardizer: Standardizer { mean: vec![0.0; dim], scale: vec![1.0; dim] },
        intercept: if accept { SATURATED_LOGIT } else { -SATURATED_LOGIT },
        coef: vec![0.0; dim],
        epochs_run: 0,
    }
}

/// Logistic fit that falls back to a constant model when one label carries
/// no weight (the regularized likelihood then has no minimizer).
fn fit_or_constant(
    data: &LabeledDataset,
    targets: &[u8],
    config: &LogisticConfig,
    warm: &mut Option<LogisticModel>,
    use_warm: bool,
) -> Result<LogisticModel> {
    let mut mass = [0.0; 2];
    for (&y, &w) in targets.iter().zip(data.weights()) {
        mass[y as usize] += w;
    }
    if !(mass[0] > 0.0 && mass[1] > 0.0) {
        if !(mass[0] > 0.0 || mass[1] > 0.0) {
            return Err(FairError::Estimation("no weighted rows to fit".into()));
        }
        return Ok(constant_model(data.dim(), mass[1] > 0.0));
    }
    let init = if use_warm { warm.as_ref() } else { None };
    let model = fit_logistic_warm(data, targets, config, init)?;
    *warm = Some(model.clone());
    Ok(model)
}

fn fit_aware_groups(
    data: &LabeledDataset,
    config: &LogisticConfig,
    warm: &mut [Option<LogisticModel>; 2],
    use_warm: bool,
) -> Result<Vec<LogisticModel>> {
    (0..2u8)
        .map(|a| {
            let rows: Vec<usize> = data.groups().iter().enumerate().filter(|(_, &g)| g == a).map(|(i, _)| i).collect();
            if rows.is_empty() {
                return Err(FairError::Estimation(format!("group {a} has no rows")));
            }
            let sub = data.subset(&rows);
            fit_or_constant(&sub, sub.labels(), config, &mut warm[a as usize], use_warm)
        })
        .collect()
}

/// How a fitted model turns into decisions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "rule", rename_all = "snake_case"))]
pub enum DecisionRule {
    /// Accept iff the model's estimate exceeds 1/2.
    Bayes,
    /// Accept iff `η̂_a(x) > thresholds[a]`.
    GroupThresholds { thresholds: [f64; 2] },
    /// Accept iff `η̂^Y(x) > 1/2 + (t/2)·ŵ(x)` with the blind weighting function.
    BlindOffset { kind: DisparityKind, t: f64, stats: GroupStats },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FairClassifier {
    pub model: ProbModel,
    pub rule: DecisionRule,
}

impl FairClassifier {
    pub fn predict(&self, x: &[f64], group: Option<u8>) -> Result<bool> {
        match &self.rule {
            DecisionRule::Bayes => Ok(self.model.predict_proba(x, group)? > 0.5),
            DecisionRule::GroupThresholds { thresholds } => {
                let a = group.ok_or_else(|| FairError::Invalid("group-threshold rule needs a group id".into()))?;
                let h = thresholds
                    .get(a as usize)
                    .ok_or_else(|| FairError::Invalid(format!("no threshold for group {a}")))?;
                Ok(self.model.group_proba(x, a)? > *h)
            }
            DecisionRule::BlindOffset { kind, t, stats } => {
                let w = blind_weight(
                    *kind,
                    stats,
                    self.model.attribute_proba(x)?,
                    [self.model.group_proba(x, 0)?, self.model.group_proba(x, 1)?],
                );
                Ok(self.model.predict_proba(x, None)? > 0.5 + 0.5 * t * w)
            }
        }
    }

    /// 0/1 decisions for every row of `data`.
    pub fn decisions(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        (0..data.len())
            .map(|i| self.predict(data.row(i), Some(data.groups()[i])).map(|d| if d { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// Accuracy and the three disparities; a disparity is `None` when one of
/// its conditioning cells is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub accuracy: f64,
    pub demographic_parity: Option<f64>,
    pub equal_opportunity: Option<f64>,
    pub predictive_equality: Option<f64>,
}

impl Metrics {
    pub fn disparity(&self, kind: DisparityKind) -> Option<f64> {
        match kind {
            DisparityKind::DemographicParity => self.demographic_parity,
            DisparityKind::EqualOpportunity => self.equal_opportunity,
            DisparityKind::PredictiveEquality => self.predictive_equality,
        }
    }
}

/// Plug-in metrics of (possibly randomized) decisions `f_i ∈ [0, 1]`.
pub fn evaluate_decisions(decisions: &[f64], data: &LabeledDataset) -> Result<Metrics> {
    if data.is_empty() || decisions.len() != data.len() {
        return Err(FairError::Invalid(format!("{} decisions for {} rows", decisions.len(), data.len())));
    }
    data.require_binary_groups()?;
    let mut sum = [[0.0; 2]; 2];
    let mut count = [[0usize; 2]; 2];
    let mut correct = 0.0;
    for ((&f, &a), &y) in decisions.iter().zip(data.groups()).zip(data.labels()) {
        sum[a as usize][y as usize] += f;
        count[a as usize][y as usize] += 1;
        correct += if y == 1 { f } else { 1.0 - f };
    }
    let rate = |a: usize, ys: &[usize]| -> Option<f64> {
        let n: usize = ys.iter().map(|&y| count[a][y]).sum();
        (n > 0).then(|| ys.iter().map(|&y| sum[a][y]).sum::<f64>() / n as f64)
    };
    let gap = |ys: &[usize]| Some(rate(1, ys)? - rate(0, ys)?);
    Ok(Metrics {
        accuracy: correct / data.len() as f64,
        demographic_parity: gap(&[0, 1]),
        equal_opportunity: gap(&[1]),
        predictive_equality: gap(&[0]),
    })
}

pub fn evaluate(classifier: &FairClassifier, data: &LabeledDataset) -> Result<Metrics> {
    evaluate_decisions(&classifier.decisions(data)?, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub t: f64,
    pub disparity: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    pub method: Method,
    pub kind: DisparityKind,
    pub mode: Mode,
    pub delta: f64,
    pub tol: f64,
    /// Plug-in cell probabilities of the training data.
    pub stats: GroupStats,
    pub t_hat: f64,
    /// Estimated disparity of the returned classifier on the training data.
    pub train_disparity: f64,
    /// `H_a(t̂)` from the plug-in statistics (aware mode).
    pub group_thresholds: Option<[f64; 2]>,
    /// Costs `[a][y]` of the final cost-sensitive fit.
    pub cell_costs: Option<[[f64; 2]; 2]>,
    /// Row counts `[a][y]` of the final resample.
    pub cell_counts: Option<[[usize; 2]; 2]>,
    /// Fresh disparity evaluations made by this pipeline so far.
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
    /// `t̂` sits within one tolerance of the search bracket's edge.
    pub at_bracket_edge: bool,
    pub step_at_exit: f64,
}

/// Per-row quantities of a fixed plug-in model.
struct PluginRows {
    model: ProbModel,
    /// `η̂_a(x)` (aware) or `η̂^Y(x)` (blind) per row.
    scores: Vec<f64>,
    /// Blind weighting function per row; empty in aware mode.
    blind: Vec<f64>,
    /// Disparity weight `ŵ(η̂_a(x), a)` per row.
    weights: Vec<f64>,
}

// One per pipeline; the size gap is irrelevant.
#[allow(clippy::large_enum_variant)]
enum Engine {
    Refit {
        warm_groups: [Option<LogisticModel>; 2],
        warm_label: Option<LogisticModel>,
        resample: Option<ResampleState>,
        work: LabeledDataset,
    },
    Plugin(PluginRows),
}

struct Evaluation {
    disparity: f64,
    model: Option<ProbModel>,
}

/// A data-driven disparity curve for one method, caching every evaluation
/// so that several `δ` can be solved against the same fits.
pub struct FairPipeline<'a> {
    method: Method,
    config: FairFitConfig,
    data: &'a LabeledDataset,
    stats: GroupStats,
    engine: Engine,
    cache: BTreeMap<u64, Evaluation>,
    trace: Vec<TraceRow>,
}

impl<'a> FairPipeline<'a> {
    pub fn new(method: Method, data: &'a LabeledDataset, config: FairFitConfig) -> Result<Self> {
        config.validate()?;
        let stats = data.stats()?;
        let engine = match method {
            Method::Fpir => {
                let model = fit_group_models(data, config.mode.fit_mode(), &config.learner)?;
                Engine::Plugin(plugin_rows(model, data, &stats, &config)?)
            }
            Method::Fuds | Method::Fcsc => Engine::Refit {
                warm_groups: [None, None],
                warm_label: None,
                resample: None,
                work: data.clone(),
            },
        };
        Ok(FairPipeline { method, config, data, stats, engine, cache: BTreeMap::new(), trace: Vec::new() })
    }

    /// Plug-in pipeline around an already fitted regression estimate.
    pub fn with_model(data: &'a LabeledDataset, model: ProbModel, config: FairFitConfig) -> Result<Self> {
        config.validate()?;
        let stats = data.stats()?;
        let engine = Engine::Plugin(plugin_rows(model, data, &stats, &config)?);
        Ok(FairPipeline { method: Method::Fpir, config, data, stats, engine, cache: BTreeMap::new(), trace: Vec::new() })
    }

    pub fn stats(&self) -> &GroupStats {
        &self.stats
    }

    pub fn config(&self) -> &FairFitConfig {
        &self.config
    }

    /// Fresh evaluations in call order.
    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    fn key(t: f64) -> u64 {
        // Treat -0.0 as 0.0.
        (t + 0.0).to_bits()
    }

    fn evaluate_at(&mut self, t: f64) -> Result<&Evaluation> {
        let key = Self::key(t);
        if !self.cache.contains_key(&key) {
            let eval = self.compute(t)?;
            self.trace.push(TraceRow { t, disparity: eval.disparity });
            self.cache.insert(key, eval);
        }
        Ok(&self.cache[&key])
    }

    fn compute(&mut self, t: f64) -> Result<Evaluation> {
        let kind = self.config.kind;
        let mode = self.config.mode;
        let data = self.data;
        match &mut self.engine {
            Engine::Plugin(rows) => {
                let disparity = plugin_disparity(rows, data.groups(), kind, mode, &self.stats, t)?;
                Ok(Evaluation { disparity, model: None })
            }
            Engine::Refit { warm_groups, warm_label, resample, work } => {
                let learner = &self.config.learner;
                let use_warm = self.config.warm_start;
                let fit_on = |train: &LabeledDataset,
                              warm_groups: &mut [Option<LogisticModel>; 2],
                              warm_label: &mut Option<LogisticModel>|
                 -> Result<ProbModel> {
                    Ok(match mode {
                        Mode::Aware => ProbModel::GroupAware { groups: fit_aware_groups(train, learner, warm_groups, use_warm)? },
                        Mode::Blind => ProbModel::Blind {
                            label: fit_or_constant(train, train.labels(), learner, warm_label, use_warm)?,
                            attribute: None,
                            groups: None,
                        },
                    })
                };
                let model = match self.method {
                    Method::Fuds => {
                        let props = fuds_proportions(&self.stats, kind, mode, t)?;
                        let targets = target_counts(&props, data.len());
                        let (sample, state) = fuds_resample(data, targets, t, resample.take(), self.config.seed)?;
                        *resample = Some(state);
                        fit_on(&sample, warm_groups, warm_label)?
                    }
                    _ => {
                        let costs = cell_costs(kind, mode, &self.stats, t)?;
                        let weights = data
                            .weights()
                            .iter()
                            .zip(data.groups().iter().zip(data.labels()))
                            .map(|(&w, (&a, &y))| w * costs[a as usize][y as usize])
                            .collect();
                        work.set_weights(weights)?;
                        fit_on(work, warm_groups, warm_label)?
                    }
                };
                let clf = FairClassifier { model, rule: DecisionRule::Bayes };
                let disparity = label_disparity(kind, &self.stats, data, &clf.decisions(data)?)?;
                Ok(Evaluation { disparity, model: Some(clf.model) })
            }
        }
    }

    /// The classifier of this pipeline's family at offset `t`.
    pub fn classifier_at(&mut self, t: f64) -> Result<FairClassifier> {
        let kind = self.config.kind;
        let mode = self.config.mode;
        let stats = self.stats;
        let model = self.evaluate_at(t)?.model.clone();
        match (&self.engine, model) {
            (Engine::Plugin(rows), _) => {
                let rule = match mode {
                    Mode::Aware => {
                        let spec = bilinear_coeffs(kind, &stats);
                        DecisionRule::GroupThresholds { thresholds: [spec.threshold(0, t)?, spec.threshold(1, t)?] }
                    }
                    Mode::Blind => DecisionRule::BlindOffset { kind, t, stats },
                };
                Ok(FairClassifier { model: rows.model.clone(), rule })
            }
            (Engine::Refit { .. }, Some(model)) => Ok(FairClassifier { model, rule: DecisionRule::Bayes }),
            (Engine::Refit { .. }, None) => Err(FairError::Invalid("refit evaluation carries no model".into())),
        }
    }

    /// Solves for `t̂(δ)` and returns the classifier there with a report.
    pub fn solve(&mut self, delta: f64) -> Result<(FairClassifier, FitReport)> {
        let tol = self.config.tol;
        let sol = solve_threshold(self, delta, tol)?;
        let t = sol.t_star;
        let classifier = self.classifier_at(t)?;
        let (lo, hi) = search_bracket(self.domain());
        let kind = self.config.kind;
        let mode = self.config.mode;
        let group_thresholds = match mode {
            Mode::Aware => {
                let spec = bilinear_coeffs(kind, &self.stats);
                Some([spec.threshold(0, t)?, spec.threshold(1, t)?])
            }
            Mode::Blind => None,
        };
        let report = FitReport {
            method: self.method,
            kind,
            mode,
            delta,
            tol,
            stats: self.stats,
            t_hat: t,
            train_disparity: sol.d_at_t,
            group_thresholds,
            cell_costs: (self.method == Method::Fcsc).then(|| cell_costs(kind, mode, &self.stats, t)).transpose()?,
            cell_counts: match self.method {
                Method::Fuds => Some(target_counts(&fuds_proportions(&self.stats, kind, mode, t)?, self.data.len())),
                _ => None,
            },
            evaluations: self.trace.len(),
            trace: self.trace.clone(),
            at_bracket_edge: t != 0.0 && ((t - lo).abs() <= tol || (hi - t).abs() <= tol),
            step_at_exit: sol.step_at_exit,
        };
        Ok((classifier, report))
    }
}

impl DisparityCurve for FairPipeline<'_> {
    fn domain(&self) -> (f64, f64) {
        self.config.kind.domain(&self.stats)
    }

    fn disparity(&mut self, t: f64) -> Result<f64> {
        self.evaluate_at(t).map(|e| e.disparity)
    }
}

/// Disparity of decisions with the observed label standing in for `η`:
/// for equal opportunity and predictive equality this is exactly the gap
/// in empirical true- or false-positive rates.
fn label_disparity(kind: DisparityKind, stats: &GroupStats, data: &LabeledDataset, decisions: &[f64]) -> Result<f64> {
    let records: Vec<PredictionRecord> = decisions
        .iter()
        .zip(data.groups().iter().zip(data.labels()))
        .map(|(&f, (&a, &y))| PredictionRecord { group: a, eta: f64::from(y), decision: f })
        .collect();
    empirical_disparity(kind, stats, &records)
}

fn plugin_rows(model: ProbModel, data: &LabeledDataset, stats: &GroupStats, config: &FairFitConfig) -> Result<PluginRows> {
    let spec = bilinear_coeffs(config.kind, stats);
    let n = data.len();
    let mut scores = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut blind = Vec::new();
    for i in 0..n {
        let (x, a) = (data.row(i), data.groups()[i]);
        let eta_a = model.group_proba(x, a)?;
        weights.push(spec.weight(eta_a, a));
        match config.mode {
            Mode::Aware => scores.push(eta_a),
            Mode::Blind => {
                scores.push(model.predict_proba(x, None)?);
                let groups = [model.group_proba(x, 0)?, model.group_proba(x, 1)?];
                blind.push(blind_weight(config.kind, stats, model.attribute_proba(x)?, groups));
            }
        }
    }
    Ok(PluginRows { model, scores, blind, weights })
}

fn plugin_disparity(
    rows: &PluginRows,
    groups: &[u8],
    kind: DisparityKind,
    mode: Mode,
    stats: &GroupStats,
    t: f64,
) -> Result<f64> {
    let mut total = 0.0;
    match mode {
        Mode::Aware => {
            let spec = bilinear_coeffs(kind, stats);
            let h = [spec.threshold(0, t)?, spec.threshold(1, t)?];
            for (i, &a) in groups.iter().enumerate() {
                if rows.scores[i] > h[a as usize] {
                    total += rows.weights[i];
                }
            }
        }
        Mode::Blind => {
            for i in 0..groups.len() {
                if rows.scores[i] > 0.5 + 0.5 * t * rows.blind[i] {
                    total += rows.weights[i];
                }
            }
        }
    }
    Ok(total / groups.len() as f64)
}

/// FUDS: refit on data resampled to the fair proportions at each `t`.
pub fn run_fuds(data: &LabeledDataset, config: &FairFitConfig) -> Result<(FairClassifier, FitReport)> {
    FairPipeline::new(Method::Fuds, data, *config)?.solve(config.delta)
}

/// FCSC: refit with fair misclassification costs at each `t`.
pub fn run_fcsc(data: &LabeledDataset, config: &FairFitConfig) -> Result<(FairClassifier, FitReport)> {
    FairPipeline::new(Method::Fcsc, data, *config)?.solve(config.delta)
}

/// FPIR: fit once, then threshold the estimate at the fair offsets.
pub fn run_fpir(data: &LabeledDataset, config: &FairFitConfig) -> Result<(FairClassifier, FitReport)> {
    FairPipeline::new(Method::Fpir, data, *config)?.solve(config.delta)
}

pub fn run_method(method: Method, data: &LabeledDataset, config: &FairFitConfig) -> Result<(FairClassifier, FitReport)> {
    FairPipeline::new(method, data, *config)?.solve(config.delta)
}
