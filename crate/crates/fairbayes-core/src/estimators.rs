//! Weighted logistic regression by full-batch gradient descent, and the
//! group-aware / attribute-blind regression-function estimators built on it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::LabeledDataset;
use crate::error::{FairError, Result};
use crate::math::{sigmoid, softplus, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogisticConfig {
    /// Step size as a multiple of `1/L`, where `L` bounds the curvature of
    /// the objective. Values in `(0, 1]` give a non-increasing loss; values
    /// at or above 2 may diverge.
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Ridge penalty on the non-intercept coefficients.
    pub l2: f64,
    /// Stop once every gradient coordinate is below this.
    pub grad_tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { learning_rate: 1.0, max_epochs: 2000, l2: 1e-4, grad_tol: 1e-7 }
    }
}

/// Per-feature centring and scaling.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Weighted mean and standard deviation; constant features get scale 1.
    pub fn fit(data: &LabeledDataset) -> Self {
        let d = data.dim();
        let w = data.weights();
        let total: f64 = w.iter().sum();
        let mut mean = vec![0.0; d];
        let mut sq = vec![0.0; d];
        if total > 0.0 {
            for i in 0..data.len() {
                for (m, v) in mean.iter_mut().zip(data.row(i)) {
                    *m += w[i] * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= total);
            for i in 0..data.len() {
                for ((s, v), m) in sq.iter_mut().zip(data.row(i)).zip(&mean) {
                    *s += w[i] * (v - m) * (v - m);
                }
            }
        }
        let scale = sq
            .iter()
            .map(|s| {
                let sd = if total > 0.0 { sqrt(s / total) } else { 0.0 };
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }
}

/// `P(label = 1 | x) = σ(intercept + Σ coef_j·(x_j − mean_j)/scale_j)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub intercept: f64,
    /// Coefficients on the standardized features.
    pub coef: Vec<f64>,
    pub epochs_run: usize,
}

impl LogisticModel {
    /// Linear score on the logit scale.
    pub fn score(&self, x: &[f64]) -> f64 {
        let st = &self.standardizer;
        self.intercept
            + self.coef.iter().zip(x).zip(st.mean.iter().zip(&st.scale)).map(|((c, v), (m, s))| c * (v - m) / s).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }

    /// Coefficients on the raw features: `(intercept, slopes)`.
    pub fn raw_coefficients(&self) -> (f64, Vec<f64>) {
        let st = &self.standardizer;
        let slopes: Vec<f64> = self.coef.iter().zip(&st.scale).map(|(c, s)| c / s).collect();
        let shift: f64 = slopes.iter().zip(&st.mean).map(|(b, m)| b * m).sum();
        (self.intercept - shift, slopes)
    }
}

/// Weighted mean negative log-likelihood plus ridge penalty, over a
/// standardized design with a leading intercept column.
pub struct LogisticObjective {
    cols: usize,
    design: Vec<f64>,
    labels: Vec<f64>,
    weights: Vec<f64>,
    total_weight: f64,
    l2: f64,
}

impl LogisticObjective {
    pub fn new(data: &LabeledDataset, standardizer: &Standardizer, l2: f64) -> Result<Self> {
        Self::with_labels(data, data.labels(), standardizer, l2)
    }

    /// Uses `targets` in place of the dataset labels (e.g. group ids when
    /// modelling `P(A = 1 | x)`).
    pub fn with_labels(data: &LabeledDataset, targets: &[u8], standardizer: &Standardizer, l2: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(FairError::Invalid("cannot fit on an empty dataset".into()));
        }
        let cols = data.dim() + 1;
        let mut design = Vec::with_capacity(cols * data.len());
        for i in 0..data.len() {
            design.push(1.0);
            for ((v, m), s) in data.row(i).iter().zip(&standardizer.mean).zip(&standardizer.scale) {
                design.push((v - m) / s);
            }
        }
        let total_weight: f64 = data.weights().iter().sum();
        if !(total_weight > 0.0) {
            return Err(FairError::Invalid("sample weights sum to zero".into()));
        }
        Ok(LogisticObjective {
            cols,
            design,
            labels: targets.iter().map(|&y| f64::from(y)).collect(),
            weights: data.weights().to_vec(),
            total_weight,
            l2,
        })
    }

    pub fn dim(&self) -> usize {
        self.cols
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        0.5 * self.l2 * params[1..].iter().map(|b| b * b).sum::<f64>()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.design.chunks_exact(self.cols).enumerate() {
            let z: f64 = row.iter().zip(params).map(|(x, b)| x * b).sum();
            total += self.weights[i] * (softplus(z) - self.labels[i] * z);
        }
        total / self.total_weight + self.penalty(params)
    }

    /// Loss and gradient in one pass.
    pub fn loss_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (i, row) in self.design.chunks_exact(self.cols).enumerate() {
            let z: f64 = row.iter().zip(params).map(|(x, b)| x * b).sum();
            let w = self.weights[i];
            total += w * (softplus(z) - self.labels[i] * z);
            let r = w * (sigmoid(z) - self.labels[i]);
            for (g, x) in grad.iter_mut().zip(row) {
                *g += r * x;
            }
        }
        let scale = 1.0 / self.total_weight;
        grad.iter_mut().for_each(|g| *g *= scale);
        for (g, b) in grad[1..].iter_mut().zip(&params[1..]) {
            *g += self.l2 * b;
        }
        total * scale + self.penalty(params)
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.cols];
        self.loss_and_gradient(params, &mut g);
        g
    }

    /// Upper bound on the largest Hessian eigenvalue:
    /// `λ_max(Xᵀ W X / ΣW) / 4 + l2`, with `λ_max` by power iteration on the
    /// weighted Gram matrix (bounded above by its trace as a fallback).
    pub fn curvature_bound(&self) -> f64 {
        let c = self.cols;
        let mut gram = vec![0.0; c * c];
        for (i, row) in self.design.chunks_exact(c).enumerate() {
            let w = self.weights[i];
            for j in 0..c {
                let wx = w * row[j];
                for k in j..c {
                    gram[j * c + k] += wx * row[k];
                }
            }
        }
        for j in 0..c {
            for k in j..c {
                gram[j * c + k] /= self.total_weight;
                gram[k * c + j] = gram[j * c + k];
            }
        }
        let trace: f64 = (0..c).map(|j| gram[j * c + j]).sum();
        let mut v = vec![1.0; c];
        let mut lambda = trace;
        for _ in 0..100 {
            let mut next = vec![0.0; c];
            for j in 0..c {
                next[j] = (0..c).map(|k| gram[j * c + k] * v[k]).sum();
            }
            let norm = sqrt(next.iter().map(|x| x * x).sum());
            if !(norm > 0.0) {
                break;
            }
            let est = norm / sqrt(v.iter().map(|x| x * x).sum());
            v = next.into_iter().map(|x| x / norm).collect();
            if (est - lambda).abs() <= 1e-6 * est {
                lambda = est;
                break;
            }
            lambda = est;
        }
        // Power iteration converges from below; pad it and never exceed the trace.
        let lambda = (lambda * 1.05).min(trace);
        0.25 * lambda + self.l2
    }
}

/// Fits `P(y = 1 | x)` by weighted gradient descent.
pub fn fit_logistic(data: &LabeledDataset, config: &LogisticConfig) -> Result<LogisticModel> {
    fit_logistic_warm(data, data.labels(), config, None)
}

/// As [`fit_logistic`] but regressing `targets`, optionally starting from a
/// previous model (whose standardization is then kept).
pub fn fit_logistic_warm(
    data: &LabeledDataset,
    targets: &[u8],
    config: &LogisticConfig,
    warm: Option<&LogisticModel>,
) -> Result<LogisticModel> {
    if !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(FairError::Invalid("learning rate must be positive and l2 non-negative".into()));
    }
    if targets.len() != data.len() {
        return Err(FairError::Invalid("target vector length differs from row count".into()));
    }
    let standardizer = match warm {
        Some(m) if m.coef.len() == data.dim() => m.standardizer.clone(),
        _ => Standardizer::fit(data),
    };
    let objective = LogisticObjective::with_labels(data, targets, &standardizer, config.l2)?;
    let mut params = vec![0.0; objective.dim()];
    if let Some(m) = warm.filter(|m| m.coef.len() == data.dim()) {
        params[0] = m.intercept;
        params[1..].copy_from_slice(&m.coef);
    }
    let step = config.learning_rate / objective.curvature_bound();
    let mut grad = vec![0.0; params.len()];
    let mut epochs = 0;
    for epoch in 0..config.max_epochs {
        let loss = objective.loss_and_gradient(&params, &mut grad);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(FairError::Divergence { epoch });
        }
        if grad.iter().all(|g| g.abs() < config.grad_tol) {
            break;
        }
        for (b, g) in params.iter_mut().zip(&grad) {
            *b -= step * g;
        }
        epochs = epoch + 1;
    }
    if params.iter().any(|b| !b.is_finite()) {
        return Err(FairError::Divergence { epoch: epochs });
    }
    Ok(LogisticModel { standardizer, intercept: params[0], coef: params[1..].to_vec(), epochs_run: epochs })
}

/// How regression functions are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FitMode {
    /// One model of `η_a(x)` per group.
    GroupAware,
    /// `η^Y(x)`, `η^A(x)` and per-group models, for prediction without `a`.
    Blind,
}

/// Estimated regression functions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum ProbModel {
    /// `η̂_a`, indexed by group.
    GroupAware { groups: Vec<LogisticModel> },
    /// `η̂^Y`, with the optional `η̂^A` and per-group `η̂_a` used by blind
    /// weighting functions.
    Blind {
        label: LogisticModel,
        attribute: Option<LogisticModel>,
        groups: Option<Vec<LogisticModel>>,
    },
}

impl ProbModel {
    /// Regression estimate used for prediction.
    pub fn predict_proba(&self, x: &[f64], group: Option<u8>) -> Result<f64> {
        match self {
            ProbModel::GroupAware { groups } => {
                let a = group.ok_or_else(|| FairError::Invalid("group-aware model needs a group id".into()))?;
                let m = groups
                    .get(a as usize)
                    .ok_or_else(|| FairError::Invalid(format!("model has no group {a}")))?;
                Ok(m.predict_proba(x))
            }
            ProbModel::Blind { label, .. } => Ok(label.predict_proba(x)),
        }
    }

    /// `η̂_a(x)`, from per-group models.
    pub fn group_proba(&self, x: &[f64], a: u8) -> Result<f64> {
        let groups = match self {
            ProbModel::GroupAware { groups } => groups,
            ProbModel::Blind { groups: Some(g), .. } => g,
            ProbModel::Blind { groups: None, .. } => {
                return Err(FairError::Invalid("blind model carries no per-group estimates".into()))
            }
        };
        groups
            .get(a as usize)
            .map(|m| m.predict_proba(x))
            .ok_or_else(|| FairError::Invalid(format!("model has no group {a}")))
    }

    /// `η̂^A(x) = P(A = 1 | x)`.
    pub fn attribute_proba(&self, x: &[f64]) -> Result<f64> {
        match self {
            ProbModel::Blind { attribute: Some(m), .. } => Ok(m.predict_proba(x)),
            _ => Err(FairError::Invalid("model carries no attribute estimate".into())),
        }
    }
}

fn require_cells(data: &LabeledDataset, per_group: bool) -> Result<()> {
    let counts = data.cell_counts()?;
    if per_group {
        for (a, row) in counts.iter().enumerate() {
            for (y, &c) in row.iter().enumerate() {
                if c == 0 {
                    return Err(FairError::Estimation(format!("cell (a={a}, y={y}) is empty; cannot fit group {a}")));
                }
            }
        }
    } else {
        for y in 0..2 {
            if counts[0][y] + counts[1][y] == 0 {
                return Err(FairError::Estimation(format!("no rows with label {y}")));
            }
        }
        for (a, row) in counts.iter().enumerate() {
            if row[0] + row[1] == 0 {
                return Err(FairError::Estimation(format!("no rows in group {a}")));
            }
        }
    }
    Ok(())
}

fn group_rows(data: &LabeledDataset, a: u8) -> Vec<usize> {
    data.groups().iter().enumerate().filter(|(_, &g)| g == a).map(|(i, _)| i).collect()
}

/// Per-group fits `η̂_a`, optionally warm-started from `warm`.
pub fn fit_group_aware(data: &LabeledDataset, config: &LogisticConfig, warm: Option<&[LogisticModel]>) -> Result<Vec<LogisticModel>> {
    require_cells(data, true)?;
    (0..2u8)
        .map(|a| {
            let sub = data.subset(&group_rows(data, a));
            fit_logistic_warm(&sub, sub.labels(), config, warm.and_then(|w| w.get(a as usize)))
        })
        .collect()
}

/// Estimates regression functions in the requested mode.
pub fn fit_group_models(data: &LabeledDataset, mode: FitMode, config: &LogisticConfig) -> Result<ProbModel> {
    match mode {
        FitMode::GroupAware => Ok(ProbModel::GroupAware { groups: fit_group_aware(data, config, None)? }),
        FitMode::Blind => {
            require_cells(data, false)?;
            let label = fit_logistic_warm(data, data.labels(), config, None)?;
            let attribute = fit_logistic_warm(data, data.groups(), config, None)?;
            let groups = fit_group_aware(data, config, None).ok();
            Ok(ProbModel::Blind { label, attribute: Some(attribute), groups })
        }
    }
}
