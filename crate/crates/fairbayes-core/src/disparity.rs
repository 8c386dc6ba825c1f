//! Disparity algebra: group statistics, bilinear weights, group-wise
//! thresholds, cost weights and plug-in disparity estimation.

use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::error::{FairError, Result};

/// `+1` for the advantaged group `a = 1`, `-1` for `a = 0`.
#[inline]
pub(crate) fn group_sign(a: u8) -> f64 {
    if a == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Which group-conditional rate the disparity compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DisparityKind {
    /// Difference in acceptance rates (DD).
    #[cfg_attr(feature = "serde", serde(rename = "dd"))]
    DemographicParity,
    /// Difference in true-positive rates (DO).
    #[cfg_attr(feature = "serde", serde(rename = "do"))]
    EqualOpportunity,
    /// Difference in false-positive rates (PD).
    #[cfg_attr(feature = "serde", serde(rename = "pd"))]
    PredictiveEquality,
}

impl DisparityKind {
    pub const ALL: [DisparityKind; 3] = [
        DisparityKind::DemographicParity,
        DisparityKind::EqualOpportunity,
        DisparityKind::PredictiveEquality,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            DisparityKind::DemographicParity => "dd",
            DisparityKind::EqualOpportunity => "do",
            DisparityKind::PredictiveEquality => "pd",
        }
    }

    /// Natural domain of the threshold offset `t`, on which every group
    /// threshold stays inside `[0, 1]`.
    pub fn domain(self, stats: &GroupStats) -> (f64, f64) {
        match self {
            DisparityKind::DemographicParity => {
                let m = stats.group(1).min(stats.group(0));
                (-m, m)
            }
            DisparityKind::EqualOpportunity => (-stats.cell(0, 1), stats.cell(1, 1)),
            DisparityKind::PredictiveEquality => (-stats.cell(1, 0), stats.cell(0, 0)),
        }
    }
}

impl fmt::Display for DisparityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for DisparityKind {
    type Err = FairError;

    fn from_str(s: &str) -> Result<Self> {
        DisparityKind::ALL
            .into_iter()
            .find(|k| k.short_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FairError::Invalid(format!("unknown disparity kind `{s}`")))
    }
}

/// Joint probabilities of protected group and label, indexed `[a][y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]"))]
pub struct GroupStats {
    p: [[f64; 2]; 2],
}

impl GroupStats {
    /// Builds stats from a `[a][y]` table; every cell must be positive and
    /// the table must sum to one.
    pub fn new(p: [[f64; 2]; 2]) -> Result<Self> {
        for (a, row) in p.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(FairError::Invalid(format!(
                        "cell (a={a}, y={y}) has probability {v}; all cells must be positive"
                    )));
                }
            }
        }
        let total: f64 = p.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FairError::Invalid(format!("cell probabilities sum to {total}, not 1")));
        }
        Ok(GroupStats { p })
    }

    /// Plug-in stats `n_{a,y} / n`. Empty cells are rejected.
    pub fn from_counts(counts: [[usize; 2]; 2]) -> Result<Self> {
        let n: usize = counts.iter().flatten().sum();
        let mut p = [[0.0; 2]; 2];
        for a in 0..2 {
            for y in 0..2 {
                if counts[a][y] == 0 {
                    return Err(FairError::Estimation(format!("no samples in cell (a={a}, y={y})")));
                }
                p[a][y] = counts[a][y] as f64 / n as f64;
            }
        }
        // Normalise away the rounding of the four divisions.
        let total: f64 = p.iter().flatten().sum();
        for row in p.iter_mut() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        GroupStats::new(p)
    }

    /// `P(A = a, Y = y)`.
    #[inline]
    pub fn cell(&self, a: u8, y: u8) -> f64 {
        self.p[a as usize][y as usize]
    }

    /// `P(A = a)`.
    #[inline]
    pub fn group(&self, a: u8) -> f64 {
        self.p[a as usize][0] + self.p[a as usize][1]
    }

    pub fn table(&self) -> [[f64; 2]; 2] {
        self.p
    }
}

impl TryFrom<[[f64; 2]; 2]> for GroupStats {
    type Error = FairError;

    fn try_from(p: [[f64; 2]; 2]) -> Result<Self> {
        GroupStats::new(p)
    }
}

impl From<GroupStats> for [[f64; 2]; 2] {
    fn from(s: GroupStats) -> Self {
        s.p
    }
}

/// Per-group affine weighting `w(η, a) = slope[a]·η + offset[a]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BilinearSpec {
    pub slope: [f64; 2],
    pub offset: [f64; 2],
}

impl BilinearSpec {
    #[inline]
    pub fn weight(&self, eta: f64, a: u8) -> f64 {
        self.slope[a as usize] * eta + self.offset[a as usize]
    }

    /// Threshold on `η` of the rule `η > 1/2 + (t/2)·w(η, a)`.
    pub fn threshold(&self, a: u8, t: f64) -> Result<f64> {
        let s = self.slope[a as usize];
        let b = self.offset[a as usize];
        let den = 2.0 - t * s;
        if !(den > 0.0) {
            return Err(FairError::Domain(format!(
                "threshold denominator 2 - t*s = {den} is not positive for group {a} at t = {t}"
            )));
        }
        Ok((1.0 + t * b) / den)
    }

    /// Threshold of the cost-sensitive rule `η > c + t·w(η, a)`.
    pub fn cost_sensitive_threshold(&self, a: u8, t: f64, c: f64) -> Result<f64> {
        let s = self.slope[a as usize];
        let b = self.offset[a as usize];
        let den = 1.0 - t * s;
        if !(den > 0.0) {
            return Err(FairError::Domain(format!(
                "cost-sensitive denominator 1 - t*s = {den} is not positive for group {a} at t = {t}"
            )));
        }
        Ok((c + t * b) / den)
    }
}

/// Weighting coefficients under which the disparity is `E[f·w(η, A)]`.
pub fn bilinear_coeffs(kind: DisparityKind, stats: &GroupStats) -> BilinearSpec {
    let mut slope = [0.0; 2];
    let mut offset = [0.0; 2];
    for a in 0..2u8 {
        let sg = group_sign(a);
        let i = a as usize;
        match kind {
            DisparityKind::DemographicParity => offset[i] = sg / stats.group(a),
            DisparityKind::EqualOpportunity => slope[i] = sg / stats.cell(a, 1),
            DisparityKind::PredictiveEquality => {
                slope[i] = -sg / stats.cell(a, 0);
                offset[i] = sg / stats.cell(a, 0);
            }
        }
    }
    BilinearSpec { slope, offset }
}

/// Group threshold `H_a(t)` of the fair Bayes-optimal rule `η_a(x) > H_a(t)`.
pub fn threshold(kind: DisparityKind, stats: &GroupStats, a: u8, t: f64) -> Result<f64> {
    bilinear_coeffs(kind, stats).threshold(a, t)
}

/// Misclassification cost `c_{a,y}(t)`: `H` for `y = 0`, `1 - H` for `y = 1`.
pub fn cost_weights(kind: DisparityKind, stats: &GroupStats, a: u8, y: u8, t: f64) -> Result<f64> {
    let h = threshold(kind, stats, a, t)?;
    Ok(if y == 1 { 1.0 - h } else { h })
}

/// One scored prediction: group, regression estimate and accept probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionRecord {
    pub group: u8,
    pub eta: f64,
    pub decision: f64,
}

/// Plug-in disparity `(1/n)·Σ f_i·ŵ(η̂_i, a_i)`.
pub fn empirical_disparity(
    kind: DisparityKind,
    stats: &GroupStats,
    records: &[PredictionRecord],
) -> Result<f64> {
    let mut seen = [false; 2];
    for r in records {
        if r.group > 1 {
            return Err(FairError::Invalid(format!("group id {} is not binary", r.group)));
        }
        seen[r.group as usize] = true;
    }
    if let Some(a) = seen.iter().position(|s| !s) {
        return Err(FairError::Estimation(format!("group {a} has no records; disparity undefined")));
    }
    let spec = bilinear_coeffs(kind, stats);
    let total: f64 = records.iter().map(|r| r.decision * spec.weight(r.eta, r.group)).sum();
    Ok(total / records.len() as f64)
}
