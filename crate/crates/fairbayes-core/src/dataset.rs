//! Row-major labelled data with a protected group per row.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::disparity::GroupStats;
use crate::error::{FairError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    groups: Vec<u8>,
    labels: Vec<u8>,
    weights: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(dim: usize) -> Self {
        LabeledDataset { dim, features: Vec::new(), groups: Vec::new(), labels: Vec::new(), weights: Vec::new() }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        LabeledDataset {
            dim,
            features: Vec::with_capacity(dim * rows),
            groups: Vec::with_capacity(rows),
            labels: Vec::with_capacity(rows),
            weights: Vec::with_capacity(rows),
        }
    }

    pub fn push(&mut self, x: &[f64], group: u8, label: u8) -> Result<()> {
        self.push_weighted(x, group, label, 1.0)
    }

    pub fn push_weighted(&mut self, x: &[f64], group: u8, label: u8, weight: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(FairError::Invalid(format!("row has {} features, expected {}", x.len(), self.dim)));
        }
        if label > 1 {
            return Err(FairError::Invalid(format!("label {label} is not binary")));
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(FairError::Invalid(format!("weight {weight} must be finite and non-negative")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FairError::Invalid("features must be finite".into()));
        }
        self.features.extend_from_slice(x);
        self.groups.push(group);
        self.labels.push(label);
        self.weights.push(weight);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.len() {
            return Err(FairError::Invalid("weight vector length differs from row count".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(FairError::Invalid("weights must be finite and non-negative".into()));
        }
        self.weights = weights;
        Ok(())
    }

    /// Number of distinct group ids, taken as `max id + 1`.
    pub fn num_groups(&self) -> usize {
        self.groups.iter().copied().max().map_or(0, |g| g as usize + 1)
    }

    /// Fails unless every group id is 0 or 1.
    pub fn require_binary_groups(&self) -> Result<()> {
        match self.groups.iter().position(|&g| g > 1) {
            Some(i) => Err(FairError::Invalid(format!("row {i} has non-binary group {}", self.groups[i]))),
            None => Ok(()),
        }
    }

    /// Row counts per `[a][y]` cell for binary groups.
    pub fn cell_counts(&self) -> Result<[[usize; 2]; 2]> {
        self.require_binary_groups()?;
        let mut c = [[0usize; 2]; 2];
        for (&a, &y) in self.groups.iter().zip(&self.labels) {
            c[a as usize][y as usize] += 1;
        }
        Ok(c)
    }

    /// Plug-in `n_{a,y} / n` statistics.
    pub fn stats(&self) -> Result<GroupStats> {
        GroupStats::from_counts(self.cell_counts()?)
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut out = LabeledDataset::with_capacity(self.dim, rows.len());
        for &i in rows {
            out.features.extend_from_slice(self.row(i));
            out.groups.push(self.groups[i]);
            out.labels.push(self.labels[i]);
            out.weights.push(self.weights[i]);
        }
        out
    }

    /// Seeded shuffle into `(train, test)` with `round(n·train_fraction)`
    /// training rows.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(FairError::Invalid(format!("split fraction {train_fraction} must lie in (0, 1)")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (self.len() as f64 * train_fraction + 0.5) as usize;
        let (tr, te) = idx.split_at(n_train.min(self.len()));
        Ok((self.subset(tr), self.subset(te)))
    }
}
