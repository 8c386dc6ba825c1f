//! JSON description of a two-group Gaussian model.

use std::fs;
use std::path::Path;

use fairbayes_core::{GaussianModel, GroupStats};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell probabilities `[a][y]` of the built-in synthetic setting.
pub const SYNTHETIC_STATS: [[f64; 2]; 2] = [[0.18, 0.12], [0.21, 0.49]];
pub const SYNTHETIC_DIM: usize = 10;
pub const SYNTHETIC_SIGMA: f64 = 1.0;
/// Seed of the class means. Every disparity of the resulting model exceeds
/// 0.44 at the unconstrained rule, so δ up to 0.3 always binds, and the two
/// groups have nearly equal class separation, so their ROC curves come
/// within 0.004 of each other and equalized odds is attainable at small δ.
pub const SYNTHETIC_MEAN_SEED: u64 = 316;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    /// `P(A = a, Y = y)`, indexed `[a][y]`.
    pub p_ay: [[f64; 2]; 2],
    /// Class means, indexed `[a][y]`.
    pub mu_ay: [[Vec<f64>; 2]; 2],
    pub sigma: f64,
    /// Seed the means were drawn with, when generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelFile {
    /// Means drawn from `Unif(0, 1)` coordinates with the given seed.
    pub fn generated(p_ay: [[f64; 2]; 2], dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        let model = GaussianModel::with_uniform_means(GroupStats::new(p_ay)?, dim, sigma, seed)?;
        let mean = |a: u8, y: u8| model.mean(a, y).to_vec();
        Ok(ModelFile {
            p_ay,
            mu_ay: [[mean(0, 0), mean(0, 1)], [mean(1, 0), mean(1, 1)]],
            sigma,
            seed: Some(seed),
        })
    }

    pub fn synthetic() -> Self {
        Self::generated(SYNTHETIC_STATS, SYNTHETIC_DIM, SYNTHETIC_SIGMA, SYNTHETIC_MEAN_SEED)
            .expect("built-in synthetic model is valid")
    }

    pub fn to_model(&self) -> Result<GaussianModel> {
        Ok(GaussianModel::new(GroupStats::new(self.p_ay)?, self.mu_ay.clone(), self.sigma)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}
