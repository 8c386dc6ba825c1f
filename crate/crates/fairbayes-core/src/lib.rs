//! Bayes-optimal classification under bounded group disparity.
//!
//! Disparities that are bilinear in the decision rule (demographic parity,
//! equal opportunity, predictive equality) have optimal `δ`-fair classifiers
//! of the form `1{η_a(x) > H_a(t)}` for a single scalar offset `t`. This crate
//! computes that offset for closed-form Gaussian models, for finite
//! distributions (exactly, with randomization on ties), and from data.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod algorithms;
pub mod dataset;
pub mod discrete;
pub mod disparity;
pub mod error;
pub mod estimators;
pub mod extensions;
pub mod gaussian;
pub mod math;
pub mod solver;

pub use dataset::LabeledDataset;
pub use disparity::{BilinearSpec, DisparityKind, GroupStats, PredictionRecord};
pub use error::{FairError, Result};
pub use gaussian::{GaussianModel, GroupGaussian};
pub use solver::{solve_threshold, DisparityCurve, SolveResult, DEFAULT_TOL};
