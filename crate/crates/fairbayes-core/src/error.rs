use alloc::string::String;

/// Errors raised by the fairness solvers, estimators and pipelines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FairError {
    /// A parameter fell outside the interval where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The disparity target cannot be reached inside the search bracket.
    #[error("target disparity {target} unreachable in bracket [{lo}, {hi}] (D = {value} at the edge)")]
    Bracket { lo: f64, hi: f64, target: f64, value: f64 },
    /// Input data or parameters are malformed.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A quantity cannot be estimated because a conditioning cell is empty.
    #[error("estimation error: {0}")]
    Estimation(String),
    /// A joint constraint system has no sign change to bisect on.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A group's score distribution has no continuous part to invert.
    #[error("group {group} is degenerate: {reason}")]
    Degenerate { group: usize, reason: String },
    /// Gradient descent produced a non-finite loss.
    #[error("logistic fit diverged at epoch {epoch}; try a smaller learning rate")]
    Divergence { epoch: usize },
    /// The exhaustive oracle was asked for more atoms than it enumerates.
    #[error("oracle refuses {atoms} atoms (cap {cap})")]
    TooLarge { atoms: usize, cap: usize },
}

pub type Result<T> = core::result::Result<T, FairError>;
