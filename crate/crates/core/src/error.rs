use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The OPO is pumped at or above threshold, so the correlation kernels diverge.
    #[error("epsilon = {epsilon} is not below threshold gamma/2 = {half_gamma}")]
    AboveThreshold { epsilon: f64, half_gamma: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The time grid does not hold enough of a mode function's weight.
    #[error("time grid truncates the mode function: captured norm {captured} < {required}")]
    GridTruncation { captured: f64, required: f64 },

    #[error("mode functions are sampled on different time grids")]
    GridMismatch,

    #[error("mode function is not unit norm (norm = {norm})")]
    NotNormalized { norm: f64 },

    /// The conditioning event has zero probability (no photons, or no detector).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{what} of size {size} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// An annihilator precedes a creator of the same field at the same instant,
    /// which would contract to a delta function.
    #[error("singular contraction between equal-time operators at t = {time}")]
    SingularContraction { time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error stems from bad user input rather than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::AboveThreshold { .. }
                | Error::InvalidParameter { .. }
                | Error::GridMismatch
                | Error::NotNormalized { .. }
                | Error::TooLarge { .. }
        )
    }
}
