use thiserror::Error;

/// Errors raised by the numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Domain { field: String, reason: String },

    #[error("operation requires a symmetric parameter set (equal chi, eps, gamma and kappa)")]
    Symmetry,

    #[error("closed-form propagator {method} does not apply to couplings {xi:?}")]
    MethodMismatch { method: &'static str, xi: [f64; 4] },

    #[error("degenerate covariance: optimisation denominator {denominator:e} is below {tolerance:e}")]
    DegenerateCovariance { denominator: f64, tolerance: f64 },

    #[error("no convergence by t = {t_max}: residual {residual:e} is not below {tol:e}")]
    NoConvergence { t_max: f64, residual: f64, tol: f64 },

    #[error("state is not a fixed point of the mean-field equations (residual {residual:e})")]
    NotAFixedPoint { residual: f64 },

    #[error("linearised system is unstable (largest real part {max_real:e})")]
    Unstable { max_real: f64 },

    #[error("trajectory diverged (|amplitude| = {magnitude:e})")]
    Diverged { magnitude: f64 },

    #[error("{diverged} of {total} trajectories diverged (limit 1%)")]
    TooManyDivergences { diverged: usize, total: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
}

impl Error {
    /// Short variant name, used for diagnostics on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "DomainError",
            Error::Symmetry => "SymmetryError",
            Error::MethodMismatch { .. } => "MethodMismatch",
            Error::DegenerateCovariance { .. } => "DegenerateCovariance",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotAFixedPoint { .. } => "NotAFixedPoint",
            Error::Unstable { .. } => "Unstable",
            Error::Diverged { .. } => "Diverged",
            Error::TooManyDivergences { .. } => "TooManyDivergences",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Config { .. } => "ConfigError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
