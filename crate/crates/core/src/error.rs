use thiserror::Error;

/// Errors raised by the simulation library.
///
/// Variants are grouped by the CLI exit code they map to: parameter problems,
/// physics guards, and numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("expectation value has imaginary part {imag:.3e}")]
    ComplexExpectation { imag: f64 },

    #[error("degenerate eigen-system: {0}")]
    Degenerate(String),

    #[error("physics guard `{guard}` violated: {detail}")]
    Guard { guard: &'static str, detail: String },

    #[error("frequency above detectable band: omega_ac = {omega_ac:.6} rad/us >= 2 Ex = {two_ex:.6} rad/us")]
    AboveBand { omega_ac: f64, two_ex: f64 },

    #[error("step guard violated: dt = {dt:.3e} us, f_max = {f_max:.6} rad/us, need dt <= {limit:.3e} us")]
    StepGuard { dt: f64, f_max: f64, limit: f64 },

    #[error("norm drift {drift:.3e} at t = {t:.6} us exceeds tolerance")]
    NormDrift { drift: f64, t: f64 },

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } => ErrorKind::Config,
            Error::Guard { .. } | Error::AboveBand { .. } | Error::StepGuard { .. } => {
                ErrorKind::Guard
            }
            Error::Trajectory { source, .. } => source.kind(),
            Error::NotHermitian { .. }
            | Error::ComplexExpectation { .. }
            | Error::Degenerate(_)
            | Error::NormDrift { .. }
            | Error::Fit(_) => ErrorKind::Numerical,
        }
    }

    /// Name of the violated guard, for guard errors.
    pub fn guard_name(&self) -> Option<&'static str> {
        match self {
            Error::Guard { guard, .. } => Some(guard),
            Error::AboveBand { .. } => Some("band"),
            Error::StepGuard { .. } => Some("step"),
            Error::Trajectory { source, .. } => source.guard_name(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Guard,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
