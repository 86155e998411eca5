use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A violated modelling assumption on a composite transfer function or a
/// network. These are configuration problems, never runtime accidents.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssumptionViolation {
    #[error("zero {zero} cancels pole {pole}")]
    Cancellation { pole: Complex64, zero: Complex64 },
    #[error("poles {first} and {second} coincide; all poles must be simple")]
    RepeatedPole { first: Complex64, second: Complex64 },
    #[error("transfer function is not strictly proper ({poles} poles, {zeros} zeros)")]
    NotStrictlyProper { poles: usize, zeros: usize },
    #[error("dominant pole is not unique: |{first}| and |{second}| are both maximal")]
    NonUniqueDominantPole { first: Complex64, second: Complex64 },
    #[error("pole {pole} lies outside the unit circle (|p| = {modulus})")]
    UnstablePole { pole: Complex64, modulus: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} in {context}")]
    NonFinite { context: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("assumption violated: {0}")]
    Assumption(#[from] AssumptionViolation),

    #[error("root finder did not converge for polynomial with coefficients {coeffs:?}")]
    RootFinding { coeffs: Vec<f64> },

    #[error("graph generation failed: {0}")]
    Generation(String),

    #[error("invalid network: {0}")]
    Network(String),

    #[error("degenerate detection problem: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}:{line}:{column}: {message}\n    {context}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
        context: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for anything the
    /// user can fix in the config, 3 for runtime and numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Assumption(_)
            | Error::Generation(_)
            | Error::Network(_)
            | Error::Degenerate(_)
            | Error::Config(_)
            | Error::Parse { .. }
            | Error::Argument(_) => 2,
            Error::NonFinite { .. }
            | Error::RootFinding { .. }
            | Error::Numeric(_)
            | Error::Io(_)
            | Error::Json(_) => 3,
        }
    }
}

pub(crate) fn ensure_finite(context: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { context, value })
    }
}
