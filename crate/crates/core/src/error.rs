use thiserror::Error;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or out-of-contract input.
    Input,
    /// A numerical routine failed (eigensolver, integrator, contour).
    Numerical,
    /// A localization statement was contradicted by the computation.
    Falsified,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("fiber matrix at t={t} is not Hermitian: relative deviation {deviation:e} exceeds {tolerance:e}")]
    NonHermitian { t: f64, deviation: f64, tolerance: f64 },

    #[error("Hermitian eigensolver did not converge (t={t}, size {size})")]
    EigenSolver { t: f64, size: usize },

    #[error("integrator step size underflow at x={x} for lambda={lambda}")]
    StepSizeUnderflow { lambda: String, x: f64 },

    #[error("integrator exceeded {steps} steps for lambda={lambda}")]
    TooManySteps { lambda: String, steps: usize },

    #[error("lambda={lambda} lies outside the monodromy window |lambda| <= {window:e}")]
    OutOfWindow { lambda: String, window: f64 },

    #[error("characteristic determinant vanishes on the contour near lambda={lambda}")]
    EndpointOnRoot { lambda: String },

    #[error("intervals {first} and {second} overlap at t={t}")]
    Overlap { first: String, second: String, t: f64 },

    #[error("at t={t}: {interval} holds {found} eigenvalues, expected {expected}")]
    Miscount {
        t: f64,
        interval: String,
        expected: usize,
        found: usize,
    },

    #[error("trusted window |lambda| <= {limit:e} at t={t} does not cover {what}")]
    TrustedWindow { t: f64, limit: f64, what: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse(_)
            | Error::Validation(_)
            | Error::Io { .. }
            | Error::Precondition(_)
            | Error::OutOfWindow { .. }
            | Error::NonHermitian { .. } => ErrorKind::Input,
            Error::EigenSolver { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::TooManySteps { .. }
            | Error::EndpointOnRoot { .. }
            | Error::TrustedWindow { .. } => ErrorKind::Numerical,
            Error::Overlap { .. } | Error::Miscount { .. } => ErrorKind::Falsified,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
