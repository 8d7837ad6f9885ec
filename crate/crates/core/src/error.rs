use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{file}:{line}: {message}")]
    DataFile {
        file: String,
        line: usize,
        message: String,
    },

    #[error("propagation: Chebychev series not converged at step {step} (order {order}, residual {residual:e})")]
    ChebyshevConvergence {
        step: usize,
        order: usize,
        residual: f64,
    },

    #[error("propagation: dense diagonalization failed at step {step}")]
    Diagonalization { step: usize },

    #[error("spectral: Fredholm system singular or ill-conditioned (condition estimate {condition:e}, relative residual {residual:e})")]
    IllConditioned { condition: f64, residual: f64 },

    #[error("spectral: {0}")]
    Admissibility(AdmissibilityReport),

    #[error("krotov: monotonicity violated at iteration {iteration}: J = {current:.15e} > J_prev = {previous:.15e}")]
    MonotonicityViolation {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("analysis: imaginary residue {0:e} after band filtering")]
    ImaginaryResidue(f64),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

/// Why a filter bank fails the monotonicity conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// Index of the offending filter, if a single one is to blame.
    pub filter: Option<usize>,
    /// Smallest sampled value of the kernel spectrum.
    pub sampled_minimum: f64,
    pub frequency_at_minimum: f64,
    pub reason: String,
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "filter bank not admissible: {}", self.reason)?;
        if let Some(j) = self.filter {
            write!(f, " (filter #{j})")?;
        }
        write!(
            f,
            "; sampled minimum of kernel spectrum {:e} at omega = {:e} a.u.",
            self.sampled_minimum, self.frequency_at_minimum
        )
    }
}
