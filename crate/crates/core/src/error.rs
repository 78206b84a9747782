use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("quadrature needs at least {required} nodes, got {got}")]
    QuadratureTooSmall { required: usize, got: usize },

    #[error("invalid grid discretization: {0}")]
    InvalidGrid(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("degenerate spectrum: trace is zero")]
    DegenerateSpectrum,

    #[error("matrix is not symmetric: max asymmetry {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigensolver did not converge within {budget} {unit}")]
    NoConvergence { budget: usize, unit: &'static str },

    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error(
        "spectrum too short: {listed} eigenvalues listed, unresolved tail mass {tail_mass:e} \
         exceeds the required threshold {threshold:e}"
    )]
    InsufficientSpectrum {
        listed: usize,
        tail_mass: f64,
        threshold: f64,
    },

    #[error("precision: {0}")]
    Precision(String),

    #[error("size: {0}")]
    Size(String),

    #[error("eigenfunction means are required but missing")]
    MissingMeans,

    #[error("secular root bracketing failed on ({lo:e}, {hi:e})")]
    Bracketing { lo: f64, hi: f64 },

    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Precision-class failures: the answer exists but cannot be decided at
    /// the available resolution.
    pub fn is_precision(&self) -> bool {
        matches!(
            self,
            Error::Precision(_) | Error::InsufficientSpectrum { .. }
        )
    }
}
