use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),

    #[error("zero marginal density at y = {0}")]
    ZeroDensity(f64),

    #[error("zero label posterior in a denominator (observation {0})")]
    ZeroPosterior(usize),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("non-finite objective value at {0:?}")]
    NonFinite(Vec<f64>),

    #[error("inadmissible estimator configuration: {0}")]
    Inadmissible(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InfeasibleParams(_) => "infeasible_params",
            Error::ZeroDensity(_) => "zero_density",
            Error::ZeroPosterior(_) => "zero_posterior",
            Error::DegenerateSample(_) => "degenerate_sample",
            Error::Quadrature(_) => "quadrature",
            Error::NonFinite(_) => "non_finite",
            Error::Inadmissible(_) => "inadmissible",
            Error::InvalidInput(_) => "invalid_input",
            Error::Optimizer(_) => "optimizer",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
