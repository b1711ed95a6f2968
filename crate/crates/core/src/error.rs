use thiserror::Error;

/// Errors raised by the model primitives and the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conditional information matrix is singular")]
    SingularInformation,

    #[error("coefficient {0} is fixed at zero and has no standard error")]
    FixedCoefficient(usize),

    #[error("non-finite linear predictor at t = {0}")]
    NonFinite(usize),

    #[error("residuals are degenerate (zero variance)")]
    DegenerateResiduals,

    #[error("autoregressive polynomial has no nonzero coefficient")]
    NoArPart,

    #[error("future covariates are required for {0} step(s) ahead")]
    MissingCovariates(usize),

    #[error("sample of size {n} is too short: need at least {needed}")]
    TooShort { n: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_open_unit(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "(0, 1)",
        })
    }
}
