use std::fmt;

/// Process exit codes. Usage errors are reported by clap with code 2.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const SCHEMA: i32 = 4;
    /// The optimizer did not converge; every output was still written.
    pub const NOT_CONVERGED: i32 = 5;
    /// Estimation broke down numerically (non-finite predictor, singular information).
    pub const NUMERICAL: i32 = 6;
    pub const INTERNAL: i32 = 70;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Input,
    Schema,
    NotConverged,
    Numerical,
    Internal,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Input => exit::INPUT,
            Kind::Schema => exit::SCHEMA,
            Kind::NotConverged => exit::NOT_CONVERGED,
            Kind::Numerical => exit::NUMERICAL,
            Kind::Internal => exit::INTERNAL,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(kind: Kind, source: impl Into<anyhow::Error>) -> Self {
        Self { kind, source: source.into() }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Self::new(Kind::Input, anyhow::anyhow!("{msg}"))
    }

    pub fn schema(msg: impl fmt::Display) -> Self {
        Self::new(Kind::Schema, anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self { kind: self.kind, source: self.source.context(msg) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<ularma::Error> for CliError {
    fn from(e: ularma::Error) -> Self {
        use ularma::Error as E;
        let kind = match e {
            E::NonFinite(_) | E::SingularInformation => Kind::Numerical,
            _ => Kind::Input,
        };
        Self::new(kind, e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(Kind::Input, e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Self::new(Kind::Input, e)
        } else {
            Self::new(Kind::Internal, e)
        }
    }
}

/// Tags any error as an internal fault.
pub trait Internal<T> {
    fn internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Internal<T> for std::result::Result<T, E> {
    fn internal(self) -> CliResult<T> {
        self.map_err(|e| CliError::new(Kind::Internal, e))
    }
}
