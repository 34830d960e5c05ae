use std::fmt;
use std::process::ExitCode;

/// Top-level failure, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config file or inputs (exit 2).
    Config(String),
    /// Solver or trainer failure (exit 3).
    Numerical(String),
    /// Anything else, mostly I/O (exit 1).
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Numerical(_) => ExitCode::from(3),
            Failure::Other(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "configuration error: {msg}"),
            Failure::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Failure::Other(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<wide2nn::Error> for Failure {
    fn from(err: wide2nn::Error) -> Self {
        use wide2nn::Error as E;
        match err {
            E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::EmptyDataset | E::SingleClass | E::Parse(_) => {
                Failure::Config(err.to_string())
            }
            E::NotConverged { .. } | E::NonFinite { .. } | E::ZeroMass | E::ZeroFeatures => {
                Failure::Numerical(err.to_string())
            }
            E::Io(_) | E::Csv(_) => Failure::Other(err.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure::Other(err)
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::Other(err.into())
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Config(msg.into()))
}
