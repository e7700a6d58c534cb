use thiserror::Error;

/// Errors raised by lattice construction, basis handling, evolution and the
/// verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("lattice is disconnected: site {0} is unreachable from site 0")]
    Disconnected(usize),

    #[error("site {site} out of range for a lattice of {num_sites} sites")]
    SiteOutOfRange { site: usize, num_sites: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error("state is not in the basis: {0}")]
    NotInBasis(String),

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("incompatible basis: {0}")]
    IncompatibleBasis(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time grid: {0}")]
    InvalidGrid(String),

    #[error("integrator failed to converge at t = {time}: residual estimate {residual:e}")]
    Convergence { time: f64, residual: f64 },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ResourceLimit(_) => 3,
            Error::Convergence { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
