use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{routine} did not converge within {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NonConvergence {
        routine: &'static str,
        sweeps: usize,
        residual: f64,
    },

    /// An eigenvalue of the artanh argument sits at or beyond the margin floor.
    /// Almost always means the working precision is too low for the resolution.
    #[error(
        "spectrum out of range: min(1 - |lambda|) = {margin:e} is below the floor {floor:e} at {digits} digits; \
         rerun with more digits (e.g. --digits {suggested})"
    )]
    SpectrumOutOfRange {
        margin: f64,
        floor: f64,
        digits: u32,
        suggested: u32,
    },

    #[error("quadrature on [{a}, {b}] did not reach tolerance {tol:e} (estimated error {err:e})")]
    QuadratureFailure { a: f64, b: f64, tol: f64, err: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("slice leaves the peak lattice: {0}")]
    Index(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("could not bracket a root of z(y) = z({x}) in ({lo}, {hi})")]
    RootNotBracketed { x: f64, lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("malformed artifact {}: {msg}", path.display())]
    Malformed { path: PathBuf, msg: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI (and mirrored by the C status codes).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidRegion(_)
            | Error::ConfigMismatch(_)
            | Error::InvalidInput(_)
            | Error::Index(_) => 2,
            Error::SpectrumOutOfRange { .. } => 3,
            Error::NonConvergence { .. }
            | Error::QuadratureFailure { .. }
            | Error::RootNotBracketed { .. }
            | Error::Domain(_) => 4,
            Error::MissingArtifact(_) | Error::Malformed { .. } => 5,
            Error::Io { .. } => 6,
        }
    }
}
