use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside the unit box at coordinate {index} (value {value})")]
    OutOfBox { index: usize, value: f64 },

    #[error("{what} did not converge within {cap} iterations")]
    IterationCap { what: &'static str, cap: usize },

    #[error("dimension {dim} too large for {mode} (max {max})")]
    DimensionTooLarge {
        dim: usize,
        max: usize,
        mode: &'static str,
    },

    #[error("infeasible learner action at round {round}")]
    InfeasibleAction { round: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
