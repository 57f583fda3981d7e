use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed case or config: {0}")]
    Parse(#[source] serde_json::Error),

    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("quadratic term is not positive semidefinite (min eigenvalue {0:e})")]
    NotConvex(f64),

    #[error("no consensus contribution from area \"{0}\"")]
    MissingArea(String),

    #[error("{0}")]
    Infeasible(String),
}
