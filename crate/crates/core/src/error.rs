use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("refusing to materialize a {rows}x{cols} operator (limit {limit} columns)")]
    TooLargeToMaterialize { rows: usize, cols: usize, limit: usize },

    #[error("solver diverged at iteration {iteration}: non-finite value encountered")]
    Diverged { iteration: usize },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
