use thiserror::Error;

#[derive(Debug, Error)]
pub enum CamdpError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("model validation failed:\n{0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("chain structure error: {0}")]
    Structure(String),

    #[error("enumeration size {actual} exceeds cap {cap}; constrain the policy space (see the reduce module)")]
    SizeCap { actual: usize, cap: usize },

    #[error("no convergence within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        /// Joint policies visited before giving up, for diagnosis.
        partial: Vec<(Vec<usize>, Vec<usize>)>,
    },

    #[error("model generation failed: {0}")]
    Generation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("model file parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CamdpError>;
