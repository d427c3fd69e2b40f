use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid shape {shape:?} for {len} values")]
    InvalidShape { shape: Vec<usize>, len: usize },

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{model} model is not supported by {op}")]
    UnsupportedModel {
        op: &'static str,
        model: &'static str,
    },

    #[error("non-finite value at step {step}: {what} (learning rate {lr:e}, gradient norm {grad_norm:e})")]
    NonFinite {
        step: usize,
        what: &'static str,
        lr: f64,
        grad_norm: f64,
    },

    #[error("design matrix is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfBounds { x: f64, y: f64 },

    #[error("intensity {value} at ({x}, {y}) exceeds the dominating rate {bound}")]
    IntensityExceedsBound { value: f64, bound: f64, x: f64, y: f64 },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("idx: {0}")]
    Idx(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } | Error::InvalidShape { .. } => "shape",
            Error::Domain { .. } => "domain",
            Error::Contract(_) => "contract",
            Error::UnsupportedModel { .. } => "unsupported_model",
            Error::NonFinite { .. } => "non_finite",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::IntensityExceedsBound { .. } => "intensity_bound",
            Error::InvalidConfig(_) => "config",
            Error::Idx(_) => "idx",
            Error::Csv(_) => "csv",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
