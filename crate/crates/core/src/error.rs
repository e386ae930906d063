use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or network shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A configuration value violates its contract.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A class label is outside `0..num_classes`.
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    /// A batch-level operation received no examples.
    #[error("empty batch")]
    EmptyBatch,

    /// A relative-distance measure was asked for against a zero-norm layer.
    #[error("degenerate anchor: layer {layer} has zero Frobenius norm")]
    DegenerateAnchor { layer: usize },

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: u64 },

    /// A text file (dataset, snapshot, noise record) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs or configuration rather than by
    /// the run itself; CLI layers map these to a distinct exit code.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(self, Error::Divergence { .. } | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
