use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum DctError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("layer {layer}: expected input dim {expected}, got {got}")]
    LayerDimension {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("label {label} out of range [0, {num_classes})")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("batch normalization in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("row {row} has near-zero norm {norm:e}")]
    ZeroNormRow { row: usize, norm: f64 },
    #[error("non-finite gradient in parameter block {0}")]
    NonFiniteGradient(usize),
    #[error("non-finite loss at lr {lr}, epoch {epoch}, batch {batch}")]
    NonFiniteLoss { lr: f64, epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("infeasible sampling: {0}")]
    InfeasibleSampler(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("need at least 2 distinct labels, found {0}")]
    TooFewLabels(usize),
    #[error("k = {k} must be below the number of points {n}")]
    InvalidK { k: usize, n: usize },
    #[error("gradient check failed for {0}")]
    GradientCheckFailed(String),
    #[error("malformed csv: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DctError>;

impl DctError {
    /// Stable snake_case tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            DctError::ShapeMismatch { .. } => "shape_mismatch",
            DctError::LayerDimension { .. } => "layer_dimension",
            DctError::LabelOutOfRange { .. } => "label_out_of_range",
            DctError::BatchTooSmall(_) => "batch_too_small",
            DctError::ZeroNormRow { .. } => "zero_norm_row",
            DctError::NonFiniteGradient(_) => "non_finite_gradient",
            DctError::NonFiniteLoss { .. } => "non_finite_loss",
            DctError::InvalidConfig(_) => "invalid_config",
            DctError::InfeasibleSampler(_) => "infeasible_sampler",
            DctError::EmptyInput(_) => "empty_input",
            DctError::TooFewLabels(_) => "too_few_labels",
            DctError::InvalidK { .. } => "invalid_k",
            DctError::GradientCheckFailed(_) => "gradient_check_failed",
            DctError::Format(_) => "format",
            DctError::Csv(_) => "csv",
            DctError::Io(_) => "io",
            DctError::Json(_) => "json",
        }
    }
}
