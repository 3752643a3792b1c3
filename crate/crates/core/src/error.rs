use thiserror::Error;

pub type Result<T, E = ImitationError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ImitationError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("linear system is singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("degenerate weights: |sum(alpha)| = {sum:.3e} is below 1e-12")]
    DegenerateWeights { sum: f64 },

    #[error("weighted precision sum is singular (min singular value {min_singular:.3e})")]
    SingularPrecision { min_singular: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("point is off the manifold (deviation {deviation:.3e})")]
    OffManifold { deviation: f64 },

    #[error("vector is not tangent at the base point (deviation {deviation:.3e})")]
    NotTangent { deviation: f64 },

    #[error("points lie in each other's cut locus{}", .anchor.map(|i| format!(" (anchor {i})")).unwrap_or_default())]
    CutLocus { anchor: Option<usize> },

    #[error("need at least 2 demonstrations to estimate covariances, got {0}")]
    TooFewDemonstrations(usize),

    #[error("demonstration {demo} is misaligned at index {index}: {reason}")]
    Misaligned {
        demo: usize,
        index: usize,
        reason: &'static str,
    },

    #[error("input grids differ between superposed trajectories (trajectory {0})")]
    GridMismatch(usize),

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ImitationError {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Self::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short stable identifier, used by the command-line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DimensionMismatch { .. } => "dimension",
            Self::Empty(_) => "empty",
            Self::InvalidParameter { .. } => "parameter",
            Self::SingularSystem { .. } => "singular-system",
            Self::DegenerateWeights { .. } => "degenerate-weights",
            Self::SingularPrecision { .. } => "singular-precision",
            Self::NotSpd(_) => "not-spd",
            Self::OffManifold { .. } => "off-manifold",
            Self::NotTangent { .. } => "not-tangent",
            Self::CutLocus { .. } => "cut-locus",
            Self::TooFewDemonstrations(_) => "too-few-demos",
            Self::Misaligned { .. } => "misaligned",
            Self::GridMismatch(_) => "grid-mismatch",
            Self::Unsupported(_) => "unsupported",
            Self::Schema { .. } => "schema",
            Self::Json(_) => "json",
            Self::Io(_) => "io",
        }
    }
}
