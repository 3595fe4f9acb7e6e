use thiserror::Error;

/// Unified error type for every stage of the codec.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed PLY or camera-list input.
    #[error("parse error: {0}")]
    Parse(String),

    /// Input is well-formed but missing a required property.
    #[error("schema error: missing required property `{0}`")]
    Schema(String),

    /// Non-finite or otherwise invalid data value.
    #[error("data error: {context} at index {index}")]
    Data { context: String, index: usize },

    /// Value outside the declared quantization range.
    #[error("range error: value {value} outside [{min}, {max}] at index {index}")]
    Range {
        value: f64,
        min: f64,
        max: f64,
        index: usize,
    },

    /// Quantization range has zero width.
    #[error("degenerate range: f_max == f_min ({0})")]
    DegenerateRange(f64),

    /// Quantized code outside the representable interval.
    #[error("code error: code {code} outside [0, {max}] at index {index}")]
    Code { code: i64, max: u64, index: usize },

    /// Ridge fit denominator collapsed to zero.
    #[error("singular fit: Var_q + lambda == 0")]
    SingularFit,

    /// Not enough points for the requested neighborhood size.
    #[error("insufficient points: need more than {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    /// Cloud has zero spatial extent and cannot be scaled.
    #[error("degenerate cloud: zero extent after centering")]
    DegenerateCloud,

    /// Pruning would remove every primitive.
    #[error("prune error: cannot remove {count} of {n} primitives")]
    PruneAll { count: usize, n: usize },

    /// Pruning schedule cannot fit a single event.
    #[error("schedule error: {0}")]
    Schedule(String),

    /// Rate target cannot be met by the requested planner.
    #[error("infeasible rate: {0}")]
    InfeasibleRate(String),

    /// Mismatched array shapes between aligned inputs.
    #[error("shape error: {0}")]
    Shape(String),

    /// Duplicate voxel positions where uniqueness is required.
    #[error("duplicate position {pos:?}")]
    Duplicate { pos: [i64; 3] },

    /// Bitstream failed structural validation.
    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    /// Container fields disagree with each other.
    #[error("inconsistent stream field: {0}")]
    Consistency(String),

    /// Too few samples for the requested analysis.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Iterative fit produced a non-finite loss.
    #[error("fit diverged: {0} (try a smaller step size)")]
    Divergence(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// An error labeled with the pipeline stage it came from.
    #[error("{stage}: {source}")]
    Staged {
        stage: &'static str,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches a pipeline stage label.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Staged {
            stage,
            source: Box::new(self),
        }
    }

    /// The underlying error, unwrapping any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Staged { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
