use thiserror::Error;

/// Errors produced by the spectral alignment library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("signal of length {length} is shorter than the segment size {filter_size}")]
    LengthTooShort { length: usize, filter_size: usize },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("channel mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("filter of {taps} taps is longer than signal of length {length}")]
    FilterLongerThanSignal { taps: usize, length: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("parameter `{name}` out of range: {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("PSD entry must be strictly positive and finite, found {0}")]
    NonPositivePsd(f64),

    #[error(
        "imaginary leakage {residual:e} in filter synthesis exceeds tolerance (asymmetric PSD?)"
    )]
    ImagLeakage { residual: f64 },

    #[error("dense Monge oracle limited to length <= {max}, got {length}")]
    TooLargeForDense { length: usize, max: usize },

    #[error("eval mode requires a running barycenter")]
    EvalWithoutBarycenter,

    #[error("eval mode requires running statistics from at least one training pass")]
    EvalWithoutStats,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
