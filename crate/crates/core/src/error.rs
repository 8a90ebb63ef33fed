use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("message index {message} out of range 1..={messages}")]
    InvalidMessage { message: usize, messages: usize },

    #[error("power must be positive, got {0} mW")]
    NonPositivePower(f64),

    #[error("distance {distance} m is below the minimum of {min} m")]
    DistanceBelowMinimum { distance: f64, min: f64 },

    #[error("channel input is not unit-power: mean symbol power {power_per_symbol}")]
    UnnormalizedInput { power_per_symbol: f64 },

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("backward pass requested without a recorded forward pass")]
    BackwardWithoutForward,

    #[error("non-finite gradient entry {value} at flat index {index}")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("non-finite parameter {value} at flat index {index}")]
    NonFiniteParameter { index: usize, value: f64 },

    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),

    #[error("non-finite training loss {loss} at stage {stage}, step {step} (lr {lr})")]
    NonFiniteLoss {
        stage: usize,
        step: u64,
        lr: f64,
        loss: f64,
    },

    #[error("encoder power constraint violated for message {message}: |x|^2 = {power}, expected {expected}")]
    PowerConstraint {
        message: usize,
        power: f64,
        expected: f64,
    },

    #[error("invalid training schedule: {0}")]
    InvalidSchedule(String),

    /// `reason` is a full sentence naming the key.
    #[error("invalid config: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("model has {what} = {model}, but the requested scenario has {what} = {requested}")]
    ModelDimension {
        what: &'static str,
        model: usize,
        requested: usize,
    },

    #[error("reports come from different scenarios ({expected} vs {found})")]
    MismatchedScenarios { expected: String, found: String },

    #[error("trials per message must be at least 1")]
    ZeroTrials,

    #[error("training log is empty")]
    EmptyLog,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
