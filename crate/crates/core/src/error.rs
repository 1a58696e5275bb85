use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain must contain at least one element")]
    EmptyDomain,

    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },

    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),

    #[error("length mismatch: domain has {expected} elements, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("non-finite probability {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, outside 1 ± 1e-9")]
    SumOutOfTolerance { sum: f64 },

    #[error("domain mismatch: {left} vs {right} elements")]
    DomainMismatch { left: usize, right: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("domain of size {n} exceeds enumeration limit {max}")]
    DomainTooLarge { n: usize, max: usize },

    #[error("index set has zero mass under p")]
    ZeroMassBucket,

    #[error("index {index} out of range for domain of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("sample count must be at least 1")]
    NoSamples,

    #[error("unknown loss {0:?}")]
    UnknownLoss(String),

    #[error("loss {loss} violates its analytic metadata at z = {z}: {what} (slack {slack:e})")]
    ViolationAt {
        loss: String,
        z: f64,
        what: &'static str,
        slack: f64,
    },

    #[error("rate C is undefined for loss {loss} at z = {z}")]
    MissingRate { loss: String, z: f64 },

    #[error("loss {loss} has growth exponent r = {r}, the bound needs r <= 1/2")]
    GrowthEnvelopeTooFast { loss: String, r: f64 },

    #[error("loss {0} takes negative values; the bound assumes a nonnegative f")]
    NegativeLoss(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),

    #[error("domain size {0} must be even")]
    OddDomain(usize),

    #[error("insufficient samples: have {got}, need {required}")]
    InsufficientSamples { required: u64, got: u64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid construction: {0}")]
    InvalidShape(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },

    #[error("word {0:?} contains symbols outside the model alphabet")]
    AlphabetMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
