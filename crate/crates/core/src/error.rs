use thiserror::Error;

/// Errors raised by the homomorphic-vector layer.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FheError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{len} values do not fit in {slots} slots")]
    Capacity { len: usize, slots: usize },
    #[error("ciphertext was produced under a different key or parameter set")]
    KeyMismatch,
    #[error("operand parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("multiplicative depth {needed} exceeds budget {budget}")]
    NoiseExhausted { needed: u32, budget: u32 },
    #[error("row rotation offset {offset} out of range [0, {half})")]
    RotationOutOfRange { offset: usize, half: usize },
    #[error("malformed serialized data: {0}")]
    Decode(String),
}

/// Errors raised by CW/PE/RE encoding and query packing.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("value {value} outside codebook of size {size}")]
    OutOfCodebook { value: u64, size: u128 },
    #[error("value {value} outside the {bits}-bit domain")]
    OutOfDomain { value: u64, bits: u32 },
    #[error("invalid CW parameters: {0}")]
    InvalidCw(String),
    #[error("feature `{0}` missing from query")]
    MissingFeature(String),
    #[error("layout error: {0}")]
    Layout(String),
    #[error(transparent)]
    Fhe(#[from] FheError),
}

/// Errors raised by homomorphic comparison.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComparisonError {
    #[error("CBT depth mismatch: encrypted {encrypted}, plaintext {plain}")]
    DepthMismatch { encrypted: usize, plain: usize },
    #[error("query does not match node plan: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Fhe(#[from] FheError),
}

/// Errors raised while loading, quantizing or evaluating forests.
#[derive(Debug, Error)]
pub enum ForestError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("threshold {value} of feature `{feature}` outside range [{min}, {max}]")]
    Range {
        feature: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("unknown class {0}")]
    UnknownClass(usize),
    #[error("missing comparison bit for plan entry {0}")]
    MissingBit(usize),
    #[error("invalid edge randomness: r must be nonzero")]
    ZeroRandomness,
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Fhe(#[from] FheError),
}

/// Errors raised by the node/path optimizer.
#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("clustering intensity {0} outside [0, 1]")]
    Intensity(f64),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// Errors raised by blind code conversion.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BccError {
    #[error("invalid frequency profile: {0}")]
    Profile(String),
    #[error("input class `{class}` count {count} exceeds profile frequency {limit}")]
    ProfileExceeded { class: usize, count: usize, limit: usize },
    #[error("padded length {n} incompatible with {slots} slots")]
    Length { n: usize, slots: usize },
    #[error("slot {slot} out of range {slots}")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("shuffle round at granularity {0} is not a permutation")]
    Collision(usize),
    #[error(transparent)]
    Fhe(#[from] FheError),
}

/// Errors raised by framing, transports and the client/server sessions.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("connection closed")]
    Closed,
    #[error("malformed frame: {0}")]
    Frame(String),
    #[error("frame checksum mismatch: expected {expected:08x}, found {found:08x}")]
    Checksum { expected: u32, found: u32 },
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("unexpected {got} message while {phase}")]
    Unexpected { got: String, phase: String },
    #[error("stale query id {got}, expected {expected}")]
    StaleQuery { got: String, expected: String },
    #[error("setup rejected: {0}")]
    Setup(String),
    #[error("peer reported an error for query {query_id}: {message}")]
    Remote { query_id: String, message: String },
    #[error("query {query_id}: {source}")]
    InQuery {
        query_id: String,
        #[source]
        source: Box<ProtocolError>,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Bcc(#[from] BccError),
    #[error(transparent)]
    Fhe(#[from] FheError),
}
