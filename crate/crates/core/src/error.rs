use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("invalid block padding")]
    Padding,

    #[error("key generation failed: {0}")]
    KeyGeneration(String),

    #[error("key chain exhausted at index {0}")]
    ChainExhausted(u64),

    #[error("index {index} outside window [{start}, {start} + {count})")]
    OutOfWindow { index: u64, start: u64, count: u64 },

    #[error("precomputed entry {0} already consumed")]
    Reuse(u64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precomputation failed: {0}")]
    Precompute(String),

    #[error("decode error at byte {pos}: {reason}")]
    Decode { pos: usize, reason: &'static str },

    #[error("encode error: {0}")]
    Encode(&'static str),

    #[error("window mismatch: expected {expected} items, got {got}")]
    WindowMismatch { expected: u64, got: u64 },

    #[error("message of {len} bytes exceeds maximum of {max}")]
    Oversize { len: usize, max: usize },

    #[error("verifier at index {expected}, batch starts at {got}")]
    Sync { expected: u64, got: u64 },

    #[error("aggregate verification failed")]
    VerificationFailed,

    #[error("state snapshots require breach simulation to be enabled")]
    Forbidden,
}
