use std::ops::Range;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulation parameters: {0}")]
    InvalidModulation(String),

    #[error("padded length {padded} is shorter than the packet ({required} samples)")]
    PaddedTooShort { padded: usize, required: usize },

    #[error("output length {out_len} cannot hold {required} delayed samples")]
    OutputTooShort { out_len: usize, required: usize },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("raw sample buffer has odd length {0}; I/Q samples come in pairs")]
    OddRawLength(usize),

    #[error("invalid bandpass design: {0}")]
    InvalidBand(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("signal of length {signal} with code support {support} does not fit transform of size {transform}")]
    ShapeMismatch {
        signal: usize,
        support: usize,
        transform: usize,
    },

    #[error("codes in one batch must share a transform size ({expected} vs {found})")]
    MixedShapes { expected: usize, found: usize },

    #[error("cannot find the peak of an empty correlation")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample range {range:?} is no longer buffered (oldest sample {head})")]
    Evicted { range: Range<u64>, head: u64 },

    #[error("sample range {range:?} is not buffered yet (newest sample {tail})")]
    NotYetBuffered { range: Range<u64>, tail: u64 },

    #[error("block starts at {start} but the stream already reached {tail}")]
    NonMonotonic { start: u64, tail: u64 },

    #[error("task {id} is not the task in flight")]
    UnexpectedTask { id: u64 },

    #[error("benchmark correctness check failed: {0}")]
    Correctness(String),

    #[error("invalid recording: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
