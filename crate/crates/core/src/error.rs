//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Variants carry
//! enough context (sizes, rates, names) for a CLI to print an actionable
//! message without re-deriving state.

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// Numerology index outside the built-in catalog.
    #[error("unknown numerology index {0}; the catalog covers indices 0..=5")]
    UnknownNumerology(u32),

    /// A numerology was constructed with inconsistent parameters.
    #[error("invalid numerology: {0}")]
    InvalidNumerology(String),

    /// An active subcarrier set is empty, unsorted, or out of range.
    #[error("invalid active set: {0}")]
    InvalidActiveSet(String),

    /// Two numerologies cannot form a user pair (bandwidth or ratio mismatch).
    #[error("incompatible numerology pair: {0}")]
    IncompatiblePair(String),

    /// A vector or matrix had the wrong dimensions for the requested operation.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The channel impulse response does not fit inside a cyclic prefix.
    #[error(
        "channel impulse response spans {n_ch} samples at fs = {fs_hz} Hz, \
         which exceeds the cyclic prefix of {n_cp} samples; \
         lower the sample rate or choose a numerology with a longer prefix"
    )]
    ChannelExceedsCp { n_ch: usize, n_cp: usize, fs_hz: f64 },

    /// The channel impulse response is longer than the processing frame.
    #[error("channel impulse response of {taps} taps exceeds the frame of {frame} samples")]
    ChannelExceedsFrame { taps: usize, frame: usize },

    /// A tap profile failed validation or could not be parsed.
    #[error("invalid tap profile: {0}")]
    InvalidProfile(String),

    /// A short-symbol index `m` was outside `1..=q`.
    #[error("short-symbol index m = {m} outside 1..={q}")]
    SymbolIndexOutOfRange { m: usize, q: usize },

    /// A power split or search grid was malformed.
    #[error("invalid power allocation: {0}")]
    InvalidPower(String),

    /// An OMA band partition could not be built.
    #[error("invalid band partition: {0}")]
    InvalidPartition(String),

    /// Too few Monte Carlo trials for a statistically meaningful estimate.
    #[error("{got} trials requested; at least {min} are required")]
    NotEnoughTrials { got: usize, min: usize },

    /// A scenario file or field failed validation.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a scenario file or report.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by user-supplied configuration rather than by
    /// runtime data; the CLI maps these to its config-error exit code.
    pub fn is_config_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
