use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (expected < {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sequence `{id}`: {reason}")]
    InvalidSequence { id: String, reason: String },

    /// The intensity at an observed event is zero, so the likelihood vanishes.
    #[error("degenerate model: zero intensity at event {event} of sequence `{id}`")]
    DegenerateModel { id: String, event: usize },

    /// Thinning accepted more events than the configured cap; the process is
    /// almost certainly supercritical on the simulation window.
    #[error("simulation exceeded {cap} events (total infectivity too large)")]
    Explosion { cap: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
