use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `mu0 == mu1`: no number of tests can tell the team hypotheses apart.
    #[error("channel cannot separate the team hypotheses")]
    Unseparable,

    #[error("channel has zero capacity")]
    ZeroCapacity,

    #[error("numerics failure: {0}")]
    Numerics(&'static str),

    #[error("required {required} tests per team exceeds the cap of {cap}")]
    TooManyTests { required: f64, cap: u64 },

    #[error("block length {block_length} cannot give {team_size} distinct codewords")]
    BlockTooShort {
        team_size: usize,
        block_length: usize,
    },

    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
