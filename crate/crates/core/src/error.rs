use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{quantity} = {value} is outside its domain {domain}")]
    Domain {
        quantity: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// The requested received concentration cannot be produced: the
    /// transmitter receptors would have to be fully saturated.
    #[error("concentration {requested} is unreachable: the transmitter saturates at {limit}")]
    UnreachableConcentration { requested: f64, limit: f64 },

    #[error("degenerate channel: every input level maps to the same deterministic output")]
    DegenerateChannel,

    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
