use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid character {found:?} at position {position}, expected '0' or '1'")]
    InvalidBit { position: usize, found: char },

    #[error("range {start}..{end} out of bounds for sequence of length {len}")]
    IndexOutOfRange { start: usize, end: usize, len: usize },

    #[error("infeasible parameters: t * (L + 1) = {t} * {} > n = {n}", *l + 1)]
    Infeasible { n: usize, l: usize, t: usize },

    #[error("interior gap a_{index} = {gap} is shorter than the separation {l}")]
    NotSeparated { index: usize, gap: usize, l: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance too large for exhaustive enumeration: m = {m} > max_m = {max_m}")]
    InstanceTooLarge { m: usize, max_m: usize },

    #[error("coarse estimation failed at m = {m}: {successes}/{reps} alignments succeeded")]
    CoarseFailure { m: usize, successes: usize, reps: usize },

    #[error("fine estimation failed at m = {m}: no trace passed the forward/backward check")]
    FineFailure { m: usize },

    #[error("padding removal failed: recovered {side} gap {gap} is shorter than the padding {pad}")]
    PaddingUnderflow { side: &'static str, gap: u64, pad: usize },

    #[error("recovered length {got} differs from expected length {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("trace source is empty")]
    NoTraces,
}

impl Error {
    /// Pipeline stage that raised the error, if it is an algorithmic failure.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::CoarseFailure { .. } => Some("coarse"),
            Error::FineFailure { .. } => Some("fine"),
            Error::PaddingUnderflow { .. } => Some("unpad"),
            Error::LengthMismatch { .. } => Some("length-check"),
            _ => None,
        }
    }

    /// Gap index at which the stage failed, when there is one.
    pub fn gap_index(&self) -> Option<usize> {
        match self {
            Error::CoarseFailure { m, .. } | Error::FineFailure { m } => Some(*m),
            _ => None,
        }
    }
}
