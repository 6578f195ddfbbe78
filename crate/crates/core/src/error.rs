use std::io;

use crate::types::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vocabulary is empty")]
    EmptyVocab,
    #[error("duplicate token id {0}")]
    DuplicateId(u64),
    #[error("gap in token id range: expected {expected}, found {found}")]
    IdGap { expected: u64, found: u64 },
    #[error("negative frequency {frequency} for token id {id}")]
    NegativeFrequency { id: u64, frequency: i64 },
    #[error("malformed record at {location}: {reason}")]
    Malformed { location: String, reason: String },
    #[error("token id {token} out of range for vocabulary of {t_number} tokens")]
    TokenOutOfRange { token: u64, t_number: usize },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} trailing bytes after declared payload")]
    TrailingBytes(u64),
    #[error("embedding row for token {0} is all zero")]
    ZeroRow(TokenId),
    #[error("triplets not sorted at line {line}")]
    UnsortedTriplets { line: usize },
    #[error("duplicate cell ({row}, {col})")]
    DuplicateCell { row: TokenId, col: TokenId },
    #[error("label count mismatch: expected {expected}, found {found}")]
    LabelCountMismatch { expected: usize, found: usize },
    #[error("event stream is empty")]
    EmptyEvents,
    #[error("every confusion row was excluded (no row has a maximal, nonzero diagonal)")]
    AllRowsExcluded,
    #[error("edge ({0}, {1}) references a non-participant token")]
    NonParticipantEdge(TokenId, TokenId),
    #[error("power iteration did not converge for principal component {component}")]
    NonConvergence { component: usize },
    #[error("field matrix for unit {unit_index} is all zero")]
    AllZeroField { unit_index: u32 },
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("token {0} has no APT entry")]
    MissingApt(TokenId),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn malformed(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            location: location.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyVocab => "empty-vocab",
            Error::DuplicateId(_) => "duplicate-id",
            Error::IdGap { .. } => "gap-in-range",
            Error::NegativeFrequency { .. } => "negative-frequency",
            Error::Malformed { .. } => "malformed-record",
            Error::TokenOutOfRange { .. } => "token-out-of-range",
            Error::BadHeader(_) => "bad-header",
            Error::Truncated { .. } => "truncated",
            Error::TrailingBytes(_) => "trailing-bytes",
            Error::ZeroRow(_) => "zero-row",
            Error::UnsortedTriplets { .. } => "unsorted-triplets",
            Error::DuplicateCell { .. } => "duplicate-cell",
            Error::LabelCountMismatch { .. } => "label-count-mismatch",
            Error::EmptyEvents => "empty-events",
            Error::AllRowsExcluded => "all-rows-excluded",
            Error::NonParticipantEdge(..) => "non-participant-edge",
            Error::NonConvergence { .. } => "non-convergence",
            Error::AllZeroField { .. } => "all-zero-field",
            Error::EmptyMatrix => "empty-matrix",
            Error::MissingApt(_) => "missing-apt",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::InfeasibleGeometry(_) => "infeasible-geometry",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Io(_) => "io",
        }
    }
}
