use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed network document at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cell `{0}` is declared more than once")]
    DuplicateCell(String),

    #[error("sigma[{edge_type}] references unknown cell `{cell}`")]
    UnknownCell { edge_type: usize, cell: String },

    #[error("sigma[{edge_type}] has no entry for cell `{cell}`")]
    MissingSigma { edge_type: usize, cell: String },

    #[error("network must have at least one edge type")]
    NoEdgeTypes,

    #[error("network must have at least one cell")]
    NoCells,

    #[error("expected {expected} sigma maps, found {found}")]
    SigmaCount { expected: usize, found: usize },

    #[error("invalid coloring: {0}")]
    InvalidColoring(String),

    #[error("coloring is not balanced: `{c}` and `{d}` disagree on edge type {edge_type}")]
    Unbalanced {
        c: String,
        d: String,
        edge_type: usize,
    },

    #[error("network has {size} cells, exceeding the configured bound {bound}")]
    SizeBound { size: usize, bound: usize },

    #[error("not a feed-forward network (cell `{cell}`): {reason}")]
    NotFeedForward { cell: String, reason: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("cell subset is not closed under the input maps (`{0}` leaves it)")]
    NotClosed(String),

    #[error("not a lift: {0}")]
    NotALift(String),

    #[error("lift cannot be decomposed into basic lifts: {0}")]
    NotDecomposable(String),

    #[error("jet has {jet} inputs but the network has {network} edge types")]
    ArityMismatch { jet: usize, network: usize },

    #[error("degenerate jet: {0}")]
    Degenerate(String),

    #[error("genericity violated at cell `{cell}`: {combination} vanishes")]
    Genericity { cell: String, combination: String },

    #[error("lift not classified: {0}")]
    LiftNotClassified(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Coarse error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Precondition,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. }
            | Error::DuplicateCell(_)
            | Error::UnknownCell { .. }
            | Error::MissingSigma { .. }
            | Error::NoEdgeTypes
            | Error::NoCells
            | Error::SigmaCount { .. } => ErrorKind::Parse,
            _ => ErrorKind::Precondition,
        }
    }
}
