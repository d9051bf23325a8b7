use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed metadata: {0}")]
    MetadataFormat(String),

    /// A loaded or synthesized record breaks a per-tile invariant.
    #[error("metadata invariant violated at chunk {chunk}, tile {tile}, level {level}: {reason}")]
    MetadataInvariant {
        chunk: usize,
        tile: usize,
        level: usize,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidInput(String),

    #[error("malformed trace at row {row}: {reason}")]
    Trace { row: usize, reason: String },

    #[error("trace too short: need {needed} samples, have {available}")]
    TraceUnderrun { needed: usize, available: usize },

    #[error(transparent)]
    Infeasible(#[from] Infeasible),

    #[error("enumeration of {required} assignments exceeds the cap of {cap}")]
    EnumerationCap { required: u128, cap: u128 },
}

/// No assignment fits the bandwidth budget.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no feasible quality assignment: need at least {required} units, budget is {budget} (blocking tiles {blocking:?})")]
pub struct Infeasible {
    /// Tiles whose cheapest level alone exceeds the budget. When every tile fits
    /// individually but their sum does not, all tiles are listed.
    pub blocking: Vec<usize>,
    pub required: u64,
    pub budget: u64,
}
