//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by ingestion, validation, and the analysis engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error: {0}")]
    Csv(String),

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: u64,
        expected: usize,
        found: usize,
    },

    #[error("column {0:?} not found in input")]
    MissingColumn(String),

    #[error("input has no data rows")]
    EmptyInput,

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("coarsening map for column {column:?} does not cover level {level:?}")]
    UnmappedLevel { column: String, level: String },

    #[error("coarsening map file is malformed: {0}")]
    BadCoarseningMap(String),

    #[error("synthetic design overflows the row limit ({0} cells requested)")]
    DesignTooLarge(String),

    #[error("subject set is empty")]
    EmptySubjectSet,

    #[error("subject index {index} out of range for n = {n}")]
    SubjectOutOfRange { index: usize, n: usize },

    #[error("variable index {index} out of range for d = {d}")]
    VariableOutOfRange { index: usize, d: usize },

    #[error("variable subsets must be disjoint (overlap on variable {0})")]
    OverlappingSubsets(usize),

    #[error("distributions are over different variable subsets")]
    SubsetMismatch,

    #[error(
        "support violation: tuple {tuple} has zero probability under the reference distribution"
    )]
    SupportViolation { tuple: String },

    #[error("d = {d} exceeds the exact-mode limit {limit}; use Monte Carlo mode")]
    DimensionTooLarge { d: usize, limit: usize },

    #[error("invalid filter {filter:?}: {reason}")]
    BadFilter { filter: String, reason: String },

    #[error("invalid argument {flag}: {reason}")]
    BadArgument { flag: String, reason: String },

    #[error("failed to serialize output: {0}")]
    Serialize(String),

    #[error("filter {0:?} selects no subjects")]
    EmptyFilter(String),

    #[error("tree cache is invalid: {0}")]
    BadCache(String),

    #[error("tree cache was built for a different table (content hash mismatch)")]
    CacheMismatch,

    #[error("engines disagree: {0}")]
    EngineMismatch(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
