//! Error types shared across the crate.

use crate::pehash::PeParseError;

/// Result alias using the crate-wide [`Error`].
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by clustering construction, metric computation, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A sample id was empty.
    #[error("empty sample id{}", fmt_line(.line))]
    EmptyId {
        /// 1-based input line, when the id came from a file.
        line: Option<u64>,
    },

    /// The same sample id was assigned more than once.
    #[error("duplicate sample id `{id}`{}", fmt_line(.line))]
    DuplicateSample {
        /// The offending id.
        id: String,
        /// 1-based input line of the second occurrence, when known.
        line: Option<u64>,
    },

    /// Two clusterings do not partition the same sample universe.
    #[error("universe mismatch: {detail}")]
    UniverseMismatch {
        /// What differs between the two universes.
        detail: String,
    },

    /// A label used the reserved singleton prefix.
    #[error("label `{label}` uses the reserved prefix `{prefix}`")]
    ReservedLabel {
        /// The offending label.
        label: String,
        /// The reserved prefix it collides with.
        prefix: &'static str,
    },

    /// An operation requiring a refinement was given a non-refinement.
    #[error("clustering is not a refinement of the target")]
    NotARefinement,

    /// A correlation input series has zero variance.
    #[error("degenerate series: {series} is constant")]
    DegenerateSeries {
        /// Which series was constant.
        series: &'static str,
    },

    /// Too few shuffle records to correlate.
    #[error("need at least 3 shuffle records, got {found}")]
    TooFewRecords {
        /// How many records were supplied.
        found: usize,
    },

    /// A CSV file did not start with the expected header.
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    MalformedHeader {
        /// The required header row.
        expected: &'static str,
        /// The header row actually present.
        found: String,
    },

    /// A CSV file contained no data rows.
    #[error("file contains no data rows")]
    EmptyFile,

    /// PE parsing failed.
    #[error(transparent)]
    Pe(#[from] PeParseError),

    /// Underlying CSV error (quoting, row shape, encoding).
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// Underlying I/O error.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Underlying JSON error.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_line(line: &Option<u64>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}
