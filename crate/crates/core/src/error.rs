//! Error type shared by all modules.

/// Errors surfaced by the library's domain operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two step functions at different resolutions were combined; the caller
    /// must `refine` first.
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(u32, u32),

    /// A geometric object cannot be represented on the ambient grid.
    #[error("unresolvable: {0}")]
    Unresolvable(String),

    /// A numeric or structural precondition failed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The tiles handed to `haar_factorization` are not a sibling pair
    /// dominated by the third tile.
    #[error("not a sibling/dominating configuration: {0}")]
    NotSiblingConfiguration(String),

    /// A scale map whose level sets are not unions of dyadic intervals of
    /// the matching length.
    #[error("not a stopping time: {0}")]
    NotStoppingTime(String),

    /// Tree-estimate ratio requested for a tree with zero size or density
    /// but a nonzero numerator.
    #[error("degenerate tree instance")]
    DegenerateTree,

    /// Two forests passed to `compare_decompositions` do not cover the same
    /// bitile collection.
    #[error("coverage mismatch between forests")]
    CoverageMismatch,

    /// Text-format parse failure, 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
