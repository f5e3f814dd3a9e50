use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("exhaustive permutation search limit: n = {0} exceeds 7")]
    PermutationSearchLimit(usize),

    #[error("degenerate coordinate: zero variance in coordinate {0}")]
    DegenerateCoordinate(usize),

    #[error("full conformal requires permutation invariance")]
    RequiresPermutationInvariance,

    #[error("pooled test requires label-blind transform")]
    LabelBlindRequired,

    #[error("marginal-only transforms required")]
    MarginalOnlyRequired,

    #[error("sample space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("split failed: {0}")]
    SplitFailed(String),

    #[error("user-defined transforms do not serialize")]
    NotSerializable,

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
