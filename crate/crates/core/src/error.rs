use thiserror::Error;

use crate::multifilter::OutcomeTag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("direction is not a unit vector (norm {norm})")]
    NonUnitVector { norm: f64 },

    #[error("point set must contain at least one point of dimension >= 1")]
    EmptyPointSet,

    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },

    #[error("weight {index} = {value} is outside [0, 1]")]
    InvalidWeight { index: usize, value: f64 },

    #[error("weight function has length {actual}, point set has {expected} points")]
    WeightLength { expected: usize, actual: usize },

    /// The weight function carries no mass, so weighted statistics are undefined.
    #[error("total weight is zero")]
    ZeroTotalWeight,

    #[error("no weight inside window [{lo}, {hi}]")]
    ZeroWindowWeight { lo: f64, hi: f64 },

    /// Every supported point already sits inside the quantile interval.
    #[error("soft downweighting has nothing to remove: max f over supported points is zero")]
    DegenerateDownweight,

    #[error(
        "no feasible split (total weight {total_weight}, truncated variance {truncated_variance}, \
         candidates {candidates}, depth {}, lineage {lineage:?})", lineage.len()
    )]
    InfeasibleSplit {
        total_weight: f64,
        truncated_variance: f64,
        candidates: usize,
        lineage: Vec<OutcomeTag>,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("no hypothesis produced although the inlier set looks representative")]
    NoHypothesis,
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
