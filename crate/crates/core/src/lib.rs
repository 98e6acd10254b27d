//! List-decodable mean estimation for bounded-covariance data.
//!
//! When only an `α < 1/2` fraction of the input is drawn from the
//! distribution of interest, no single estimate can be trusted; instead the
//! [`driver`] returns a short list of candidate means, at least one of which
//! lies within `O(σ·log(1/α)/√α)` of the true mean. The list is built by
//! repeatedly applying a spectral [`multifilter`] along approximate top
//! eigendirections of the weighted covariance, and can be shrunk afterwards
//! with [`listreduce`].
//!
//! ```
//! use ldme_core::{list_decode_mean, PointSet, RunConfig};
//!
//! let mut rows = vec![vec![0.0, 0.0]; 40];
//! rows.extend(vec![vec![500.0, 0.0]; 60]);
//! let points = PointSet::from_rows(&rows).unwrap();
//! let run = list_decode_mean(&points, &RunConfig::new(0.3), None).unwrap();
//! assert!(run.hypotheses.iter().any(|h| h[0].abs() < 1e-9));
//! ```

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod listreduce;
pub mod multifilter;
pub mod wdata;

pub use driver::{
    list_decode_mean, list_decode_mean_observed, main_subroutine, postprocess_unscale,
    preprocess_rescale, prune_threshold, BranchState, DecodeRun, HypothesisList, RunConfig,
    RunStats, StepView, SubroutineOutput, SubroutineStep, TraceEvent,
};
pub use error::{Error, Result};
pub use listreduce::{reduce_list, ReduceConfig};
pub use multifilter::{
    basic_multifilter, find_split, find_split_with_slack, quantile_interval, soft_downweight,
    split_conditions_hold, truncated_variance, Interval, MultifilterOutcome, OutcomeTag,
    SplitParams,
};
pub use wdata::{
    approx_top_eigenpair, approx_top_eigenpair_seeded, cov_matvec, project, weighted_mean,
    weighted_variance_along, EigenPair, PointSet, WeightFn,
};
