//! Synthetic instances, experiment orchestration, reports and the `ldme`
//! command-line tool built on `ldme-core`.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod io;
pub mod synth;

pub use error::{HarnessError, Result};
pub use evaluate::{evaluate, l2_distance, Evaluation};
pub use experiment::{
    error_budget, run_batch, run_experiment, run_experiment_with_outputs, ExperimentConfig,
    ExperimentResult, Report,
};
pub use synth::{gen_instance, Adversary, InlierModel, Instance, InstanceSpec, TrueMean};
