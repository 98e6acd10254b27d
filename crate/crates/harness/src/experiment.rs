//! Config-driven end-to-end runs: generate, decode, reduce, evaluate, report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ldme_core::multifilter::log_factor;
use ldme_core::{
    list_decode_mean, reduce_list, HypothesisList, ReduceConfig, RunConfig, TraceEvent,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::evaluate::evaluate;
use crate::io::write_trace_csv;
use crate::synth::{gen_instance, InstanceSpec};

/// Multiplier `κ` of the error budget `κ·σ·lg(2/α)/√α`.
pub const ERROR_BUDGET_CONSTANT: f64 = 10.0;

/// Environment variable capping the worker count of batch runs.
pub const THREADS_ENV: &str = "LDME_THREADS";

fn default_scale_c() -> f64 {
    RunConfig::DEFAULT_SCALE_C
}
fn default_big_c() -> f64 {
    RunConfig::DEFAULT_BIG_C
}
fn default_power_delta() -> f64 {
    RunConfig::DEFAULT_POWER_DELTA
}
fn default_sep_const() -> f64 {
    ReduceConfig::DEFAULT_SEP_CONST
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSettings {
    /// Defaults to the instance's alpha.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Defaults to the instance's sigma.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_scale_c")]
    pub scale_c: f64,
    #[serde(default = "default_big_c")]
    pub big_c: f64,
    #[serde(default = "default_power_delta")]
    pub power_delta: f64,
    /// Defaults to the instance seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        Self {
            alpha: None,
            sigma: None,
            scale_c: default_scale_c(),
            big_c: default_big_c(),
            power_delta: default_power_delta(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceSettings {
    #[serde(default = "default_sep_const")]
    pub sep_const: f64,
}

impl Default for ReduceSettings {
    fn default() -> Self {
        Self {
            sep_const: default_sep_const(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSettings,
    #[serde(default)]
    pub reduce: ReduceSettings,
    #[serde(default)]
    pub output: OutputSettings,
    /// When non-empty, a batch run repeats the experiment once per seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            alpha: self.algorithm.alpha.unwrap_or(self.instance.alpha),
            sigma: self.algorithm.sigma.unwrap_or(self.instance.sigma),
            scale_c: self.algorithm.scale_c,
            big_c: self.algorithm.big_c,
            seed: self.algorithm.seed.unwrap_or(self.instance.seed),
            power_delta: self.algorithm.power_delta,
            trace: true,
        }
    }

    pub fn reduce_config(&self) -> Result<ReduceConfig> {
        let rc = self.run_config();
        Ok(ReduceConfig::new(
            rc.alpha,
            self.reduce.sep_const,
            rc.scale_factor(),
        )?)
    }

    /// Copy of this config with the instance seed replaced and the
    /// algorithm seed following it.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.instance.seed = seed;
        c.algorithm.seed = None;
        c.seeds.clear();
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        self.run_config().validate()?;
        self.reduce_config()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceSummary {
    pub events: usize,
    pub certified: usize,
    pub reweighted: usize,
    pub splits: usize,
    pub pruned: usize,
    pub max_depth: usize,
    pub max_live: usize,
    pub max_frontier_potential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub min_error: f64,
    pub argmin: usize,
    pub reduced_min_error: f64,
    pub list_size: usize,
    pub reduced_list_size: usize,
    pub reduction_radius: f64,
    pub error_budget: f64,
    pub within_budget: bool,
    pub iterations: usize,
    pub branches: usize,
    pub wall_time_secs: f64,
    pub config: ExperimentConfig,
    pub trace_summary: TraceSummary,
    pub hypotheses: Vec<Vec<f64>>,
    pub reduced_hypotheses: Vec<Vec<f64>>,
}

impl Report {
    /// Reduced min error is at most full min error plus the reduction radius.
    pub fn satisfies_reduction_bound(&self) -> bool {
        self.reduced_min_error <= self.min_error + self.reduction_radius
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub struct ExperimentResult {
    pub report: Report,
    pub trace: Vec<TraceEvent>,
    pub true_mean: Vec<f64>,
}

pub fn error_budget(alpha: f64, sigma: f64) -> f64 {
    ERROR_BUDGET_CONSTANT * sigma * log_factor(alpha) / alpha.sqrt()
}

/// Runs one experiment in memory without touching the filesystem outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let started = Instant::now();
    let instance = gen_instance(&config.instance)?;
    let cfg = config.run_config();
    let run = list_decode_mean(&instance.points, &cfg, Some(&instance.inlier_mask))?;
    let rc = config.reduce_config()?;
    let reduced = reduce_list(&run.hypotheses, &rc);

    let full = evaluate(&run.hypotheses, &instance.true_mean)?;
    let red = evaluate(&reduced, &instance.true_mean)?;
    let budget = error_budget(cfg.alpha, cfg.sigma);
    let stats = &run.stats;

    let report = Report {
        min_error: full.min_error,
        argmin: full.argmin,
        reduced_min_error: red.min_error,
        list_size: run.hypotheses.len(),
        reduced_list_size: reduced.len(),
        reduction_radius: rc.radius(),
        error_budget: budget,
        within_budget: full.min_error <= budget,
        iterations: stats.subroutine_calls,
        branches: stats.branches,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config: config.clone(),
        trace_summary: TraceSummary {
            events: run.trace.len(),
            certified: stats.certified,
            reweighted: stats.reweighted,
            splits: stats.splits,
            pruned: stats.pruned,
            max_depth: stats.max_depth,
            max_live: stats.max_live,
            max_frontier_potential: stats.max_frontier_potential,
        },
        hypotheses: run.hypotheses.clone().into_inner(),
        reduced_hypotheses: HypothesisList::into_inner(reduced),
    };
    Ok(ExperimentResult {
        report,
        trace: run.trace,
        true_mean: instance.true_mean,
    })
}

/// Runs one experiment and writes the report and trace files it names.
pub fn run_experiment_with_outputs(config: &ExperimentConfig) -> Result<Report> {
    let result = run_experiment(config)?;
    if let Some(path) = &config.output.report {
        std::fs::write(path, result.report.to_json()).map_err(|e| HarnessError::io(path, e))?;
    }
    if let Some(path) = &config.output.trace_csv {
        write_trace_csv(path, &result.trace)?;
    }
    Ok(result.report)
}

pub fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .map_or(available, |t| t.min(available))
}

/// One run per entry of `config.seeds`, fanned out over at most
/// [`worker_count`] threads. Reports come back in seed order.
pub fn run_batch(config: &ExperimentConfig) -> Result<Vec<Report>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| run_experiment(&config.with_seed(seed)).map(|r| r.report))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(
            r#"{"instance": {"n": 50, "d": 2, "alpha": 0.3, "sigma": 2.0,
                "inlier_model": {"kind": "gaussian_identity"},
                "adversary": {"kind": "mirror"}, "seed": 9}}"#,
        )
        .unwrap();
        let rc = c.run_config();
        assert_eq!((rc.alpha, rc.sigma, rc.seed), (0.3, 2.0, 9));
        assert_eq!((rc.scale_c, rc.big_c), (2.0, 20.0));
        assert_eq!(c.reduce.sep_const, 8.0);
    }

    #[test]
    fn malformed_config_is_config_error() {
        let err = ExperimentConfig::from_json("{").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn budget_formula() {
        // lg(20) / √0.1
        let b = error_budget(0.1, 1.0);
        assert!((b - 10.0 * 20f64.log2() / 0.1f64.sqrt()).abs() < 1e-12);
    }
}
