//! Command-line surface of the `ldme` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ldme_core::{list_decode_mean, reduce_list, HypothesisList, ReduceConfig, RunConfig};
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::experiment::{
    run_batch, run_experiment_with_outputs, AlgorithmSettings, ExperimentConfig, ReduceSettings,
};
use crate::io::{
    read_hypotheses, read_points, write_points, write_rows_csv, write_trace_csv, PointFormat,
};
use crate::synth::{gen_instance, InstanceSpec};

#[derive(Debug, Parser)]
#[command(name = "ldme", version, about = "List-decodable mean estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode a hypothesis list from a point file.
    Estimate(EstimateArgs),
    /// Generate a planted instance.
    Synth(SynthArgs),
    /// Run a config-driven experiment and emit a JSON report.
    Experiment(ExperimentArgs),
    /// Prune a hypothesis list to a separated subset.
    Reduce(ReduceArgs),
}

/// Parameters shared by `estimate` and `reduce`. Unset flags fall back to
/// the `--config` file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct AlgorithmFlags {
    /// JSON file with `algorithm` and `reduce` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub scale_c: Option<f64>,
    #[arg(long)]
    pub big_c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub power_delta: Option<f64>,
    #[arg(long)]
    pub sep_const: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV or binary point file.
    #[arg(long)]
    pub input: PathBuf,
    /// Hypothesis CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the reduced list to this CSV.
    #[arg(long)]
    pub reduced_out: Option<PathBuf>,
    /// Per-event trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub params: AlgorithmFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON instance spec, bare or under an `instance` key.
    #[arg(long)]
    pub spec: PathBuf,
    /// Point file; `.bin`/`.ldme` selects the binary layout.
    #[arg(long)]
    pub out: PathBuf,
    /// Inlier mask, one 0/1 per line.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    /// True mean as a one-row CSV.
    #[arg(long)]
    pub mean_out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; overrides `output.report`. Stdout when neither is set.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Trace path; overrides `output.trace_csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Overrides `instance.seed` (ignored for batch configs).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Hypothesis CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Reduced CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub params: AlgorithmFlags,
}

#[derive(Debug, Default, Deserialize)]
struct ParamFile {
    #[serde(default)]
    algorithm: AlgorithmSettings,
    #[serde(default)]
    reduce: ReduceSettings,
    #[serde(default)]
    instance: Option<InstanceHints>,
}

/// The parts of an instance section that double as algorithm defaults.
#[derive(Debug, Deserialize)]
struct InstanceHints {
    alpha: Option<f64>,
    sigma: Option<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

impl AlgorithmFlags {
    /// Resolves flags over the config file over defaults.
    pub fn resolve(&self) -> Result<(RunConfig, ReduceConfig)> {
        let file: ParamFile = match &self.config {
            Some(p) => read_json(p)?,
            None => ParamFile::default(),
        };
        let hints = file.instance.as_ref();
        let alpha = self
            .alpha
            .or(file.algorithm.alpha)
            .or(hints.and_then(|h| h.alpha))
            .ok_or_else(|| HarnessError::spec("alpha", "required (flag or config)"))?;
        let sigma = self
            .sigma
            .or(file.algorithm.sigma)
            .or(hints.and_then(|h| h.sigma))
            .unwrap_or(1.0);
        let cfg = RunConfig {
            alpha,
            sigma,
            scale_c: self.scale_c.unwrap_or(file.algorithm.scale_c),
            big_c: self.big_c.unwrap_or(file.algorithm.big_c),
            seed: self.seed.or(file.algorithm.seed).unwrap_or(0),
            power_delta: self.power_delta.unwrap_or(file.algorithm.power_delta),
            trace: true,
        };
        cfg.validate()?;
        let sep = self.sep_const.unwrap_or(file.reduce.sep_const);
        let rc = ReduceConfig::new(alpha, sep, cfg.scale_factor())?;
        Ok((cfg, rc))
    }
}

fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| HarnessError::io("<stdout>", e))
}

fn emit_rows(path: Option<&Path>, rows: &[Vec<f64>]) -> Result<()> {
    match path {
        Some(p) => write_rows_csv(p, rows),
        None => {
            let text = rows
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|x| format!("{x:?}"))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join("\n");
            print_stdout(&text)
        }
    }
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let (cfg, rc) = args.params.resolve()?;
    let points = read_points(&args.input)?;
    let run = list_decode_mean(&points, &cfg, None)?;
    if let Some(p) = &args.trace {
        write_trace_csv(p, &run.trace)?;
    }
    if let Some(p) = &args.reduced_out {
        write_rows_csv(p, reduce_list(&run.hypotheses, &rc).iter())?;
    }
    emit_rows(args.out.as_deref(), &run.hypotheses.0)
}

fn synth(args: &SynthArgs) -> Result<()> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum SpecFile {
        Wrapped { instance: InstanceSpec },
        Bare(InstanceSpec),
    }
    let mut spec = match read_json::<SpecFile>(&args.spec)? {
        SpecFile::Wrapped { instance } => instance,
        SpecFile::Bare(s) => s,
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let inst = gen_instance(&spec)?;
    write_points(&args.out, &inst.points, PointFormat::from_path(&args.out))?;
    if let Some(p) = &args.mask_out {
        let text: String = inst
            .inlier_mask
            .iter()
            .map(|&b| if b { "1\n" } else { "0\n" })
            .collect();
        std::fs::write(p, text).map_err(|e| HarnessError::io(p, e))?;
    }
    if let Some(p) = &args.mean_out {
        write_rows_csv(p, [&inst.true_mean])?;
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(p) = &args.report {
        config.output.report = Some(p.clone());
    }
    if let Some(p) = &args.trace {
        config.output.trace_csv = Some(p.clone());
    }
    if let Some(seed) = args.seed {
        config.instance.seed = seed;
    }
    if config.seeds.is_empty() {
        let to_stdout = config.output.report.is_none();
        let report = run_experiment_with_outputs(&config)?;
        if to_stdout {
            print_stdout(&report.to_json())?;
        }
        return Ok(());
    }
    let reports = run_batch(&config)?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    match &config.output.report {
        Some(p) => std::fs::write(p, json).map_err(|e| HarnessError::io(p, e)),
        None => print_stdout(&json),
    }
}

fn reduce(args: &ReduceArgs) -> Result<()> {
    let (_, rc) = args.params.resolve()?;
    let hyps = HypothesisList(read_hypotheses(&args.input)?);
    let reduced = reduce_list(&hyps, &rc);
    emit_rows(args.out.as_deref(), &reduced.0)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Synth(a) => synth(a),
        Command::Experiment(a) => experiment(a),
        Command::Reduce(a) => reduce(a),
    }
}
