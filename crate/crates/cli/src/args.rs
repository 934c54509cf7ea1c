use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "hprobe", version, about = "Hurst-parameter estimation from sampled traffic and active probes")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every random draw [default: 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Root directory for run outputs
    #[arg(long, global = true, env = "HPROBE_OUTDIR")]
    pub outdir: Option<PathBuf>,
    /// Output path: the trace file for `generate`/`sample`, the run directory otherwise
    #[arg(short = 'o', long, global = true)]
    pub output: Option<PathBuf>,
    /// Format of series files
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON config; top-level `seed`/`outdir`/`format` plus one object per command
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise an LRD traffic trace
    Generate(GenerateArgs),
    /// Sample a trace with a point process, W = A·Y
    Sample(SampleArgs),
    /// Estimate H from a trace, optionally undoing the sampling distortion
    Estimate(EstimateArgs),
    /// Reconstruct traffic statistics from sampled observations
    Reconstruct(ReconstructArgs),
    /// Finite-sample accuracy model: τ*, confidence bands, required duration
    Accuracy(AccuracyArgs),
    /// Simulate a tandem path and record probe delays
    Simulate(SimulateArgs),
    /// Probe a simulated path end to end and estimate H
    ProbeSim(ProbeSimArgs),
    /// Write the data tables for the standard figures (covariances, τ*, error, aggregate variance)
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Sample(_) => "sample",
            Command::Estimate(_) => "estimate",
            Command::Reconstruct(_) => "reconstruct",
            Command::Accuracy(_) => "accuracy",
            Command::Simulate(_) => "simulate",
            Command::ProbeSim(_) => "probe-sim",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    Geometric,
    Periodic,
    Gamma,
    Uniform,
}

/// Inter-sample distribution flags.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingArgs {
    /// Inter-sample distribution
    #[arg(long, value_enum)]
    pub dist: Option<Dist>,
    /// Geometric: per-slot probability [default: 0.1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Periodic: period in slots [default: 10]
    #[arg(long)]
    pub delta: Option<usize>,
    /// Gamma: shape, 2 or 4 [default: 2]
    #[arg(long)]
    pub alpha: Option<u32>,
    /// Gamma: mean intensity [default: 0.1]
    #[arg(long)]
    pub mu_a: Option<f64>,
    /// Uniform: support (0, b) [default: 20]
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    Fgn,
    Onoff,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Option<TrafficKind>,
    /// Hurst parameter (fGn)
    #[arg(long)]
    pub hurst: Option<f64>,
    /// σ_Y² [default: 1]
    #[arg(long)]
    pub variance: Option<f64>,
    /// μ_Y [default: 0]
    #[arg(long)]
    pub mean: Option<f64>,
    /// Length in slots
    #[arg(long)]
    pub len: Option<usize>,
    /// On-off: number of sources [default: 1000]
    #[arg(long)]
    pub sources: Option<usize>,
    /// On-off: Pareto tail index, H = (3 − α)/2 [default: 1.4]
    #[arg(long)]
    pub tail_index: Option<f64>,
    /// Clip negative increments to zero
    #[arg(long)]
    pub clip: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleArgs {
    /// Traffic trace to sample
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cov,
    Aggvar,
    Psd,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateArgs {
    /// Trace to analyse
    pub input: Option<PathBuf>,
    /// Estimator [default: cov]
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Treat the input as observations sampled with this distribution and invert the distortion
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    /// Largest covariance lag [default: 1000]
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Lower end of the fit range (lag, block size or frequency)
    #[arg(long)]
    pub fit_lo: Option<f64>,
    /// Upper end of the fit range
    #[arg(long)]
    pub fit_hi: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructArgs {
    /// Observation trace W
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    /// Largest covariance lag [default: 1000]
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Known μ_Y instead of the estimate
    #[arg(long)]
    pub mean: Option<f64>,
    /// Known σ_Y² instead of the estimate
    #[arg(long)]
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct AccuracyArgs {
    #[arg(long)]
    pub hurst: Option<f64>,
    /// σ_Y² [default: 1]
    #[arg(long)]
    pub variance: Option<f64>,
    /// μ_Y [default: 0]
    #[arg(long)]
    pub mean: Option<f64>,
    /// K in c_Y ≈ K σ² τ^{2H−2} [default: 1]
    #[arg(long)]
    pub prefactor: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    /// Sample length T in slots [default: 1000000]
    #[arg(long)]
    pub len: Option<usize>,
    /// Target relative error for the duration plan [default: 0.1]
    #[arg(long)]
    pub target_eps: Option<f64>,
    /// Largest lag of the report [default: 1000]
    #[arg(long)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Single,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Min,
    Mean,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    /// Nodes, e.g. `H=0.6:util=0.5,H=0.9:util=0.5` (keys: H, util, cap, buffer, latency, burst, gen, seed)
    #[arg(long)]
    pub nodes: Option<String>,
    /// Horizon in slots [default: 1000000]
    #[arg(long)]
    pub len: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    /// Probe kind [default: single]
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Pair spacing in slots [default: 1]
    #[arg(long)]
    pub pair_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSimArgs {
    /// Nodes, e.g. `H=0.6:util=0.5,H=0.9:util=0.5`
    #[arg(long)]
    pub nodes: Option<String>,
    /// Number of probes [default: 1000000]
    #[arg(long)]
    pub probes: Option<usize>,
    /// Per-slot probing probability [default: 0.1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Probe kind [default: single]
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Pair spacing in slots [default: 1]
    #[arg(long)]
    pub pair_gap: Option<f64>,
    /// Idle-delay reference for busy detection [default: min]
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    /// H assumed for τ* [default: largest configured node H]
    #[arg(long)]
    pub model_hurst: Option<f64>,
    /// Slot duration in seconds [default: 0.001]
    #[arg(long)]
    pub slot_seconds: Option<f64>,
    #[arg(long)]
    pub fit_lo: Option<f64>,
    #[arg(long)]
    pub fit_hi: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportArgs {
    /// Figures to produce, e.g. `2,3,4,5` [default: all]
    #[arg(long, value_delimiter = ',')]
    pub figures: Vec<u32>,
    /// H of the synthetic traffic [default: 0.8]
    #[arg(long)]
    pub hurst: Option<f64>,
    /// σ_Y² [default: 1]
    #[arg(long)]
    pub variance: Option<f64>,
    /// μ_Y [default: 1]
    #[arg(long)]
    pub mean: Option<f64>,
    /// Sampling intensity μ_A [default: 0.1]
    #[arg(long)]
    pub mu_a: Option<f64>,
    /// Trace length in slots [default: 1000000]
    #[arg(long)]
    pub len: Option<usize>,
    /// Realisations for the relative-error figure [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Largest lag [default: 1000]
    #[arg(long)]
    pub max_lag: Option<usize>,
}
