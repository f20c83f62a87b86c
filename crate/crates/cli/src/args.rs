use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "outage", version, about = "Line outage detection from PMU angle streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detection threshold from a false-alarm target, or the full table.
    Calibrate(CalibrateArgs),
    /// List admissible outage scenarios and the excluded ones with reasons.
    Scenarios(ScenariosArgs),
    /// Write a synthetic angle stream and its ground truth.
    Simulate(SimulateArgs),
    /// Run the detector over a stream. Exit code 2 means an alarm was raised.
    Detect(DetectArgs),
    /// Monte-Carlo runs over outage lines with delay and identification tables.
    Batch(BatchArgs),
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// False-alarm target in days.
    #[arg(long, value_parser = positive, default_value = "1")]
    pub arl0_days: f64,
    /// Sampling rate in Hz.
    #[arg(long, value_parser = positive, default_value = "30")]
    pub rate: f64,
    /// Number of PMUs.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value = "39")]
    pub pmus: u64,
    /// Print the threshold table for the standard targets and system sizes.
    #[arg(long)]
    pub table: bool,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Clone)]
pub struct CaseArgs {
    /// Case file (JSON schema, or MATPOWER-style `.m`).
    #[arg(long)]
    pub case: PathBuf,
    /// Largest number of simultaneous line outages per scenario.
    #[arg(long)]
    pub max_simultaneous: Option<usize>,
    /// Only build scenarios from these line ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub lines: Option<Vec<u32>>,
}

#[derive(Debug, Args)]
pub struct ScenariosArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ac,
    Dc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Drop,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Voltage {
    Flat,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Dense,
    LowRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DynamicsArg {
    TimeVariant,
    Fixed,
}

/// Settings shared by commands that run the simulator or the detector.
/// Every value may also come from `--config`; flags win.
#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Flat `key=value` file supplying defaults for any long option.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Monitored bus ids (comma separated); default is every bus.
    #[arg(long, value_delimiter = ',')]
    pub placement: Option<Vec<u32>>,
    /// Variance parameter σ² (p.u.² per sample).
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Voltage magnitudes: flat 1.0 p.u. or the case's nominal values.
    #[arg(long, value_enum)]
    pub voltage: Option<Voltage>,
    /// Root seed; every random stream is derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DetectorArgs {
    /// Explicit threshold c (overrides --arl0-days).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// False-alarm target in days used to derive c.
    #[arg(long)]
    pub arl0_days: Option<f64>,
    /// Sampling rate in Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// AC: Jacobian re-evaluated every sample; DC: static -B.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Treatment of neighbors without a PMU.
    #[arg(long, value_enum)]
    pub neighbor_rule: Option<Rule>,
    /// Scenario evaluation strategy.
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SimArgs {
    /// Measurement noise as a fraction of the mean |Δθ| per bus.
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    /// Relative jitter of the initial state.
    #[arg(long)]
    pub load_perturbation: Option<f64>,
    /// Initial angles, `bus,angle` CSV in radians; default flat start.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Generator Jacobian: re-evaluated every sample or fixed.
    #[arg(long, value_enum)]
    pub dynamics: Option<DynamicsArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Number of samples, the initial one included.
    #[arg(long)]
    pub duration: Option<u64>,
    /// First sample drawn from the post-outage model.
    #[arg(long)]
    pub outage_sample: Option<u64>,
    /// Lines removed at the outage (comma separated).
    #[arg(long, value_delimiter = ',', conflicts_with = "outage_scenario")]
    pub outage_lines: Option<Vec<u32>>,
    /// Scenario id removed at the outage.
    #[arg(long)]
    pub outage_scenario: Option<usize>,
    /// Stream CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON output; default is the stream path with `.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Stream CSV with header `sample,bus_<id>,...`.
    #[arg(long)]
    pub stream: PathBuf,
    /// Angles in the stream are in degrees.
    #[arg(long)]
    pub degrees: bool,
    /// Ground truth sidecar; enables delay reporting.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Report JSON output; default is stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-sample trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Every scenario's statistic per sample, as CSV.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// Reset the statistics after an alarm and keep monitoring.
    #[arg(long)]
    pub continue_after_alarm: bool,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Runs per outage line.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Lines to outage (comma separated); default every admissible single line.
    #[arg(long, value_delimiter = ',')]
    pub outage_lines: Option<Vec<u32>>,
    /// False-alarm targets in days to sweep (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub arl0_sweep: Option<Vec<f64>>,
    /// Outage sample of every run.
    #[arg(long)]
    pub outage_sample: Option<u64>,
    /// Samples monitored after the outage.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Directory for the CSV and summary outputs.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; default uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
}
