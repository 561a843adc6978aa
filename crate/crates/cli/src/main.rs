//! `satrecon` command-line interface.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage, 3 input parse
//! error, 4 saturation too dense to reconstruct, 5 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use satrecon::harness::SweepAxis;
use satrecon::kernel::BandSpec;
use satrecon::ofdm::LinkMode;
use satrecon::reconstruct::Epsilon;
use satrecon::Error;

#[derive(Parser, Debug)]
#[command(
    name = "satrecon",
    version,
    about = "Reconstruct saturated samples of band-limited signals"
)]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Declip a sample-stream CSV (`index,location,value,flag`).
    Declip(DeclipArgs),
    /// Run one seeded trial and dump signals, constellation and traces.
    Simulate(SimulateArgs),
    /// Run a seeded Monte-Carlo sweep and write the summary CSV.
    Sweep(SweepArgs),
    /// Print kernel values or a Gram matrix as CSV.
    Kernel(KernelArgs),
    /// Precompute inverse Gram tables for isolated saturations.
    Tables(TablesArgs),
    /// Print the resolved simulation config as TOML.
    Config(ConfigArgs),
}

#[derive(Args, Debug)]
pub struct DeclipArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "0:pi")]
    pub band: BandSpec,
    #[arg(long, default_value_t = 8)]
    pub window_n: usize,
    /// Extra samples searched around each window (default: window-n).
    #[arg(long)]
    pub margin: Option<usize>,
    #[arg(long, default_value = "auto")]
    pub epsilon: Epsilon,
    /// Restrict windows to consecutive frames of this many samples.
    #[arg(long)]
    pub frame_len: Option<usize>,
    /// Inverse table written by `satrecon tables`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Write the full JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Simulation config: a preset or a TOML file, then per-field overrides.
#[derive(Args, Debug, Clone, Default)]
pub struct SimOptions {
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// TOML file as written by `satrecon config`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<LinkMode>,
    #[arg(long)]
    pub taps: Option<usize>,
    /// Comma-separated active carrier indices.
    #[arg(long, value_delimiter = ',')]
    pub carriers: Option<Vec<usize>>,
    #[arg(long)]
    pub qam: Option<u32>,
    #[arg(long)]
    pub cp: Option<usize>,
    #[arg(long)]
    pub band: Option<BandSpec>,
    #[arg(long)]
    pub window_n: Option<usize>,
    #[arg(long)]
    pub margin: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<Epsilon>,
    #[arg(long)]
    pub cr: Option<f64>,
    /// Signal-to-noise ratio in dB; `inf` for a noiseless channel.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Measured channel response `freq_hz,mag_db[,phase_rad]`.
    #[arg(long)]
    pub channel_csv: Option<PathBuf>,
    /// Reconstruct each symbol as one period of a periodic signal.
    #[arg(long)]
    pub periodic: Option<bool>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimOptions,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimOptions,
    /// Swept parameter: cr, window-n or snr-db.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Never changes the output.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Index of the first trial, to split one sweep over several runs.
    #[arg(long, default_value_t = 0)]
    pub trial_offset: u64,
    /// Leave out trials with more clipped samples on any real channel.
    #[arg(long)]
    pub max_clipped: Option<usize>,
    /// Write summary.csv, histogram.csv and trials.jsonl here instead of
    /// printing the summary.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[arg(long, default_value = "0:pi")]
    pub band: BandSpec,
    /// Comma-separated locations.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "range")]
    pub locations: Option<Vec<f64>>,
    /// Evenly spaced locations `start:stop:step`, stop included.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Print `t,phi` rows instead of the Gram matrix of the locations.
    #[arg(long)]
    pub curve: bool,
}

#[derive(Args, Debug)]
pub struct TablesArgs {
    #[arg(long, default_value = "0:pi")]
    pub band: BandSpec,
    #[arg(long, default_value_t = 8)]
    pub window_n: usize,
    #[arg(long)]
    pub margin: Option<usize>,
    #[arg(long, default_value = "auto")]
    pub epsilon: Epsilon,
    /// Frame length whose edge patterns are included.
    #[arg(long, default_value_t = 32)]
    pub frame_len: usize,
    /// Defaults to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[command(flatten)]
    pub sim: SimOptions,
    /// Defaults to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Failure of a subcommand, carrying its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(e) => match e {
                Error::Parse { .. } | Error::InvalidStream(_) | Error::DuplicateLocation { .. } => 3,
                Error::DenseSaturation { .. } => 4,
                Error::IllConditioned { .. } | Error::NotInvertible { .. } | Error::ZeroPower => 5,
                Error::InvalidBand { .. }
                | Error::InvalidEpsilon(_)
                | Error::InvalidWindow(_)
                | Error::InvalidConfig(_)
                | Error::InvalidSweep(_)
                | Error::UnknownPreset { .. } => 2,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Declip(a) => commands::declip(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Kernel(a) => commands::kernel(&a),
        Command::Tables(a) => commands::tables(&a),
        Command::Config(a) => commands::config(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("satrecon: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
