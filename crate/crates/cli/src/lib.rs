//! The `atlas` command line: code export, synthetic recordings, offline
//! detection, scheduler simulation and benchmarks.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 2).
    #[error("{0}")]
    Config(String),
    /// Unreadable or malformed input, or a failed write (exit code 1).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<atlas_core::Error> for CliError {
    fn from(e: atlas_core::Error) -> Self {
        use atlas_core::Error as E;
        match e {
            E::Config(_) | E::InvalidModulation(_) | E::InvalidChannel(_) | E::InvalidBand(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "atlas", version, about = "Detect and time FSK tag transmissions in I/Q recordings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write each roster tag's code as `<id>.json` and packed `<id>.bits`.
    Codes {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Synthesize a recording (plus `.json` metadata and `.truth.json`) from a scenario.
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Search a whole recording for every roster tag; detections as JSON lines.
    Detect {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        recording: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also emit rejected candidates.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run the scheduler over a recording or a scenario and log its events.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long, conflicts_with = "scenario", required_unless_present = "scenario")]
        recording: Option<PathBuf>,
        #[arg(short, long)]
        scenario: Option<PathBuf>,
        /// Event log (JSON lines); stdout when omitted.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Summary (JSON); stderr when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Stream seconds delivered per second of processing.
        #[arg(long, default_value_t = 1.0)]
        real_time_factor: f64,
        /// Extra seconds charged to every task.
        #[arg(long, default_value_t = 0.0)]
        task_delay: f64,
        /// Charge tasks their measured time instead of the cost model.
        #[arg(long)]
        measured_timing: bool,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Time demodulation and detection for increasing numbers of codes.
    Bench {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',')]
        patterns: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        windows: Option<usize>,
        /// Per-repeat results (CSV); stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Per-pattern-count summary (JSON).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}
