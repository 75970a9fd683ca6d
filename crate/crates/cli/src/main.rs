use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opsforge::simulator::FaultType;

mod commands;
mod config;

/// Reliability analytics over microservice telemetry.
#[derive(Debug, Parser)]
#[command(name = "opsforge", version, propagate_version = true)]
pub struct Cli {
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (default: opsforge-out).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed (default: 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress text on standard error.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its telemetry and ground truth.
    Simulate(SimulateArgs),
    /// Pattern-sketch KPI anomaly detection.
    #[command(subcommand)]
    Sketch(SketchCmd),
    /// Parse raw logs into conceptualized templates.
    Parse(ParseArgs),
    /// Session-level log anomaly detection and failure identification.
    #[command(subcommand)]
    Logdetect(LogdetectCmd),
    /// Incident-aware ticket aggregation.
    #[command(subcommand)]
    Tickets(TicketsCmd),
    /// Service dependency analysis.
    #[command(subcommand)]
    Deps(DepsCmd),
    /// Root-cause localization.
    #[command(subcommand)]
    Rca(RcaCmd),
    /// Fault-injection resilience testing.
    #[command(subcommand)]
    Resilience(ResilienceCmd),
    /// Simulate a scenario, run every analysis and score it against ground truth.
    E2e(E2eArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Emit a labeled session log workload of this many sessions instead.
    #[arg(long, conflicts_with = "scenario")]
    pub sessions: Option<usize>,
    /// Share of failing sessions in the session workload.
    #[arg(long, requires = "sessions", default_value_t = 0.3)]
    pub failure_fraction: f64,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// Metric series, JSON lines.
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
    /// Only series of this service.
    #[arg(long)]
    pub service: Option<String>,
    /// Only series with this metric name.
    #[arg(long)]
    pub metric: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum SketchCmd {
    /// Discover metric patterns for each selected series.
    Train {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        rare_fraction: Option<f64>,
    },
    /// Flag windows against trained patterns.
    Detect {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, value_name = "FILE")]
        patterns: Option<PathBuf>,
    },
    /// Detect while adapting the patterns online; writes the updated patterns.
    Adapt {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, value_name = "FILE")]
        patterns: Option<PathBuf>,
        #[arg(long)]
        promote_k: Option<usize>,
        #[arg(long)]
        horizon_s: Option<i64>,
    },
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Raw logs, JSON lines.
    #[arg(long, value_name = "FILE")]
    pub logs: Option<PathBuf>,
    /// Concept noun list (default: the bundled one).
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Knowledge base to start from.
    #[arg(long, value_name = "FILE")]
    pub knowledge: Option<PathBuf>,
    /// Syntax-only template mining, no semantics.
    #[arg(long)]
    pub syntax: bool,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub sim_threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum LogdetectCmd {
    /// Train the detector on normal sessions and learn failure signatures.
    Train {
        /// Parsed logs from `parse`.
        #[arg(long, value_name = "FILE")]
        parsed: Option<PathBuf>,
        /// Session id → `normal` or failure type.
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Flag anomalous sessions.
    Detect {
        #[arg(long, value_name = "FILE")]
        parsed: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Rank failure types for each session.
    Identify {
        #[arg(long, value_name = "FILE")]
        parsed: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TicketInputs {
    #[arg(long, value_name = "FILE")]
    pub alerts: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub tickets: Option<PathBuf>,
    /// Product → services JSON.
    #[arg(long, value_name = "FILE")]
    pub affinity: Option<PathBuf>,
    /// Take the affinity map from a scenario instead.
    #[arg(long, value_name = "FILE", conflicts_with = "affinity")]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub bucket_s: Option<i64>,
}

#[derive(Debug, Subcommand)]
pub enum TicketsCmd {
    /// Fit the ticket–event scorer on a run with ground truth.
    Train {
        #[command(flatten)]
        inputs: TicketInputs,
        /// groundtruth.json of the run.
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
    },
    /// Group tickets by the incident they report.
    Aggregate {
        #[command(flatten)]
        inputs: TicketInputs,
        /// Scorer weights from `tickets train`.
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DepsCmd {
    /// Continuous dependency intensity per observed call edge.
    Intensity {
        #[arg(long, value_name = "FILE")]
        traces: Option<PathBuf>,
        #[arg(long)]
        interval_s: Option<u32>,
        #[arg(long)]
        max_lag: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RcaCmd {
    /// Detect an anomaly and rank candidate root causes.
    Localize {
        #[arg(long, value_name = "FILE")]
        traces: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        metrics: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        logs: Option<PathBuf>,
        #[arg(long)]
        interval_s: Option<u32>,
        #[arg(long)]
        alarm_threshold: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ResilienceCmd {
    /// One fault-injection test against a fault-free baseline.
    Test {
        #[arg(long, value_name = "FILE")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        target: String,
        #[arg(long)]
        fault_type: FaultType,
        #[arg(long, default_value_t = 1.0)]
        intensity: f64,
        /// Fault start, seconds after the scenario start.
        #[arg(long)]
        start_offset_s: Option<i64>,
        #[arg(long)]
        duration_s: Option<u32>,
    },
    /// Escalating fault intensities per service and fault type.
    Campaign {
        #[arg(long, value_name = "FILE")]
        scenario: Option<PathBuf>,
        /// Services to probe (default: every non-entry service).
        #[arg(long, value_delimiter = ',')]
        services: Vec<String>,
        /// Fault types to inject (default: all).
        #[arg(long, value_delimiter = ',')]
        fault_types: Vec<FaultType>,
        #[arg(long)]
        i0: Option<f64>,
        #[arg(long)]
        escalation: Option<f64>,
        #[arg(long)]
        manifest: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct E2eArgs {
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            let code = match e.kind() {
                _ if !e.use_stderr() => 0,
                // A known flag with a bad or missing value is a validation error.
                ErrorKind::InvalidValue
                | ErrorKind::ValueValidation
                | ErrorKind::MissingRequiredArgument
                | ErrorKind::ArgumentConflict
                | ErrorKind::WrongNumberOfValues => 1,
                _ => 2,
            };
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
