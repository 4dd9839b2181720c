//! `dwellcert`: certify, search, and simulate graph-constrained switched
//! linear systems described in a JSON document.

mod commands;
mod document;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dwellcert::certify::ScanOptions;
use serde_json::json;

use commands::{CertifyArgs, RegionArgs, SearchArgs, SimulateArgs};
use report::{Report, Status};

#[derive(Parser)]
#[command(name = "dwellcert", version, about = "Dwell-time stability certificates for switched linear systems")]
struct Cli {
    /// Indent the JSON report.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ScanFlags {
    /// Largest dwell time scanned.
    #[arg(long, default_value_t = 50.0)]
    tmax: f64,
    /// Grid points over (0, tmax].
    #[arg(long, default_value_t = 2048)]
    grid: usize,
}

impl ScanFlags {
    fn options(self) -> ScanOptions {
        ScanOptions { t_max: self.tmax, grid_points: self.grid, ..ScanOptions::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a system document: schema, graph, and decompositions.
    Validate { file: PathBuf },
    /// Check the edge conditions and report the certificate constants.
    Certify {
        file: PathBuf,
        /// Dwell for one edge, as `r,s=value`; repeatable.
        #[arg(long = "eta")]
        etas: Vec<String>,
        /// Ignore document intervals and grow them around each dwell.
        #[arg(long)]
        auto_intervals: bool,
        #[command(flatten)]
        scan: ScanFlags,
    },
    /// Look for diagonal rescalings that satisfy the edge conditions.
    Search {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        max_iterations: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1e-3)]
        margin: f64,
        /// Write the rescaled, directly certifiable document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a vertex path into simple loops and a loop-free remainder.
    Decompose {
        /// Comma-separated vertices, e.g. `1,2,3,2,3,1,2`.
        #[arg(long)]
        path: String,
    },
    /// Scan dwell time against column scaling for a planar two-vertex ring.
    Region {
        file: PathBuf,
        #[arg(long, default_value = "0,16", allow_hyphen_values = true)]
        t_range: String,
        #[arg(long, default_value = "0.05,20", allow_hyphen_values = true)]
        x_range: String,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// CSV output with columns `t,x,edge12,edge21,both`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate a trajectory exactly and compare it with the certificate.
    Simulate {
        file: PathBuf,
        /// Initial state, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// Draw this many dwells at random from the edge intervals.
        #[arg(long, conflicts_with = "times")]
        switches: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated dwell times, applied along the cycle.
        #[arg(long)]
        times: Option<String>,
        /// Cycle to follow, e.g. `1,2,1`; defaults to the first simple loop.
        #[arg(long)]
        cycle: Option<String>,
        /// Extra samples inside each dwell interval.
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[command(flatten)]
        scan: ScanFlags,
        /// CSV output with columns `t,switch_index,x1..xn,norm`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List simple loops with trace checks and dwell budgets.
    Loops {
        file: PathBuf,
        #[command(flatten)]
        scan: ScanFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let arguments: Vec<String> = std::env::args().skip(1).collect();
    let (name, result) = match &cli.command {
        Command::Validate { file } => ("validate", commands::validate(file)),
        Command::Certify { file, etas, auto_intervals, scan } => (
            "certify",
            commands::certify_cmd(
                file,
                &CertifyArgs { etas: etas.clone(), auto_intervals: *auto_intervals, scan: scan.options() },
            ),
        ),
        Command::Search { file, restarts, max_iterations, seed, margin, out } => (
            "search",
            commands::search_cmd(
                file,
                &SearchArgs {
                    restarts: *restarts,
                    max_iterations: *max_iterations,
                    seed: *seed,
                    margin: *margin,
                    out: out.clone(),
                },
            ),
        ),
        Command::Decompose { path } => ("decompose", commands::decompose(path)),
        Command::Region { file, t_range, x_range, resolution, out } => (
            "region",
            commands::region(
                file,
                &RegionArgs {
                    t_range: t_range.clone(),
                    x_range: x_range.clone(),
                    resolution: *resolution,
                    out: out.clone(),
                },
            ),
        ),
        Command::Simulate { file, x0, switches, seed, times, cycle, samples, scan, out } => (
            "simulate",
            commands::simulate(
                file,
                &SimulateArgs {
                    x0: x0.clone(),
                    switches: *switches,
                    seed: *seed,
                    times: times.clone(),
                    cycle: cycle.clone(),
                    samples: *samples,
                    scan: scan.options(),
                    out: out.clone(),
                },
            ),
        ),
        Command::Loops { file, scan } => ("loops", commands::loops(file, &scan.options())),
    };

    let (report, code) = match result {
        Ok(out) => {
            let code = out.status.exit_code();
            (
                Report {
                    command: name.into(),
                    arguments,
                    status: out.status,
                    tool_version: env!("CARGO_PKG_VERSION"),
                    input_digest: out.digest,
                    payload: out.payload,
                },
                code,
            )
        }
        Err(failure) => {
            eprintln!("dwellcert {name}: {}", failure.message());
            (
                Report {
                    command: name.into(),
                    arguments,
                    status: Status::Error,
                    tool_version: env!("CARGO_PKG_VERSION"),
                    input_digest: None,
                    payload: json!({ "kind": failure.kind(), "message": failure.message() }),
                },
                failure.exit_code(),
            )
        }
    };
    let text = if cli.pretty {
        serde_json::to_string_pretty(&report)
    } else {
        serde_json::to_string(&report)
    };
    let mut stdout = std::io::stdout().lock();
    // A closed pipe (for example `| head`) is not an analysis failure.
    let _ = writeln!(stdout, "{}", text.expect("report serializes"));
    ExitCode::from(code)
}
