//! Command-line front end: loads a scenario, runs the simulator, and writes
//! metrics files.
//!
//! Exit codes: 0 on success, 1 on any validation error (bad flags,
//! unreadable or invalid scenario, infeasible architecture), 2 when the
//! simulator detects a runtime invariant violation.

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};
use mogsim_core::scenario::AllocatorKind;
use mogsim_core::{parse_scenario, run_batch, Architecture, MetricsReport, RunJob, SimError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArchArg {
    /// Client-server, every client one hop from the server.
    Cs,
    /// Client-server over the mesh.
    CsOverlay,
    /// Every player node hosts every service.
    P2p,
    /// Allocator-driven distributed placement.
    Hybrid,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Cs => Architecture::ClientServerDirect,
            ArchArg::CsOverlay => Architecture::ClientServerOverlay,
            ArchArg::P2p => Architecture::PureP2P,
            ArchArg::Hybrid => Architecture::HybridDistributed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AllocatorArg {
    Heuristic,
    Auction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmitArg {
    Csv,
    Json,
    Both,
}

/// Deterministic simulator for multiplayer games on meshes of shared
/// mobile devices.
#[derive(Debug, Parser)]
#[command(name = "mogsim", version, disable_help_subcommand = true)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,

    /// System architecture to simulate.
    #[arg(long, value_enum, value_name = "ARCH")]
    arch: ArchArg,

    /// PRNG seed (first seed of the sweep in --sweep mode).
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Number of simulation ticks.
    #[arg(long, default_value_t = 1000, value_name = "N")]
    ticks: u64,

    /// Override the scenario's allocator (hybrid architecture only).
    #[arg(long, value_enum)]
    allocator: Option<AllocatorArg>,

    /// Output directory for metrics files.
    #[arg(long, default_value = "./out", value_name = "DIR")]
    out: PathBuf,

    /// Which metrics encodings to write.
    #[arg(long, value_enum, default_value_t = EmitArg::Both)]
    emit: EmitArg,

    /// Run N consecutive seeds starting at --seed, concurrently; output
    /// files are suffixed with the seed.
    #[arg(long, value_name = "N")]
    sweep: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::from(0),
        Err(code) => ExitCode::from(code),
    }
}

fn fail(message: impl std::fmt::Display) -> u8 {
    eprintln!("mogsim: {message}");
    1
}

fn sim_exit(e: &SimError) -> u8 {
    if e.is_invariant_violation() {
        2
    } else {
        1
    }
}

fn execute(cli: &Cli) -> Result<(), u8> {
    let text = std::fs::read_to_string(&cli.scenario)
        .map_err(|e| fail(format_args!("{}: {e}", cli.scenario.display())))?;
    let mut scenario = parse_scenario(&text).map_err(fail)?;
    if let Some(alloc) = cli.allocator {
        scenario.allocator = match alloc {
            AllocatorArg::Heuristic => AllocatorKind::Heuristic,
            AllocatorArg::Auction => AllocatorKind::Auction,
        };
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| fail(format_args!("{}: {e}", cli.out.display())))?;

    let arch = Architecture::from(cli.arch);
    let seeds: Vec<u64> = match cli.sweep {
        Some(n) => (0..n).map(|i| cli.seed.wrapping_add(i)).collect(),
        None => vec![cli.seed],
    };
    let jobs: Vec<RunJob> = seeds
        .iter()
        .map(|&seed| RunJob {
            scenario: scenario.clone(),
            arch,
            seed,
            ticks: cli.ticks,
        })
        .collect();
    let results = run_batch(&jobs);

    let mut worst: u8 = 0;
    for (job, result) in jobs.iter().zip(&results) {
        match result {
            Ok(report) => {
                let stem = match cli.sweep {
                    Some(_) => format!("metrics-{}", job.seed),
                    None => "metrics".to_owned(),
                };
                write_report(cli, report, &stem)?;
            }
            Err(e) => {
                eprintln!("mogsim: seed {}: {e}", job.seed);
                worst = worst.max(sim_exit(e));
            }
        }
    }
    if worst == 0 {
        Ok(())
    } else {
        Err(worst)
    }
}

fn write_report(cli: &Cli, report: &MetricsReport, stem: &str) -> Result<(), u8> {
    let write = |name: String, data: String| {
        let path = cli.out.join(name);
        std::fs::write(&path, data).map_err(|e| fail(format_args!("{}: {e}", path.display())))
    };
    if matches!(cli.emit, EmitArg::Csv | EmitArg::Both) {
        write(format!("{stem}.csv"), report.to_csv())?;
    }
    if matches!(cli.emit, EmitArg::Json | EmitArg::Both) {
        write(format!("{stem}.json"), report.to_json())?;
    }
    Ok(())
}
