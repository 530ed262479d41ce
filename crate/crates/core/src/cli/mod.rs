//! Launcher behind the `deskbot` binary.
//!
//! ```text
//! deskbot --config robot.json                      # serve until Ctrl-C
//! deskbot --config robot.json --scenario sq.json --trace-out out/
//! deskbot --export-footprints out/trip.jsonl       # footprint CSV on stdout
//! ```
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid config or arguments,
//! 3 listen address unavailable, 4 invalid or rejected scenario.

pub mod config;
pub mod export;
pub mod scenario;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{ChassisConfig, ConfigError, RunConfig};
pub use export::{export_footprints, footprints_csv, write_footprints};
pub use scenario::{run_scenario, Ack, ScenarioError, ScenarioOutput, ScenarioScript, ScenarioStep};

use crate::daps::{Durability, SampleStore};
use crate::deadreckoning::write_trip_log;
use crate::service::{router, serve, ControlService, LoopOptions, Pacing};
use crate::sim::Simulation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BIND: i32 = 3;
pub const EXIT_SCENARIO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "deskbot", version, about = "Two-wheel robot simulator and control service")]
pub struct Args {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run this scenario headless and exit instead of serving.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Override the config's listen address.
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<String>,
    /// Directory for trace, trip log and footprints.
    #[arg(long, value_name = "DIR")]
    pub trace_out: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Convert a trip log to a footprint CSV on stdout and exit.
    #[arg(long, value_name = "TRIP_LOG", conflicts_with_all = ["scenario", "listen"])]
    pub export_footprints: Option<PathBuf>,
}

/// Parses `argv` and runs; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    run(args)
}

pub fn run(args: Args) -> i32 {
    if let Some(log) = &args.export_footprints {
        return export(log);
    }
    let mut config = match &args.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{}:{}: {}", path.display(), e.line, e.message);
                return EXIT_CONFIG;
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(addr) = args.listen {
        config.listen_addr = addr;
    }
    match &args.scenario {
        Some(path) => scenario(&config, path, args.trace_out.unwrap_or_else(|| PathBuf::from("."))),
        None => serve_interactive(&config, args.trace_out),
    }
}

fn export(log: &PathBuf) -> i32 {
    let file = match File::open(log) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {e}", log.display());
            return EXIT_FAILURE;
        }
    };
    let stdout = io::stdout();
    match export_footprints(BufReader::new(file), BufWriter::new(stdout.lock())) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("{}: {e}", log.display());
            EXIT_FAILURE
        }
    }
}

fn scenario(config: &RunConfig, path: &Path, out: PathBuf) -> i32 {
    let script = match ScenarioScript::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_SCENARIO;
        }
    };
    match run_scenario(config, &script, &out) {
        Ok(result) => {
            eprintln!(
                "{} ticks, {} segments, total {:.6} m, net {:.6} m",
                result.ticks,
                result.segments.len(),
                result.estimate.total_distance_m,
                result.estimate.net_displacement_m
            );
            EXIT_OK
        }
        Err(e @ ScenarioError::Rejected { .. }) => {
            eprintln!("{}: {e}", path.display());
            EXIT_SCENARIO
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_FAILURE
        }
    }
}

fn serve_interactive(config: &RunConfig, trace_out: Option<PathBuf>) -> i32 {
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_FAILURE;
        }
    };
    let listener = match runtime.block_on(tokio::net::TcpListener::bind(&config.listen_addr)) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot listen on {}: {e}", config.listen_addr);
            return EXIT_BIND;
        }
    };
    let data_dir = config.data_dir.clone().unwrap_or_else(|| PathBuf::from("deskbot-data"));
    let result = (|| -> Result<(), Box<dyn std::error::Error>> {
        let store = SampleStore::open(&data_dir, Durability::Flush)?;
        let sim = Simulation::new(config.sim_config(), store)?;
        let trace: Option<Box<dyn Write + Send>> = match &trace_out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(Box::new(BufWriter::new(File::create(dir.join("trace.csv"))?)))
            }
            None => None,
        };
        let service = ControlService::start(sim, LoopOptions { pacing: Pacing::RealTime, trace, ..LoopOptions::default() });
        let app = router(service.handle(), config.ui_dir.clone());
        eprintln!("listening on http://{}", listener.local_addr()?);
        runtime.block_on(serve(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
        }))?;
        let mut sim = service.shutdown()?;
        let segments = sim.finish()?;
        if let Some(dir) = &trace_out {
            let mut trip = BufWriter::new(File::create(dir.join("trip.jsonl"))?);
            write_trip_log(&mut trip, &segments)?;
            trip.flush()?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            EXIT_FAILURE
        }
    }
}
