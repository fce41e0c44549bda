//! `hopcap`: optimal hop distance and water-filling power control for
//! single-cell multihop networks, from a TOML config.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 output I/O.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use commands::{Context, RateUnit};
use config::RunConfig;
use error::CliError;
use output::{manifest_path, sha256_hex, write_file, Manifest, Table};

#[derive(Parser, Debug)]
#[command(
    name = "hopcap",
    version,
    about = "Transport-capacity hop distance optimizer and MAC simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV output path; a `<out>.manifest.json` is written beside it.
    /// Without it the CSV goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides `simulate.horizon` (contention periods).
    #[arg(long, global = true)]
    horizon: Option<u64>,

    /// Report rates in bits.
    #[arg(long, global = true, conflicts_with = "nats")]
    bits: bool,

    /// Report rates in nats (default).
    #[arg(long, global = true)]
    nats: bool,

    /// Grid override `min:max:points[:log|:linear]`.
    #[arg(long, global = true)]
    grid: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Water-filling solution at given normalized powers.
    Waterfill {
        /// Normalized power; repeatable. Falls back to a `pi` grid.
        #[arg(long = "pi")]
        pi: Vec<f64>,
    },
    /// Optimal hop distance and the stationary set.
    Optimize,
    /// Rate and transport capacity over a distance or power grid.
    Sweep,
    /// All stationary points of `d Gamma(d)`.
    StationaryPoints,
    /// Monte Carlo saturation-MAC run against the analytic values.
    Simulate {
        /// Per-period trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fixed transmission time versus fixed packet size.
    CompareFtt,
    /// Single-cell spatial reuse bound.
    SingleCellBound,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Waterfill { .. } => "waterfill",
            Command::Optimize => "optimize",
            Command::Sweep => "sweep",
            Command::StationaryPoints => "stationary-points",
            Command::Simulate { .. } => "simulate",
            Command::CompareFtt => "compare-ftt",
            Command::SingleCellBound => "single-cell-bound",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    let config_path = cli
        .common
        .config
        .clone()
        .ok_or_else(|| CliError::validation("--config is required"))?;
    let (cfg, raw) = RunConfig::load(&config_path)?;
    let ctx = Context {
        cfg,
        unit: if cli.common.bits {
            RateUnit::Bits
        } else {
            RateUnit::Nats
        },
        grid: cli.common.grid.clone(),
        seed: cli.common.seed,
        horizon: cli.common.horizon,
    };

    let (table, extra): (Table, _) = match &cli.command {
        Command::Waterfill { pi } => (commands::waterfill(&ctx, pi)?, None),
        Command::Optimize => (commands::optimize(&ctx)?, None),
        Command::Sweep => (commands::sweep(&ctx)?, None),
        Command::StationaryPoints => (commands::stationary_points(&ctx)?, None),
        Command::Simulate { trace } => commands::simulate(&ctx, trace.clone())?,
        Command::CompareFtt => (commands::compare_ftt(&ctx)?, None),
        Command::SingleCellBound => (commands::single_cell_bound(&ctx)?, None),
    };
    let bytes = table.to_bytes()?;

    let mut outputs = Vec::new();
    if let Some(extra) = extra {
        outputs.push(write_file(&extra.path, &extra.table.to_bytes()?)?);
    }
    let Some(out) = &cli.common.out else {
        std::io::stdout().lock().write_all(&bytes)?;
        return Ok(());
    };
    outputs.insert(0, write_file(out, &bytes)?);
    let seeded = matches!(cli.command, Command::Simulate { .. } | Command::CompareFtt);
    let manifest = Manifest {
        tool: "hopcap",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        args: std::env::args().skip(1).collect(),
        config: Some(config_path),
        config_sha256: Some(sha256_hex(&raw)),
        seed: seeded.then(|| ctx.seed()),
        outputs,
        started_unix_s,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&manifest_path(out), &json)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hopcap: {e}");
            e.exit_code()
        }
    }
}
