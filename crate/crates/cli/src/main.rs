//! `lesim`: simulate lattice jump processes, tabulate local-equilibrium families and run
//! the diagnostics that compare the two.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lesim_core::commands::{
    cmd_analytics, cmd_diagnose, cmd_simulate, cmd_tables, AnalyticsFamily, CommandError, Grid,
    SimulateOptions, Status,
};
use lesim_core::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "lesim", version, about)]
struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "LESIM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run replica ensembles for every lattice size and write per-site statistics.
    Simulate {
        /// Record elapsed time in the manifest (the manifest is then not reproducible).
        #[arg(long)]
        record_wall_clock: bool,
    },
    /// Tabulate one closed-form family on a grid.
    Analytics {
        /// `gibbs`, `zero_range` or `zero_range:<rate>`.
        #[arg(long)]
        family: String,
        /// Bond strength for the `gibbs` family.
        #[arg(long, default_value_t = 3.0)]
        k: f64,
        /// `lo:hi:count`.
        #[arg(long)]
        grid: String,
    },
    /// Run the diagnostics on the outputs of `simulate`.
    Diagnose,
    /// Write the standard reference tables.
    Tables,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CommandError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CommandError::Invalid("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CommandError::MissingDependency(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| Path::new("out").to_path_buf())
}

fn run(cli: &Cli) -> Result<(), CommandError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CommandError::Invalid(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate { record_wall_clock } => {
            let cfg = load_config(cli)?;
            let manifest = cmd_simulate(&cfg, &cfg.output_dir, SimulateOptions { record_wall_clock: *record_wall_clock })?;
            println!("wrote {} files to {}", manifest.files.len(), cfg.output_dir.display());
        }
        Command::Analytics { family, k, grid } => {
            let family: AnalyticsFamily = family.parse()?;
            let grid: Grid = grid.parse()?;
            let path = cmd_analytics(family, *k, grid, &out_dir(cli))?;
            println!("wrote {}", path.display());
        }
        Command::Diagnose => {
            let cfg = load_config(cli)?;
            let report = cmd_diagnose(&cfg, &cfg.output_dir)?;
            print!("{}", report.render());
            let failed = report.verdicts.iter().filter(|v| v.status == Status::Fail).count();
            log::info!("{failed} of {} diagnostics failed", report.verdicts.len());
        }
        Command::Tables => {
            for path in cmd_tables(&out_dir(cli))? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
