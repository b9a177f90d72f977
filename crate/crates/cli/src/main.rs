use std::path::PathBuf;
use std::process::ExitCode;

use bfloat_cli::commands::{cmd_check_compat, cmd_gen_data, cmd_limit_study, cmd_run, cmd_sweep, resolve_out};
use bfloat_cli::{CliConfig, CliResult};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bfloat", version, about = "Dispersive waves around a floating obstacle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (the BFLOAT_OUT environment variable takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent sweep members.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for randomized scenarios; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate to t_final or until the blow-up monitor trips (exit 3).
    Run,
    /// Check the compatibility conditions of the initial data (exit 4 on failure).
    CheckCompat,
    /// Write the initial data.
    GenData,
    /// Run a (delta, epsilon) sweep and fit log-log slopes.
    Sweep,
    /// Compare dispersive runs against the hyperbolic solution as delta shrinks.
    LimitStudy,
}

fn execute(cli: &Cli) -> CliResult<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| bfloat_cli::CliError::Config("--config PATH is required".into()))?;
    let mut cfg = CliConfig::load(path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = resolve_out(cli.out.as_deref(), &cfg);
    match cli.command {
        Command::Run => cmd_run(&cfg, &out),
        Command::CheckCompat => cmd_check_compat(&cfg, &out),
        Command::GenData => cmd_gen_data(&cfg, &out),
        Command::Sweep => cmd_sweep(&cfg, &out, cli.jobs),
        Command::LimitStudy => cmd_limit_study(&cfg, &out, cli.jobs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
