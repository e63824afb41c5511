use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ghf_cli::config::{Mode, RunConfig};
use ghf_cli::error::CliError;
use ghf_cli::{check, run};

/// Environment variable capping the number of worker threads.
const THREADS_VAR: &str = "GHF_THREADS";

#[derive(Parser)]
#[command(name = "ghf", version, about = "Generalized Hartree-Fock runs for the Hubbard model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single seed, replacing the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, replacing `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Accept unconverged solver runs.
    #[arg(long, global = true)]
    allow_unconverged: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    Ground,
    Thermal,
    Anneal,
    Dynamics,
    Sweep,
    /// Run the oracle suite.
    Check,
}

fn threads(cli: &Cli) -> Result<Option<usize>, CliError> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Config {
            key: THREADS_VAR.into(),
            message: format!("expected a positive integer, got `{v}`"),
        }),
        Err(_) => Ok(None),
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli)? {
        if n == 0 {
            return Err(CliError::Config { key: "threads".into(), message: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let mode = match cli.command {
        Command::Check => {
            let lines = check::run_checks(cli.seed.unwrap_or(0))?;
            let failed = lines.iter().filter(|l| !l.pass).count();
            for l in &lines {
                println!("[{}] {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail);
            }
            if failed > 0 {
                return Err(CliError::Io(format!("{failed} oracle check(s) failed")));
            }
            return Ok(());
        }
        Command::Ground => Mode::Ground,
        Command::Thermal => Mode::Thermal,
        Command::Anneal => Mode::Anneal,
        Command::Dynamics => Mode::Dynamics,
        Command::Sweep => Mode::Sweep,
    };
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config {
        key: "--config".into(),
        message: "a configuration file is required for this subcommand".into(),
    })?;
    let mut config = RunConfig::load(path)?;
    if let Some(m) = config.mode {
        if m != mode {
            return Err(CliError::Config {
                key: "mode".into(),
                message: format!("config says {m:?} but the subcommand is {mode:?}"),
            });
        }
    }
    if let Some(s) = cli.seed {
        config.seeds = vec![s];
    }
    if let Some(o) = &cli.out {
        config.output.directory = o.clone();
    }
    config.allow_unconverged |= cli.allow_unconverged;
    let outcome = run::execute(&config, mode)?;
    run::write_outputs(&config, mode, &outcome)?;
    log::info!("{} rows written to {}", outcome.rows.len(), config.output.directory.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Unconverged(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
