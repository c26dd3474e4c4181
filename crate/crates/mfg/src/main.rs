use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;
use mfg::{CliError, Command, LoadedConfig, Overrides};

/// Numerical laboratory for first-order potential mean field games.
#[derive(Debug, Parser)]
#[command(name = "mfg", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the result here instead of standard output (overrides output.path).
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Compute an equilibrium of the reduced game (JSON).
    Solve,
    /// List all equilibria of a one-player game on the line (CSV).
    Enumerate,
    /// Compare Hopf–Lax, Burgers and equilibrium selection along a sweep (CSV).
    Select,
    /// Run the Burgers solvers and dump the fields (CSV).
    Burgers,
    /// Run the structural checkers on a coupling (JSON).
    Check,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Enumerate => Command::Enumerate,
            Cmd::Select => Command::Select,
            Cmd::Burgers => Command::Burgers,
            Cmd::Check => Command::Check,
        }
    }
}

fn init_logging() {
    let level = match std::env::var("MFG_LOG").as_deref() {
        Ok("quiet") => LevelFilter::Off,
        Ok("debug") => LevelFilter::Debug,
        Ok("info") | Err(_) => LevelFilter::Info,
        Ok(other) => {
            eprintln!("MFG_LOG={other} is not one of quiet, info, debug; using info");
            LevelFilter::Info
        }
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).init();
}

fn execute(cli: &Cli) -> Result<Option<String>, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let source =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let cfg = LoadedConfig::parse(&source)?;
    let threads = cli.threads.unwrap_or(0);
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let out = pool.install(|| mfg::run(cli.command.into(), &cfg, Overrides { seed: cli.seed }))?;
    let target = cli.output.clone().or_else(|| cfg.config.output.path.as_ref().map(PathBuf::from));
    match target {
        Some(p) => std::fs::write(&p, &out.body)?,
        None => std::io::stdout().lock().write_all(out.body.as_bytes())?,
    }
    Ok(out.not_converged)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging();
    match execute(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(why)) => {
            eprintln!("mfg: not converged: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("mfg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
