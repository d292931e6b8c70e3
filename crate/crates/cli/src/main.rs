use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use polykin_cli::commands::{self, RunOptions};
use polykin_cli::{parse_config, parse_config_unchecked};

#[derive(Parser, Debug)]
#[command(name = "polykin", version, about = "Relaxation and transport runs for polyatomic gas mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for moments.csv and summary.json.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Minmod-limited second-order transport.
    #[arg(long, global = true)]
    second_order: bool,
    /// Abort on the first entropy increase when the preconditions hold.
    #[arg(long, global = true)]
    strict_h: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Space-homogeneous relaxation.
    Relax,
    /// 1D Riemann problem with the reduced system.
    Transport1d,
    /// Full against reduced integration.
    ChuCompare,
    /// Closure admissibility, positivity bound and residual sweep.
    ValidateClosure,
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let path = cli.config.as_ref().context("--config <path> is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let opts = RunOptions {
        out: cli.out.clone(),
        second_order: cli.second_order,
        strict_h: cli.strict_h,
    };
    let summary = match cli.command {
        Command::ValidateClosure => {
            let cfg = parse_config_unchecked(&text)?;
            commands::validate_closure(&cfg, Some(&opts.out))?
        }
        cmd => {
            let cfg = parse_config(&text)?;
            match cmd {
                Command::Relax => commands::relax(&cfg, &opts)?,
                Command::Transport1d => commands::transport1d(&cfg, &opts)?,
                Command::ChuCompare => commands::chu_compare(&cfg, &opts)?,
                Command::ValidateClosure => unreachable!(),
            }
        }
    };
    for t in &summary.tripped {
        eprintln!("tripped: {t}");
    }
    Ok(summary.ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLYKIN_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
