use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use shockld::harness::{parse_config, run, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Optimize,
    Mc,
    Is,
    #[value(name = "sweep-x0")]
    SweepX0,
    #[value(name = "sweep-T")]
    SweepT,
    SweepEps,
    Convexity,
    CenterDiagnostics,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Optimize => Subcommand::Optimize,
            Command::Mc => Subcommand::Mc,
            Command::Is => Subcommand::Is,
            Command::SweepX0 => Subcommand::SweepX0,
            Command::SweepT => Subcommand::SweepT,
            Command::SweepEps => Subcommand::SweepEps,
            Command::Convexity => Subcommand::Convexity,
            Command::CenterDiagnostics => Subcommand::CenterDiagnostics,
        }
    }
}

/// Most probable paths and rare-event estimators for stochastic viscous shocks.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `run.output` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed, overriding `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "SHOCKLD_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shockld: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    let config = parse_config(&text)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.run.output));
    let summary = run(cli.command.into(), &config, &out, cli.seed)?;
    for line in &summary.lines {
        println!("{line}");
    }
    for file in &summary.files {
        log::info!("wrote {}", file.display());
    }
    Ok(())
}
