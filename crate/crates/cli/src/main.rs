use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twoscale_cli::config::DEFAULT_CONFIG;
use twoscale_cli::pipeline::{self, StageOutput};
use twoscale_cli::{CliError, CliResult, RunConfig};

/// Band edges, envelope solutions and asymptotic fields of layered media.
#[derive(Debug, Parser)]
#[command(name = "twoscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration (the built-in two-layer stack when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Half-trace scan and band edges.
    Bands,
    /// Stationary points with curvatures and identity checks.
    Stationary,
    /// Envelope solution for the selected point.
    Envelope,
    /// Asymptotic field synthesis and its Maxwell residual.
    Synthesize,
    /// The full acceptance suite.
    Validate,
}

fn report(o: &StageOutput) {
    for w in &o.warnings {
        eprintln!("warning: {w}");
    }
    for f in &o.files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config {
                field: "--threads".into(),
                message: e.to_string(),
            })?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_toml(DEFAULT_CONFIG)?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    match cli.command {
        Command::Bands => report(&pipeline::run_bands(&cfg, &out)?),
        Command::Stationary => report(&pipeline::run_stationary(&cfg, &out)?),
        Command::Envelope => report(&pipeline::run_envelope(&cfg, &out)?),
        Command::Synthesize => report(&pipeline::run_synthesize(&cfg, &out)?),
        Command::Validate => {
            let (rep, o) = pipeline::run_validate(&cfg, &out)?;
            for c in &rep.criteria {
                println!("{}", c.line());
            }
            report(&o);
            if !rep.passed {
                return Err(CliError::ValidationFailed(format!("criteria {:?} failed", rep.failures())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
