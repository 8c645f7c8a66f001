use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use qds::config::{Experiment, ExperimentConfig};
use qds::experiments;
use qds::report::write_outputs;

#[derive(Parser)]
#[command(name = "qds", version, about = "Quasistatic Pomeau-Manneville experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Memory loss along rows against ρ(n).
    Decay(RunArgs),
    /// Continuity of operators and SRB densities in α.
    Perturb(RunArgs),
    /// Tracking of the instantaneous SRB density.
    Adiabatic(RunArgs),
    /// Multi-correlation decay.
    Correlation(RunArgs),
    /// Convergence of time averages ζ_n → ζ.
    Ergodic(RunArgs),
    /// Cone invariance under random admissible maps.
    ConeCheck(RunArgs),
    /// SRB densities and their sanity checks.
    Srb(RunArgs),
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; the manifest goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(experiment: Experiment, args: RunArgs) -> anyhow::Result<bool> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.experiment != experiment {
        bail!(
            "config is for `{}`, not `{}`",
            config.experiment.name(),
            experiment.name()
        );
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", experiment.name())));
    let setup = config.clone().validate()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = args.threads {
        pool = pool.num_threads(k);
    }
    let report = pool
        .build()
        .context("starting worker threads")?
        .install(|| experiments::run(&setup))?;

    let manifest = write_outputs(&report, &config, &out, args.threads)?;
    eprintln!("wrote {} and {}", out.display(), manifest.display());
    for (key, value) in &report.summary {
        eprintln!("  {key} = {value:e}");
    }
    for v in &report.violations {
        eprintln!("VIOLATION: {v}");
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { config } => ExperimentConfig::load(&config)
            .and_then(ExperimentConfig::validate)
            .map(|s| {
                eprintln!("{}: ok ({})", config.display(), s.config.experiment.name());
                true
            })
            .map_err(anyhow::Error::from),
        Command::Decay(a) => run(Experiment::Decay, a),
        Command::Perturb(a) => run(Experiment::Perturb, a),
        Command::Adiabatic(a) => run(Experiment::Adiabatic, a),
        Command::Correlation(a) => run(Experiment::Correlation, a),
        Command::Ergodic(a) => run(Experiment::Ergodic, a),
        Command::ConeCheck(a) => run(Experiment::ConeCheck, a),
        Command::Srb(a) => run(Experiment::Srb, a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
