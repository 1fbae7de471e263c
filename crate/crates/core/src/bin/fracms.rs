use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracms::harness::{run_experiment, ExperimentConfig, ExperimentReport, Setup};
use fracms::Result;

#[derive(Parser)]
#[command(name = "fracms", version, about = "Multiscale time-fractional diffusion solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheme of a config file and write the outputs
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build the coarse basis of a config and cache it
    Basis {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the stability report of a config
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one of the two built-in experiments
    Experiment {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn summarize(report: &ExperimentReport) {
    print!("{}", report.stability.to_text());
    for (name, run) in &report.runs {
        let status = match run.diverged_at {
            Some(k) => format!("diverged at step {k}"),
            None => format!("{} steps", run.steps),
        };
        match run.errors.as_ref().and_then(|e| e.last()) {
            Some((l2, en)) => println!("{:>6}: {status}, final error L2 {l2:.4e} energy {en:.4e}", name.as_str()),
            None => println!("{:>6}: {status}", name.as_str()),
        }
    }
    if let Some(dir) = report.files.first().and_then(|p| p.parent()) {
        println!("outputs in {}", dir.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { config } => summarize(&run_experiment(&ExperimentConfig::read(&config)?)?),
        Command::Basis { config, out } => {
            let mut cfg = ExperimentConfig::read(&config)?;
            cfg.basis_cache = Some(out.clone());
            let setup = Setup::new(&cfg)?;
            println!(
                "{} cem + {} v2 functions cached in {}",
                setup.combined.n1,
                setup.combined.n2,
                out.display()
            );
        }
        Command::Stability { config } => {
            let setup = Setup::new(&ExperimentConfig::read(&config)?)?;
            print!("{}", setup.stability()?.to_text());
        }
        Command::Experiment { which, alpha, out } => {
            let mut cfg = ExperimentConfig::experiment(which)?;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            cfg.validate()?;
            summarize(&run_experiment(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

