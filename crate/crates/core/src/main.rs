use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};

use s3pr::baseline::save_dictionary;
use s3pr::experiment::{self, ExperimentConfig};
use s3pr::selfcheck;

#[derive(Parser)]
#[command(name = "s3pr", version, about = "Simultaneous source separation and phase retrieval workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate one or more report.csv files into a table.
    Gridplot {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write the aggregate as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the built-in property checks.
    Check,
    /// Train a K-SVD dictionary for the config's dataset and operator.
    LearnDict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            let report = experiment::run(&cfg)?;
            for r in report.rows.iter().filter(|r| r.diagnostic.is_some()) {
                eprintln!("trial {} {}: {}", r.trial, r.method, r.diagnostic.as_deref().unwrap_or_default());
            }
            print!("{}", experiment::render_table(&report.summaries));
            println!("wrote {}", report.output_dir.display());
            Ok(true)
        }
        Command::Gridplot { reports, csv } => {
            let summaries = experiment::gridplot(&reports)?;
            print!("{}", experiment::render_table(&summaries));
            if let Some(path) = csv {
                std::fs::write(&path, experiment::summary_csv(&summaries)).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(true)
        }
        Command::Check => {
            let outcomes = selfcheck::run_checks();
            for c in &outcomes {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(outcomes.iter().all(|c| c.passed))
        }
        Command::LearnDict { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let outcome = experiment::learn_dictionary(&cfg)?;
            save_dictionary(&outcome.dictionary, &out).with_context(|| format!("writing {}", out.display()))?;
            let h = &outcome.objective_history;
            println!("{} atoms, objective {:e} -> {:e} over {} sweeps", outcome.dictionary.len(), h[0], h[h.len() - 1], h.len() - 1);
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
