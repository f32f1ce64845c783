use std::path::PathBuf;
use std::process::ExitCode;

use cel_cli::error::HarnessError;
use cel_cli::{fim, harness};
use cel_core::synthetic::{self, Profile};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cel", version, about = "Continual-learning LSTM forecaster with elastic weight consolidation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train over all contexts and write metrics, traces, predictions and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run once per context count and pick the count with the best mean evaluation R².
    GridSearch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated context counts.
        #[arg(long, value_delimiter = ',', default_value = "6,7,8,9,10")]
        n: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the configured λ against λ = 0 over several seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Number of consecutive seeds starting at the config seed.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild fim_export.csv from a run directory's Fisher snapshots.
    FimExport {
        #[arg(long)]
        run: PathBuf,
    },
    /// Write a synthetic stand-in series (mpox, influenza or measles) as CSV.
    Synth {
        #[arg(long)]
        profile: Profile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, data, out } => {
            let report = harness::run(&config, &data, &out)?;
            println!(
                "memory_stability={:.6} mean_eval_r2={:.6} contexts={} out={}",
                report.memory_stability,
                report.mean_eval_r2(),
                report.eval_r2.len(),
                out.display()
            );
        }
        Command::GridSearch {
            config,
            data,
            n,
            out,
        } => {
            let result = harness::grid_search(&config, &data, &n, &out)?;
            for line in &result.selection.trace {
                println!("{line}");
            }
            for cell in result.cells.iter().filter(|c| !c.ok) {
                eprintln!(
                    "N={} failed: {}",
                    cell.n_contexts,
                    cell.error.as_deref().unwrap_or("unknown")
                );
            }
        }
        Command::Ablate {
            config,
            data,
            seeds,
            out,
        } => {
            let result = harness::ablate(&config, &data, seeds, &out)?;
            print!("{}", harness::ablation_table(&result));
        }
        Command::FimExport { run } => {
            let path = fim::fim_export(&run)?;
            println!("{}", path.display());
        }
        Command::Synth { profile, seed, out } => {
            let series = synthetic::generate(profile, seed);
            harness::write_series_csv(&out, &series)?;
            println!("{} points ({}) -> {}", series.len(), profile.name(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cel: {} error: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
