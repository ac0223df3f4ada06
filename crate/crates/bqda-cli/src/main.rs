//! Command line front end for uncertainty-aware cube classification.

mod cmd;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bqda",
    version,
    about = "Uncertainty-aware Bayesian classification of multi-realization data cubes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled data cube from a JSON spec.
    Synth(cmd::synth::SynthArgs),
    /// Split a cube and fit a classifier on the training pixels.
    Train(cmd::train::TrainArgs),
    /// Score models or probability tables on the held-out pixels.
    Evaluate(cmd::evaluate::EvaluateArgs),
    /// Run a model x fraction x seed grid and collect metrics.
    Benchmark(cmd::benchmark::BenchmarkArgs),
    /// Project one realization onto its two leading principal components.
    Pca(cmd::pca::PcaArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => util::EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => cmd::synth::run(args),
        Command::Train(args) => cmd::train::run(args),
        Command::Evaluate(args) => cmd::evaluate::run(args),
        Command::Benchmark(args) => cmd::benchmark::run(args),
        Command::Pca(args) => cmd::pca::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
