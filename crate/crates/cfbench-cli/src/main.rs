use clap::{Parser, Subcommand};

use cfbench_cli::commands::{
    cmd_heatmap, cmd_sweep, cmd_synth, cmd_train, HeatmapArgs, SweepArgs, SynthArgs, TrainArgs,
};

/// Benchmark harness comparing latent-space and feature-space counterfactual
/// generators over a binary MNIST classifier.
#[derive(Parser)]
#[command(name = "cfbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier and autoencoder and write model files
    Train(TrainArgs),
    /// Run a generator sweep and write detail/aggregate CSVs
    Sweep(SweepArgs),
    /// Export original/counterfactual/difference images for one sample
    Heatmap(HeatmapArgs),
    /// Generate a deterministic synthetic digit corpus in IDX format
    SynthData(SynthArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Heatmap(args) => cmd_heatmap(args),
        Command::SynthData(args) => cmd_synth(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
