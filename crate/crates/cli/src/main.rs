//! Command-line front end: synthesize datasets, run one method, sweep seeds.

mod commands;
mod config;
mod dataset;
mod methods;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spectral_fusion::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(
    name = "spectral-fusion",
    version,
    about = "Multimodal spectral clustering experiments"
)]
struct Cli {
    /// Worker threads for trials and sweeps (default: all cores).
    #[arg(long, global = true, env = "SPECTRAL_FUSION_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic multimodal dataset and export it.
    Synth(commands::SynthArgs),
    /// Run one method on one dataset and write a report.
    Run(commands::RunArgs),
    /// Repeat a method over a range of seeds.
    Sweep(commands::SweepArgs),
    /// Summarize a dataset and check its Laplacians.
    Info(commands::InfoArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()).map(Error::kind) {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Data) => 3,
        Some(ErrorKind::Numerical) => 4,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Run(args) => commands::run(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Info(args) => commands::info(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
