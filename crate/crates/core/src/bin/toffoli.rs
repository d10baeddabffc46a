use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qutrit_toffoli::runner::{run, NoiseSource, Pipeline, RunConfig};

/// Simulate and characterize the qutrit-assisted Toffoli gate.
///
/// Set TOFFOLI_THREADS to fix the worker thread count.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one pipeline and write its artifacts.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    TruthTable,
    ProcessTomo,
    Certify,
    Table1Trace,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Ideal,
    Device,
    Custom,
}

#[derive(Args)]
struct RunArgs {
    pipeline: PipelineArg,
    #[arg(long, value_enum, default_value = "ideal")]
    noise: NoiseArg,
    /// Device description for `--noise custom` (flat key = value file).
    #[arg(long, value_name = "PATH")]
    device_config: Option<PathBuf>,
    /// Shots per measurement setting; 0 uses exact expectations.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    /// Monte Carlo samples for certification.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap replicas for the tomography confidence interval.
    #[arg(long, default_value_t = 200)]
    resamples: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn config(args: RunArgs) -> Result<RunConfig, String> {
    let pipeline = match args.pipeline {
        PipelineArg::TruthTable => Pipeline::TruthTable,
        PipelineArg::ProcessTomo => Pipeline::ProcessTomo,
        PipelineArg::Certify => Pipeline::Certify,
        PipelineArg::Table1Trace => Pipeline::Table1Trace,
    };
    let noise = match (args.noise, args.device_config) {
        (NoiseArg::Ideal, None) => NoiseSource::Ideal,
        (NoiseArg::Device, None) => NoiseSource::Device(None),
        (NoiseArg::Custom, Some(path)) => NoiseSource::Device(Some(path)),
        (NoiseArg::Custom, None) => return Err("--noise custom needs --device-config PATH".into()),
        (_, Some(_)) => return Err("--device-config is only used with --noise custom".into()),
    };
    Ok(RunConfig {
        pipeline,
        noise,
        shots: args.shots,
        samples: args.samples,
        seed: args.seed,
        out_dir: args.out,
        resamples: args.resamples,
    })
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("TOFFOLI_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| format!("TOFFOLI_THREADS must be a positive integer, got `{value}`"))?;
    if threads == 0 {
        return Err("TOFFOLI_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    let outcome = init_threads()
        .and_then(|_| config(args))
        .and_then(|cfg| run(&cfg).map_err(|e| e.to_string()));
    match outcome {
        Ok(summary) => {
            println!("{}", summary.line);
            ExitCode::SUCCESS
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
