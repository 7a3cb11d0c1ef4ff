use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtigp_cli::commands;
use dtigp_cli::config::{load_config, Overrides};
use dtigp_cli::CliError;

/// Deep-kernel GP interaction prediction with Bayesian top-K selection.
///
/// Any config field can be set with `--section.field value`, for example
/// `--model.epochs 20` or `--selection.method score`.
#[derive(Debug, Parser)]
#[command(name = "dtigp", version)]
struct Cli {
    /// JSON run config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// run seed; required here or in the config file
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// MAP (point-mass) variant of the model
    #[arg(long, global = true)]
    map: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit a synthetic interaction dataset with features and ground truth
    Synth,
    /// Binarize, assign scaffold folds and write the prepared dataset
    Prepare,
    /// Train on the training folds; writes a checkpoint and ELBO trace
    Train,
    /// Predictive mean, variance and class probability on the test folds
    Predict,
    /// Posterior sampling, precedence and top-K selection on the test folds
    Select,
    /// Metrics, calibration and FDR-vs-K curves on the test folds
    Evaluate,
}

/// Splits `--a.b value` and `--a.b=value` pairs off the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut values = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--").filter(|f| f.split('=').next().unwrap_or("").contains('.')) else {
            rest.push(a);
            continue;
        };
        match flag.split_once('=') {
            Some((k, v)) => values.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config(format!("--{flag} needs a value")))?;
                values.push((flag.to_string(), v));
            }
        }
    }
    Ok((rest, values))
}

fn run() -> Result<(), CliError> {
    let (args, values) = split_overrides(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    let ov = Overrides {
        seed: cli.seed,
        out: cli.out,
        map: cli.map,
        values,
    };
    let cfg = load_config(cli.config.as_deref(), &ov)?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Prepare => commands::prepare(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Predict => commands::predict_cmd(&cfg),
        Command::Select => commands::select(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dtigp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
