use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use docadapt_core::error::Error as CoreError;

mod commands;
mod config;
mod manifest;

#[derive(Parser, Debug)]
#[command(
    name = "docadapt",
    version,
    about = "Domain adaptation for document understanding with synthetic annotations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed (overrides the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON config file; keys override the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a toy corpus as JSON Lines with split tags and a label sidecar.
    GenCorpus(commands::GenCorpusArgs),
    /// Synthetic layout annotation, tags and inquiries for the D_n documents.
    Annotate(commands::AnnotateArgs),
    /// Domain adaptation on D_n; writes an F_n checkpoint.
    Adapt(commands::AdaptArgs),
    /// Fine-tune on the guidance set, from scratch or from an adapted checkpoint.
    Finetune(commands::FinetuneArgs),
    /// Predict on a split and write predictions plus metrics.
    Infer(commands::InferArgs),
    /// Compute metrics from a prediction dump.
    Eval(commands::EvalArgs),
    /// Run an experiment grid.
    Sweep(commands::SweepArgs),
    /// Collect metrics and sweep tables into a markdown report.
    Report(commands::ReportArgs),
}

/// Flag or argument problems detected by the command line layer.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            if let CoreError::Io(io) = e {
                if io.kind() == std::io::ErrorKind::NotFound {
                    return 1;
                }
            }
            return if e.is_validation() { 1 } else { 2 };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            return if io.kind() == std::io::ErrorKind::NotFound {
                1
            } else {
                2
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenCorpus(a) => commands::gen_corpus(a),
        Command::Annotate(a) => commands::annotate(a),
        Command::Adapt(a) => commands::adapt(a),
        Command::Finetune(a) => commands::finetune(a),
        Command::Infer(a) => commands::infer(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
