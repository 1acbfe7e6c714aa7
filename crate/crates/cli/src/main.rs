//! `reprompt`: command-line driver for the prompt-recovery pipeline.
//!
//! Logs go to stderr. On failure the last stderr line is a JSON object
//! `{"error": code, "message": ..., "problems": [...]}` and the exit status
//! is nonzero (2 for usage and configuration errors, 1 otherwise).

mod annotate;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use tracing_subscriber::EnvFilter;

use crate::config::ConfigFile;

#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<String>,
    #[serde(skip)]
    pub exit: u8,
}

impl CliError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        let code = code.into();
        let exit = if code == "invalid_config" || code == "usage" { 2 } else { 1 };
        CliError { code, message: message.into(), problems: Vec::new(), exit }
    }

    pub fn invalid_config(problems: Vec<String>) -> Self {
        let message = format!("{} configuration problem(s): {}", problems.len(), problems.join("; "));
        CliError { problems, ..CliError::new("invalid_config", message) }
    }
}

impl From<reprompt_core::Error> for CliError {
    fn from(e: reprompt_core::Error) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<reprompt_core::annostudio::AnnotationError> for CliError {
    fn from(e: reprompt_core::annostudio::AnnotationError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<reprompt_client::ClientError> for CliError {
    fn from(e: reprompt_client::ClientError) -> Self {
        CliError::new(e.code().to_string(), e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "reprompt", version, about = "Prompt-recovery pipeline: corpus, generation, recovery, evaluation, annotation")]
pub struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true, env = "REPROMPT_CONFIG")]
    pub config: Option<PathBuf>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a raw Dolly or native JSONL file into a corpus.
    Ingest(pipeline::IngestArgs),
    /// Keep only the five categories whose instructions are recoverable.
    Filter(pipeline::FilterArgs),
    /// Assign stratified train/validation/test splits.
    Split(pipeline::SplitArgs),
    /// Generate a response for every record that lacks one.
    GenResponses(pipeline::GenResponsesArgs),
    /// Generate deduplicated synthetic instructions into the train split.
    Synth(pipeline::SynthArgs),
    /// Predict the prompt behind each response of one split.
    Recover(pipeline::RecoverArgs),
    /// Score predictions with ROUGE-L, embedding similarity and BERTScore.
    Evaluate(pipeline::EvaluateArgs),
    /// First-word taxonomy and length histograms.
    Stats(pipeline::StatsArgs),
    /// Write a prompt-masked LoRA fine-tuning bundle.
    LoraPrep(pipeline::LoraPrepArgs),
    /// Qualitative annotation: plan, serve and score.
    #[command(subcommand)]
    Annotate(annotate::AnnotateCommand),
    /// Export annotation scores as csv or jsonl.
    Export(annotate::ExportArgs),
}

fn init_logging(quiet: bool) {
    let default = if quiet { "warn" } else { "info" };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_target(false).try_init();
}

fn report(err: &CliError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(err).expect("error serializes"));
    ExitCode::from(err.exit.max(1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let summary: Vec<&str> = message
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(|l| l.trim().trim_start_matches("error: "))
                .filter(|l| !l.is_empty())
                .collect();
            eprint!("{message}");
            return report(&CliError::new("usage", summary.join(" ")));
        }
    };
    init_logging(cli.quiet);

    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => return report(&CliError::new("runtime", e.to_string())),
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

async fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Ingest(a) => pipeline::ingest(a),
        Command::Filter(a) => pipeline::filter(a),
        Command::Split(a) => pipeline::split(a, &file),
        Command::GenResponses(a) => pipeline::gen_responses(a, &file).await,
        Command::Synth(a) => pipeline::synth(a, &file).await,
        Command::Recover(a) => pipeline::recover(a, &file).await,
        Command::Evaluate(a) => pipeline::evaluate(a, &file).await,
        Command::Stats(a) => pipeline::stats(a),
        Command::LoraPrep(a) => pipeline::lora_prep(a, &file),
        Command::Annotate(c) => annotate::run(c, &file).await,
        Command::Export(a) => annotate::export(a).await,
    }
}
