use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand};
use reprompt_client::AnnotationClient;
use reprompt_core::annostudio::wire::ScoreRequest;
use reprompt_core::annostudio::{build_plan, AnnotationStore, StoreOptions};
use reprompt_core::recover::{read_predictions, RecoveryMethod};
use serde::Serialize;
use tokio::net::TcpListener;
use tracing::{info, warn};

use crate::config::{ConfigFile, Problems};
use crate::pipeline::load_corpus;
use crate::CliError;

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:8731";

#[derive(Debug, Subcommand)]
pub enum AnnotateCommand {
    /// Sample items per (method, category) and initialize a store.
    Plan(PlanArgs),
    /// Serve a store over HTTP.
    Serve(ServeArgs),
    /// Print the next unscored item as JSON.
    Next(NextArgs),
    /// Submit a 1-4 score for one item.
    Score(ScoreArgs),
    /// Print per-method means and score distributions as JSON.
    Aggregate(AggregateArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Corpus holding the original prompts and responses.
    #[arg(long)]
    pub input: PathBuf,
    /// Prediction file; repeat once per method.
    #[arg(long = "predictions", required = true)]
    pub predictions: Vec<PathBuf>,
    /// Items per category and method.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Store directory to create.
    #[arg(long)]
    pub store: PathBuf,
    /// Keep one score per annotator instead of one per item.
    #[arg(long)]
    pub multi_annotator: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = 8731)]
    pub port: u16,
    /// Hide the original prompt until an item is scored.
    #[arg(long)]
    pub blind: bool,
    /// Accept changed scores without the per-request flag.
    #[arg(long)]
    pub allow_revise: bool,
    /// Directory of built UI assets to serve at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServerArg {
    /// Annotation service URL.
    #[arg(long)]
    pub server: Option<String>,
}

impl ServerArg {
    fn client(&self, file: &ConfigFile) -> AnnotationClient {
        let url = self
            .server
            .clone()
            .or_else(|| file.annotate.server.clone())
            .unwrap_or_else(|| DEFAULT_SERVER.to_string());
        AnnotationClient::new(url)
    }
}

#[derive(Debug, Args)]
pub struct NextArgs {
    #[command(flatten)]
    pub server: ServerArg,
    #[arg(long)]
    pub annotator: Option<String>,
    /// Item to defer; repeatable.
    #[arg(long)]
    pub skip: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub server: ServerArg,
    #[arg(long)]
    pub item: String,
    #[arg(long, allow_negative_numbers = true)]
    pub score: i64,
    #[arg(long)]
    pub annotator: String,
    /// Replace an existing different score.
    #[arg(long)]
    pub allow_revise: bool,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[command(flatten)]
    pub server: ServerArg,
    /// Read a store directory directly instead of asking a server.
    #[arg(long, conflicts_with = "server")]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Store directory to read.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Annotation service URL, used when no store is given.
    #[arg(long, conflicts_with = "store")]
    pub server: Option<String>,
    /// csv or jsonl.
    #[arg(long, default_value = "jsonl")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(reprompt_core::Error::from)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::new("io", e.to_string()))
}

fn write_out(path: &std::path::Path, body: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| reprompt_core::Error::io(parent, e))?;
    }
    std::fs::write(path, body).map_err(|e| reprompt_core::Error::io(path, e).into())
}

pub async fn run(cmd: AnnotateCommand, file: &ConfigFile) -> Result<(), CliError> {
    match cmd {
        AnnotateCommand::Plan(a) => plan(a, file),
        AnnotateCommand::Serve(a) => serve(a).await,
        AnnotateCommand::Next(a) => {
            let resp = a.server.client(file).next(a.annotator.as_deref(), &a.skip).await?;
            print_json(&resp)
        }
        AnnotateCommand::Score(a) => {
            let req = ScoreRequest { score: a.score, annotator_id: a.annotator, allow_revise: a.allow_revise };
            let resp = a.server.client(file).score(&a.item, &req).await?;
            print_json(&resp)
        }
        AnnotateCommand::Aggregate(a) => {
            let agg = match &a.store {
                Some(dir) => AnnotationStore::open(dir)?.aggregate(),
                None => a.server.client(file).aggregate().await?,
            };
            match &a.out {
                Some(path) => {
                    let body = serde_json::to_string_pretty(&agg).map_err(reprompt_core::Error::from)? + "\n";
                    write_out(path, &body)
                }
                None => print_json(&agg),
            }
        }
    }
}

fn plan(a: PlanArgs, file: &ConfigFile) -> Result<(), CliError> {
    let count = a.count.or(file.annotate.count).unwrap_or(10);
    let seed = a.seed.or(file.annotate.seed).unwrap_or(0);
    let mut problems = Problems::default();
    if count == 0 {
        problems.push("--count must be >= 1");
    }
    problems.finish()?;

    let corpus = load_corpus(&a.input)?;
    let mut by_method: BTreeMap<RecoveryMethod, Vec<_>> = BTreeMap::new();
    for path in &a.predictions {
        let preds = read_predictions(path)?;
        let Some(method) = preds.first().map(|p| p.method) else {
            warn!(file = %path.display(), "prediction file is empty");
            continue;
        };
        if by_method.insert(method, preds).is_some() {
            return Err(CliError::new("invalid_argument", format!("{method} predictions given twice")));
        }
    }
    let (plan, warnings) = build_plan(&by_method, &corpus, count, seed)?;
    let options = StoreOptions { multi_annotator: a.multi_annotator, ..Default::default() };
    AnnotationStore::create(&a.store, &plan, options)?;
    info!(items = plan.items.len(), methods = plan.methods.len(), warnings = warnings.len(), "annotation plan created");
    Ok(())
}

async fn serve(a: ServeArgs) -> Result<(), CliError> {
    let store = AnnotationStore::open(&a.store)?.with_blind(a.blind).with_allow_revise(a.allow_revise);
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::invalid_config(vec![format!("bad listen address {}:{}: {e}", a.host, a.port)]))?;
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::new("io", format!("cannot bind {addr}: {e}")))?;
    let bound = listener.local_addr().map_err(|e| CliError::new("io", e.to_string()))?;
    print_json(&serde_json::json!({ "listening": format!("http://{bound}") }))?;
    let app = reprompt_server::router(Arc::new(store), a.static_dir);
    reprompt_server::serve_on(listener, app, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(|e| CliError::new("io", e.to_string()))
}

pub async fn export(a: ExportArgs) -> Result<(), CliError> {
    if a.format != "csv" && a.format != "jsonl" {
        return Err(CliError::invalid_config(vec![format!("unknown export format {:?}; use csv or jsonl", a.format)]));
    }
    let body = match &a.store {
        Some(dir) => {
            let store = AnnotationStore::open(dir)?;
            if a.format == "csv" {
                store.export_csv()
            } else {
                store.export_jsonl()
            }
        }
        None => {
            let url = a.server.clone().unwrap_or_else(|| DEFAULT_SERVER.to_string());
            AnnotationClient::new(url).export(&a.format).await?
        }
    };
    write_out(&a.out, &body)
}
