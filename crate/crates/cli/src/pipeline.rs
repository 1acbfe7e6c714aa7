use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use reprompt_core::corpus::{
    assign_splits, filter_retrievable, first_word_stats, ingest as read_jsonl, length_histogram, Corpus, IngestFormat, Split,
    TextField,
};
use reprompt_core::evalsuite::{evaluate as score_predictions, render_report, ReportFormat};
use reprompt_core::llmgate::GenerationParams;
use reprompt_core::lorapack::{emit_training_data, export_finetune_job, FinetuneHyperparams, LoraSpec};
use reprompt_core::promptkit::{select_exemplars, RecoveryVariant};
use reprompt_core::recover::{
    generate_responses, manifest_path, read_predictions, recover_prompts, write_run, GenerationTally,
    RecoveryMethod, RecoveryOptions, RunManifest,
};
use reprompt_core::synthgen::{run_generation, SynthOptions, DEFAULT_DEDUP_THRESHOLD};
use serde::Serialize;
use tracing::{info, warn};

use crate::config::{
    manifest_timestamp, resolve_params, resolve_split, ConfigFile, GatewayArgs, GatewaySettings, ParamArgs,
    Problems,
};
use crate::CliError;

/// Reads a corpus written by an earlier stage. Any bad line is fatal.
pub fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    let outcome = read_jsonl(path, IngestFormat::NativeJsonl)?;
    if outcome.malformed + outcome.unknown_category > 0 {
        return Err(CliError::new(
            "invalid_corpus",
            format!(
                "{}: {} malformed line(s), {} unknown categories; first: {}",
                path.display(),
                outcome.malformed,
                outcome.unknown_category,
                outcome.warnings.first().map(String::as_str).unwrap_or("")
            ),
        ));
    }
    Ok(outcome.corpus)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Rejects writing an output over one of the inputs.
fn check_outputs(problems: &mut Problems, inputs: &[&Path], outputs: &[&Path]) {
    for o in outputs {
        for i in inputs {
            if same_file(i, o) {
                problems.push(format!("output {} would overwrite input {}", o.display(), i.display()));
            }
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value).map_err(reprompt_core::Error::from)?;
    body.push('\n');
    write_file(path, body.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| reprompt_core::Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| reprompt_core::Error::io(path, e).into())
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `dolly` (instruction/context/response/category) or `native`.
    #[arg(long, default_value = "dolly")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn ingest_cmd_format(s: &str) -> Result<IngestFormat, CliError> {
    s.parse::<IngestFormat>().map_err(|e| CliError::invalid_config(vec![e.to_string()]))
}

pub fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let format = ingest_cmd_format(&a.format)?;
    let mut problems = Problems::default();
    check_outputs(&mut problems, &[&a.input], &[&a.out]);
    problems.finish()?;
    let outcome = read_jsonl(&a.input, format)?;
    info!(
        records = outcome.corpus.len(),
        malformed = outcome.malformed,
        unknown_category = outcome.unknown_category,
        "ingested"
    );
    outcome.corpus.export(&a.out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn filter(a: FilterArgs) -> Result<(), CliError> {
    let mut problems = Problems::default();
    check_outputs(&mut problems, &[&a.input], &[&a.out]);
    problems.finish()?;
    let corpus = load_corpus(&a.input)?;
    let kept = filter_retrievable(&corpus);
    info!(input = corpus.len(), kept = kept.len(), "filtered");
    kept.export(&a.out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub train: Option<f64>,
    #[arg(long)]
    pub val: Option<f64>,
    #[arg(long)]
    pub test: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn split(a: SplitArgs, file: &ConfigFile) -> Result<(), CliError> {
    let cfg = resolve_split(&file.split, a.train, a.val, a.test, a.seed);
    let mut problems = Problems::default();
    if let Err(e) = cfg.validate() {
        problems.push(e.to_string());
    }
    check_outputs(&mut problems, &[&a.input], &[&a.out]);
    problems.finish()?;
    let corpus = assign_splits(&load_corpus(&a.input)?, &cfg)?;
    let [train, val, test, _] = corpus.split_counts();
    info!(train, val, test, seed = cfg.seed, "split assigned");
    corpus.export(&a.out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenResponsesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Do not append the record context to the instruction.
    #[arg(long)]
    pub no_context: bool,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Serialize)]
struct GenerationManifest<'a> {
    input_digest: String,
    output_digest: String,
    gateway: String,
    params: GenerationParams,
    include_context: bool,
    tally: &'a GenerationTally,
    created_at: chrono::DateTime<chrono::Utc>,
}

pub async fn gen_responses(a: GenResponsesArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let gw = GatewaySettings::resolve(&file.gateway, &a.gateway, &mut problems);
    let params = resolve_params(GenerationParams::response_generation(), file.params.response.as_ref(), &a.params);
    problems.check_params("response", &params);
    check_outputs(&mut problems, &[&a.input], &[&a.out, &manifest_path(&a.out)]);
    problems.finish()?;
    let settings = gw.expect("validated");

    let corpus = load_corpus(&a.input)?;
    let gateway = settings.build()?;
    let (out, tally) = generate_responses(&corpus, gateway.as_ref(), &params, !a.no_context).await?;
    if !tally.failures.is_empty() {
        warn!(failed = tally.failures.len(), "some records got no response");
    }
    out.export(&a.out)?;
    write_json(
        &manifest_path(&a.out),
        &GenerationManifest {
            input_digest: corpus.digest(),
            output_digest: out.digest(),
            gateway: gateway.identity(),
            params,
            include_context: !a.no_context,
            tally: &tally,
            created_at: manifest_timestamp(settings.is_mock())?,
        },
    )
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Existing corpus to seed the dedup pool and merge into the output.
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3000)]
    pub target: usize,
    /// ROUGE-L F1 above which a candidate counts as a duplicate.
    #[arg(long, default_value_t = DEFAULT_DEDUP_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Per-round JSONL log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[command(flatten)]
    pub params: ParamArgs,
}

pub async fn synth(a: SynthArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let gw = GatewaySettings::resolve(&file.gateway, &a.gateway, &mut problems);
    let params = resolve_params(GenerationParams::synthetic_generation(), file.params.synthetic.as_ref(), &a.params);
    problems.check_params("synthetic", &params);
    if a.target == 0 {
        problems.push("--target must be >= 1");
    }
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        problems.push(format!("--threshold must be in (0, 1), got {}", a.threshold));
    }
    if a.max_rounds == Some(0) {
        problems.push("--max-rounds must be >= 1");
    }
    let inputs: Vec<&Path> = a.base.iter().map(PathBuf::as_path).collect();
    let mut outputs = vec![a.out.as_path()];
    outputs.extend(a.log.as_deref());
    check_outputs(&mut problems, &inputs, &outputs);
    problems.finish()?;
    let settings = gw.expect("validated");

    let mut corpus = match &a.base {
        Some(p) => load_corpus(p)?,
        None => Corpus::default(),
    };
    let pool: Vec<String> = corpus.iter().map(|r| r.instruction.clone()).collect();
    let gateway = settings.build()?;
    let mut opts = SynthOptions::new(a.target);
    opts.params = params;
    opts.dedup_threshold = a.threshold;
    opts.max_rounds = a.max_rounds;
    let run = run_generation(gateway.as_ref(), &pool, &opts).await?;
    info!(accepted = run.records.len(), rounds = run.rounds.len(), "synthetic generation finished");
    if !run.reached_target {
        warn!(accepted = run.records.len(), target = a.target, "round cap reached before target");
    }
    if let Some(log) = &a.log {
        write_file(log, run.log_jsonl().as_bytes())?;
    }
    corpus.extend(run.records)?;
    corpus.export(&a.out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// zero_shot_q1, zero_shot_q2, few_shot_q1, few_shot_q2, finetuned, finetuned_synth.
    #[arg(long)]
    pub method: String,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep raw completions as predictions.
    #[arg(long)]
    pub no_trim: bool,
    /// Seed for choosing the three few-shot exemplars.
    #[arg(long)]
    pub exemplar_seed: Option<u64>,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[command(flatten)]
    pub params: ParamArgs,
}

pub async fn recover(a: RecoverArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let method = a.method.parse::<RecoveryMethod>().map_err(|e| problems.push(e.to_string())).ok();
    let split = a.split.parse::<Split>().map_err(|e| problems.push(e.to_string())).ok();
    let gw = GatewaySettings::resolve(&file.gateway, &a.gateway, &mut problems);
    let params = resolve_params(GenerationParams::recovery(), file.params.recovery.as_ref(), &a.params);
    problems.check_params("recovery", &params);
    check_outputs(&mut problems, &[&a.input], &[&a.out, &manifest_path(&a.out)]);
    problems.finish()?;
    let (method, split, settings) = (method.expect("validated"), split.expect("validated"), gw.expect("validated"));

    let corpus = load_corpus(&a.input)?;
    let seed = a.exemplar_seed.or(file.exemplar_seed).unwrap_or(0);
    let exemplars = if method.is_few_shot() { Some(select_exemplars(&corpus, seed)?) } else { None };
    let gateway = settings.build()?;
    let opts = RecoveryOptions {
        method,
        split,
        params,
        exemplars: exemplars.as_deref(),
        trim: !a.no_trim,
    };
    let run = recover_prompts(&corpus, gateway.as_ref(), &opts).await?;
    if !run.failures.is_empty() {
        warn!(failed = run.failures.len(), "some records have no prediction");
    }
    info!(method = %method, predictions = run.predictions.len(), "recovery finished");
    let manifest = RunManifest::new(&corpus, gateway.as_ref(), &opts, seed, &run, manifest_timestamp(settings.is_mock())?);
    write_run(&a.out, &run, &manifest)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Prediction file; repeat for several methods.
    #[arg(long = "predictions", required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// table, csv or jsonl.
    #[arg(long, default_value = "table")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub gateway: GatewayArgs,
}

pub async fn evaluate(a: EvaluateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let split = a.split.parse::<Split>().map_err(|e| problems.push(e.to_string())).ok();
    let format = a.format.parse::<ReportFormat>().map_err(|e| problems.push(e.to_string())).ok();
    let gw = GatewaySettings::resolve(&file.gateway, &a.gateway, &mut problems);
    let mut inputs: Vec<&Path> = vec![&a.input];
    inputs.extend(a.predictions.iter().map(PathBuf::as_path));
    check_outputs(&mut problems, &inputs, &[&a.out]);
    problems.finish()?;
    let (split, format, settings) = (split.expect("validated"), format.expect("validated"), gw.expect("validated"));

    let corpus = load_corpus(&a.input)?;
    let mut by_method: BTreeMap<RecoveryMethod, PathBuf> = BTreeMap::new();
    let mut batches = Vec::new();
    for path in &a.predictions {
        let preds = read_predictions(path)?;
        let Some(first) = preds.first() else {
            warn!(file = %path.display(), "prediction file is empty; nothing to score");
            continue;
        };
        let method = first.method;
        if let Some(prev) = by_method.insert(method, path.clone()) {
            return Err(CliError::new(
                "invalid_argument",
                format!("{} and {} both hold {method} predictions", prev.display(), path.display()),
            ));
        }
        batches.push((method, preds));
    }
    let mut reports = Vec::new();
    if !batches.is_empty() {
        let gateway = settings.build()?;
        for (method, preds) in &batches {
            let report = score_predictions(*method, preds, &corpus, split, gateway.as_ref()).await?;
            if !report.bertscore_available {
                warn!(method = %method, "gateway has no token embeddings; BERTScore omitted");
            }
            reports.push(report);
        }
    }
    write_file(&a.out, render_report(&reports, format).as_bytes())
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of first words to report.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Followers reported per first word.
    #[arg(long, default_value_t = 5)]
    pub followers: usize,
    /// Histogram bin width in tokens.
    #[arg(long, default_value_t = 10)]
    pub bin_width: usize,
}

#[derive(Serialize)]
struct StatsReport {
    records: usize,
    records_with_tokens: usize,
    first_words: Vec<reprompt_core::corpus::FirstWordEntry>,
    instruction_lengths: reprompt_core::corpus::Histogram,
    response_lengths: reprompt_core::corpus::Histogram,
}

pub fn stats(a: StatsArgs) -> Result<(), CliError> {
    let mut problems = Problems::default();
    if a.top == 0 || a.followers == 0 {
        problems.push("--top and --followers must be >= 1");
    }
    if a.bin_width == 0 {
        problems.push("--bin-width must be >= 1");
    }
    check_outputs(&mut problems, &[&a.input], &[&a.out]);
    problems.finish()?;
    let corpus = load_corpus(&a.input)?;
    let (first_words, records_with_tokens) = first_word_stats(&corpus, a.top, a.followers)?;
    write_json(
        &a.out,
        &StatsReport {
            records: corpus.len(),
            records_with_tokens,
            first_words,
            instruction_lengths: length_histogram(&corpus, TextField::Instruction, a.bin_width)?,
            response_lengths: length_histogram(&corpus, TextField::Response, a.bin_width)?,
        },
    )
}

#[derive(Debug, Args)]
pub struct LoraPrepArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for the job bundle.
    #[arg(long)]
    pub out: PathBuf,
    /// Recovery prompt wrapped around each response: q1 or q2.
    #[arg(long, default_value = "q2")]
    pub variant: String,
    #[arg(long)]
    pub rank: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub backbone: Option<String>,
}

pub fn lora_prep(a: LoraPrepArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let variant = a.variant.parse::<RecoveryVariant>().map_err(|e| problems.push(e.to_string())).ok();
    let rank = a.rank.or(file.lora.rank).unwrap_or(32);
    let alpha = a.alpha.or(file.lora.alpha).unwrap_or(64.0);
    let spec = LoraSpec::mistral_7b_all_linear_with(rank, alpha);
    if let Err(e) = spec.validate() {
        problems.push(e.to_string());
    }
    let defaults = FinetuneHyperparams::default();
    let epochs = a.epochs.or(file.lora.epochs).unwrap_or(defaults.epochs);
    if epochs == 0 {
        problems.push("epochs must be >= 1");
    }
    check_outputs(&mut problems, &[&a.input], &[&a.out]);
    problems.finish()?;
    let variant = variant.expect("validated");

    let corpus = load_corpus(&a.input)?;
    let examples = emit_training_data(&corpus, variant)?;
    let hyper = FinetuneHyperparams {
        epochs,
        backbone: a.backbone.or_else(|| file.lora.backbone.clone()).unwrap_or(defaults.backbone),
        prompt_variant: variant.to_string(),
    };
    let manifest = export_finetune_job(&a.out, &spec, &examples, &hyper)?;
    info!(examples = manifest.n_examples, trainable_params = manifest.trainable_params, "job bundle written");
    Ok(())
}
