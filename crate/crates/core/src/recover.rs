//! The two generation passes: responses for corpus prompts, and prompt
//! recovery from those responses under each method.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::corpus::{write_atomic, Corpus, Split};
use crate::error::{Error, Result};
use crate::llmgate::{CompletionRequest, Gateway, GenerationParams};
use crate::promptkit::{
    render_few_shot, render_zero_shot, template_digests, wrap_instruction, FewShotExemplar, RecoveryVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMethod {
    ZeroShotQ1,
    ZeroShotQ2,
    FewShotQ1,
    FewShotQ2,
    Finetuned,
    FinetunedSynth,
}

impl RecoveryMethod {
    pub const ALL: [RecoveryMethod; 6] = [
        RecoveryMethod::ZeroShotQ1,
        RecoveryMethod::ZeroShotQ2,
        RecoveryMethod::FewShotQ1,
        RecoveryMethod::FewShotQ2,
        RecoveryMethod::Finetuned,
        RecoveryMethod::FinetunedSynth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryMethod::ZeroShotQ1 => "zero_shot_q1",
            RecoveryMethod::ZeroShotQ2 => "zero_shot_q2",
            RecoveryMethod::FewShotQ1 => "few_shot_q1",
            RecoveryMethod::FewShotQ2 => "few_shot_q2",
            RecoveryMethod::Finetuned => "finetuned",
            RecoveryMethod::FinetunedSynth => "finetuned_synth",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            RecoveryMethod::ZeroShotQ1 => "Zero-shot (prompt 1)",
            RecoveryMethod::ZeroShotQ2 => "Zero-shot (prompt 2)",
            RecoveryMethod::FewShotQ1 => "Three-shot (prompt 1)",
            RecoveryMethod::FewShotQ2 => "Three-shot (prompt 2)",
            RecoveryMethod::Finetuned => "LoRA",
            RecoveryMethod::FinetunedSynth => "LoRA w/ synthetic data",
        }
    }

    /// Fine-tuned models are queried with the zero-shot request prompt.
    pub fn variant(self) -> RecoveryVariant {
        match self {
            RecoveryMethod::ZeroShotQ1 | RecoveryMethod::FewShotQ1 => RecoveryVariant::Q1,
            _ => RecoveryVariant::Q2,
        }
    }

    pub fn is_few_shot(self) -> bool {
        matches!(self, RecoveryMethod::FewShotQ1 | RecoveryMethod::FewShotQ2)
    }
}

impl fmt::Display for RecoveryMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecoveryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RecoveryMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown recovery method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPrediction {
    pub record_id: String,
    pub method: RecoveryMethod,
    pub predicted_prompt: String,
    pub raw_completion: String,
    pub params_used: GenerationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub record_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationTally {
    pub generated: usize,
    pub skipped: usize,
    pub failures: Vec<RecordFailure>,
}

/// Fills in missing responses. Records that already have one are left
/// alone; per-record gateway failures are tallied and the run continues.
pub async fn generate_responses(
    corpus: &Corpus,
    gateway: &dyn Gateway,
    params: &GenerationParams,
    include_context: bool,
) -> Result<(Corpus, GenerationTally)> {
    params.validate()?;
    let mut tally = GenerationTally::default();
    let mut pending = Vec::new();
    for (i, r) in corpus.iter().enumerate() {
        if r.has_response() {
            tally.skipped += 1;
        } else {
            pending.push((i, wrap_instruction(&r.generation_text(include_context))?));
        }
    }

    let results: Vec<_> = stream::iter(pending)
        .map(|(i, prompt)| async move {
            let req = CompletionRequest::new(prompt, *params)?;
            let out = gateway.complete(&req).await;
            Ok::<_, Error>((i, out))
        })
        .buffered(gateway.max_in_flight())
        .collect()
        .await;

    let mut records = corpus.records().to_vec();
    for res in results {
        let (i, out) = res?;
        match out {
            Ok(text) if !text.trim().is_empty() => {
                records[i].response = Some(text.trim().to_string());
                tally.generated += 1;
            }
            Ok(_) => tally.failures.push(RecordFailure {
                record_id: records[i].id.clone(),
                reason: "empty completion".into(),
            }),
            Err(e) => {
                warn!(record = %records[i].id, error = %e, "response generation failed");
                tally.failures.push(RecordFailure { record_id: records[i].id.clone(), reason: e.to_string() });
            }
        }
    }
    info!(generated = tally.generated, skipped = tally.skipped, failed = tally.failures.len(), "responses");
    Ok((Corpus::new(records)?, tally))
}

/// Strips leading `Prompt:` labels, one layer of surrounding quotes per
/// pass, and outer whitespace. Interior text is never touched.
pub fn trim_prediction(raw: &str) -> String {
    let mut s = raw.trim();
    loop {
        let before = s;
        if s.get(..7).is_some_and(|head| head.eq_ignore_ascii_case("prompt:")) {
            s = s[7..].trim();
        }
        s = strip_quote_pair(s).trim();
        if s == before {
            return s.to_string();
        }
    }
}

fn strip_quote_pair(s: &str) -> &str {
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’'), ('`', '`')] {
        if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return &s[open.len_utf8()..s.len() - close.len_utf8()];
        }
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecoveryRun {
    /// Sorted by record id.
    pub predictions: Vec<RecoveryPrediction>,
    pub failures: Vec<RecordFailure>,
}

#[derive(Debug, Clone)]
pub struct RecoveryOptions<'a> {
    pub method: RecoveryMethod,
    pub split: Split,
    pub params: GenerationParams,
    pub exemplars: Option<&'a [FewShotExemplar]>,
    pub trim: bool,
}

/// Predicts the prompt of every record in one split.
pub async fn recover_prompts(
    corpus: &Corpus,
    gateway: &dyn Gateway,
    opts: &RecoveryOptions<'_>,
) -> Result<RecoveryRun> {
    opts.params.validate()?;
    let exemplars = if opts.method.is_few_shot() {
        let ex = opts.exemplars.ok_or_else(|| {
            Error::Precondition(format!("{} requires three exemplars", opts.method))
        })?;
        for e in ex {
            match corpus.get(&e.source_record_id) {
                Some(r) if r.split == Split::Train => {}
                _ => {
                    return Err(Error::Precondition(format!(
                        "exemplar {:?} is not a train record of this corpus",
                        e.source_record_id
                    )))
                }
            }
        }
        Some(ex)
    } else {
        None
    };

    let mut run = RecoveryRun::default();
    let mut pending = Vec::new();
    for r in corpus.in_split(opts.split) {
        match r.response.as_deref().filter(|t| !t.trim().is_empty()) {
            Some(response) => {
                let prompt = match exemplars {
                    Some(ex) => render_few_shot(opts.method.variant(), ex, response)?,
                    None => render_zero_shot(opts.method.variant(), response)?,
                };
                pending.push((r.id.clone(), prompt));
            }
            None => run.failures.push(RecordFailure { record_id: r.id.clone(), reason: "record has no response".into() }),
        }
    }

    let params = opts.params;
    let results: Vec<_> = stream::iter(pending)
        .map(|(id, prompt)| async move {
            let req = CompletionRequest::new(prompt, params)?;
            Ok::<_, Error>((id, gateway.complete(&req).await))
        })
        .buffered(gateway.max_in_flight())
        .collect()
        .await;

    for res in results {
        let (record_id, out) = res?;
        match out {
            Ok(raw) => {
                let predicted_prompt = if opts.trim { trim_prediction(&raw) } else { raw.clone() };
                run.predictions.push(RecoveryPrediction {
                    record_id,
                    method: opts.method,
                    predicted_prompt,
                    raw_completion: raw,
                    params_used: params,
                });
            }
            Err(e) => {
                warn!(record = %record_id, error = %e, "recovery failed");
                run.failures.push(RecordFailure { record_id, reason: e.to_string() });
            }
        }
    }
    run.predictions.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    run.failures.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus_digest: String,
    pub template_digests: BTreeMap<String, String>,
    pub gateway: String,
    pub method: RecoveryMethod,
    pub split: Split,
    pub params: GenerationParams,
    pub seed: u64,
    pub exemplar_ids: Vec<String>,
    pub trimmed: bool,
    pub n_predictions: usize,
    pub failures: Vec<RecordFailure>,
    pub created_at: DateTime<Utc>,
}

impl RunManifest {
    pub fn new(
        corpus: &Corpus,
        gateway: &dyn Gateway,
        opts: &RecoveryOptions<'_>,
        seed: u64,
        run: &RecoveryRun,
        created_at: DateTime<Utc>,
    ) -> Self {
        Self {
            corpus_digest: corpus.digest(),
            template_digests: template_digests(),
            gateway: gateway.identity(),
            method: opts.method,
            split: opts.split,
            params: opts.params,
            seed,
            exemplar_ids: opts
                .exemplars
                .filter(|_| opts.method.is_few_shot())
                .map(|ex| ex.iter().map(|e| e.source_record_id.clone()).collect())
                .unwrap_or_default(),
            trimmed: opts.trim,
            n_predictions: run.predictions.len(),
            failures: run.failures.clone(),
            created_at,
        }
    }
}

/// `preds.jsonl` -> `preds.manifest.json`
pub fn manifest_path(predictions_path: &Path) -> PathBuf {
    predictions_path.with_extension("manifest.json")
}

pub fn predictions_to_jsonl(predictions: &[RecoveryPrediction]) -> String {
    predictions
        .iter()
        .map(|p| serde_json::to_string(p).expect("prediction serializes") + "\n")
        .collect()
}

/// Writes the prediction file and its sibling manifest.
pub fn write_run(path: &Path, run: &RecoveryRun, manifest: &RunManifest) -> Result<()> {
    write_atomic(path, predictions_to_jsonl(&run.predictions).as_bytes())?;
    let mut m = serde_json::to_string_pretty(manifest)?;
    m.push('\n');
    write_atomic(&manifest_path(path), m.as_bytes())
}

pub fn read_predictions(path: &Path) -> Result<Vec<RecoveryPrediction>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: RecoveryPrediction = serde_json::from_str(line)
            .map_err(|e| Error::InvalidArgument(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

/// Checks that predictions only reference records of `split`.
pub fn check_no_leakage(corpus: &Corpus, split: Split, predictions: &[RecoveryPrediction]) -> Result<()> {
    let allowed: HashSet<&str> = corpus.in_split(split).map(|r| r.id.as_str()).collect();
    match predictions.iter().find(|p| !allowed.contains(p.record_id.as_str())) {
        Some(p) => Err(Error::Precondition(format!(
            "prediction for {:?} is outside the {} split",
            p.record_id,
            split.as_str()
        ))),
        None => Ok(()),
    }
}
