//! Synthetic creative-writing instructions: query the meta-prompt, split the
//! completion into items, drop near-duplicates, and emit train records.

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::corpus::{Category, InstructionRecord, Provenance, Split};
use crate::error::{Error, Result};
use crate::evalsuite::rouge_l_tokens;
use crate::llmgate::{CompletionRequest, Gateway, GenerationParams};
use crate::promptkit::{render_synth_meta, wrap_instruction};
use crate::text::{token_count, tokenize};

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.7;
pub const MIN_ITEM_TOKENS: usize = 3;
pub const MAX_ITEM_TOKENS: usize = 100;
/// Instructions the meta-prompt asks for per completion.
pub const ITEMS_PER_ROUND: usize = 20;

/// Strips a list marker such as `1.`, `12)`, `- `, `* ` or `• `.
fn strip_marker(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return Some(r);
        }
        return None;
    }
    for bullet in ["- ", "* ", "• "] {
        if let Some(r) = t.strip_prefix(bullet) {
            return Some(r);
        }
    }
    None
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('“', '”'), ('\'', '\'')] {
        if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return s[open.len_utf8()..s.len() - close.len_utf8()].trim();
        }
    }
    s
}

/// Splits an enumerated completion into instruction texts.
///
/// Unmarked lines continue the current item; text before the first marker
/// is ignored. Items outside 3..=100 tokens are dropped.
pub fn parse_instruction_list(completion: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut current: Option<String> = None;
    for line in completion.lines() {
        if let Some(body) = strip_marker(line) {
            if let Some(done) = current.take() {
                items.push(done);
            }
            current = Some(body.trim().to_string());
        } else if let Some(cur) = current.as_mut() {
            let extra = line.trim();
            if !extra.is_empty() {
                cur.push(' ');
                cur.push_str(extra);
            }
        }
    }
    items.extend(current);
    items
        .into_iter()
        .map(|s| strip_quotes(&s).to_string())
        .filter(|s| (MIN_ITEM_TOKENS..=MAX_ITEM_TOKENS).contains(&token_count(s)))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupOutcome {
    pub accepted: Vec<String>,
    pub rejected: usize,
}

/// Incremental near-duplicate filter over a growing pool.
#[derive(Debug, Clone)]
pub struct DedupPool {
    threshold: f64,
    pool: Vec<Vec<String>>,
}

impl DedupPool {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!("dedup threshold must be in (0, 1), got {threshold}")));
        }
        Ok(Self { threshold, pool: Vec::new() })
    }

    pub fn seed<'a>(&mut self, existing: impl IntoIterator<Item = &'a str>) {
        self.pool.extend(existing.into_iter().map(tokenize));
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    /// Accepts `candidate` unless its ROUGE-L F1 against any pooled
    /// instruction exceeds the threshold; accepted candidates join the pool.
    pub fn offer(&mut self, candidate: &str) -> bool {
        let tokens = tokenize(candidate);
        if tokens.is_empty() {
            return false;
        }
        let duplicate = self
            .pool
            .iter()
            .any(|p| rouge_l_tokens(&tokens, p).f1 > self.threshold);
        if !duplicate {
            self.pool.push(tokens);
        }
        !duplicate
    }
}

pub fn dedup(candidates: &[String], pool: &[String], threshold: f64) -> Result<DedupOutcome> {
    let mut p = DedupPool::new(threshold)?;
    p.seed(pool.iter().map(String::as_str));
    let mut out = DedupOutcome::default();
    for c in candidates {
        if p.offer(c) {
            out.accepted.push(c.clone());
        } else {
            out.rejected += 1;
        }
    }
    Ok(out)
}

/// One line of the generation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub seed: u64,
    pub parsed: usize,
    pub accepted: usize,
    pub rejected_duplicates: usize,
    pub rejected_malformed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub target_count: usize,
    pub params: GenerationParams,
    pub dedup_threshold: f64,
    /// Defaults to `ceil(10 * target / 20)`, at least 1.
    pub max_rounds: Option<usize>,
    pub id_prefix: String,
}

impl SynthOptions {
    pub fn new(target_count: usize) -> Self {
        Self {
            target_count,
            params: GenerationParams::synthetic_generation(),
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            max_rounds: None,
            id_prefix: "synth-".into(),
        }
    }

    pub fn round_cap(&self) -> usize {
        self.max_rounds
            .unwrap_or_else(|| (10 * self.target_count).div_ceil(ITEMS_PER_ROUND))
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRun {
    pub records: Vec<InstructionRecord>,
    pub rounds: Vec<RoundLog>,
    pub reached_target: bool,
}

impl SynthRun {
    pub fn log_jsonl(&self) -> String {
        self.rounds
            .iter()
            .map(|r| serde_json::to_string(r).expect("log serializes") + "\n")
            .collect()
    }
}

/// Runs meta-prompt rounds until `target_count` instructions are accepted or
/// the round cap is hit.
///
/// Round `i` (0-based) uses seed `params.seed + i`. Completions are fetched
/// in waves of up to `gateway.max_in_flight()` rounds, but parsed and
/// deduplicated strictly in round order, so output does not depend on
/// concurrency.
pub async fn run_generation(
    gateway: &dyn Gateway,
    existing_pool: &[String],
    opts: &SynthOptions,
) -> Result<SynthRun> {
    if opts.target_count == 0 {
        return Err(Error::InvalidArgument("target_count must be >= 1".into()));
    }
    opts.params.validate()?;
    let prompt = wrap_instruction(render_synth_meta())?;
    let mut pool = DedupPool::new(opts.dedup_threshold)?;
    pool.seed(existing_pool.iter().map(String::as_str));

    let cap = opts.round_cap();
    let wave = gateway.max_in_flight().max(1);
    let mut accepted: Vec<String> = Vec::new();
    let mut rounds = Vec::new();

    let mut next = 0;
    'outer: while next < cap && accepted.len() < opts.target_count {
        let batch: Vec<usize> = (next..cap.min(next + wave)).collect();
        next += batch.len();
        let requests = batch
            .iter()
            .map(|&i| CompletionRequest::new(prompt.clone(), opts.params.with_seed(opts.params.seed.wrapping_add(i as u64))))
            .collect::<Result<Vec<_>, _>>()?;
        let completions = join_all(requests.iter().map(|r| gateway.complete(r))).await;

        for ((i, req), completion) in batch.into_iter().zip(&requests).zip(completions) {
            let mut log = RoundLog {
                round: i,
                seed: req.params.seed,
                parsed: 0,
                accepted: 0,
                rejected_duplicates: 0,
                rejected_malformed: 0,
                error: None,
            };
            match completion {
                Ok(text) => {
                    let parsed = parse_instruction_list(&text);
                    log.parsed = parsed.len();
                    if parsed.is_empty() {
                        log.rejected_malformed = 1;
                    }
                    for item in parsed {
                        if accepted.len() >= opts.target_count {
                            break;
                        }
                        if pool.offer(&item) {
                            accepted.push(item);
                            log.accepted += 1;
                        } else {
                            log.rejected_duplicates += 1;
                        }
                    }
                }
                Err(e) => {
                    warn!(round = i, error = %e, "synthetic round failed");
                    log.error = Some(e.to_string());
                }
            }
            rounds.push(log);
            if accepted.len() >= opts.target_count {
                break 'outer;
            }
        }
    }

    let reached_target = accepted.len() >= opts.target_count;
    if !reached_target {
        warn!(
            accepted = accepted.len(),
            target = opts.target_count,
            rounds = rounds.len(),
            "round cap reached before target; returning partial result"
        );
    }
    info!(accepted = accepted.len(), rounds = rounds.len(), "synthetic generation finished");

    let records = accepted
        .into_iter()
        .enumerate()
        .map(|(i, instruction)| InstructionRecord {
            id: format!("{}{i:05}", opts.id_prefix),
            category: Category::CreativeWriting,
            instruction,
            context: None,
            response: None,
            split: Split::Train,
            provenance: Provenance::Synthetic,
        })
        .collect();
    Ok(SynthRun { records, rounds, reached_target })
}
