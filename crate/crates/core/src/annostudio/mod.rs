//! Qualitative annotation backend: sampling plans, 1–4 scores, durable
//! storage, and aggregation into per-method score distributions.

mod store;
pub mod wire;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::corpus::{Category, Corpus};
use crate::digest::seeded_key;
use crate::error::{Error, Result};
use crate::recover::{RecoveryMethod, RecoveryPrediction};

pub use store::{AnnotationStore, StoreOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("unknown annotation item {0:?}")]
    NotFound(String),

    #[error("score {0} is outside the 1-4 scale")]
    OutOfRange(i64),

    #[error("item {item_id:?} already scored {stored}; revising to {submitted} requires allow_revise")]
    Conflict { item_id: String, stored: u8, submitted: u8 },

    #[error("annotator id must be non-empty")]
    MissingAnnotator,

    #[error("annotation storage: {0}")]
    Storage(String),
}

impl AnnotationError {
    pub fn code(&self) -> &'static str {
        match self {
            AnnotationError::NotFound(_) => "not_found",
            AnnotationError::OutOfRange(_) => "out_of_range",
            AnnotationError::Conflict { .. } => "conflict",
            AnnotationError::MissingAnnotator => "missing_annotator",
            AnnotationError::Storage(_) => "storage",
        }
    }
}

/// A 1–4 qualitative judgment of a predicted prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct QualScore(u8);

impl QualScore {
    pub const LABELS: [(u8, &'static str); 4] = [
        (4, "Perfect instruction"),
        (3, "Correct instruction with minor imperfections"),
        (2, "Valid instruction with errors"),
        (1, "Irrelevant or invalid"),
    ];

    pub fn new(value: i64) -> Result<Self, AnnotationError> {
        match value {
            1..=4 => Ok(QualScore(value as u8)),
            other => Err(AnnotationError::OutOfRange(other)),
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        Self::LABELS
            .iter()
            .find(|(v, _)| *v == self.0)
            .map(|(_, l)| *l)
            .expect("score in range")
    }
}

impl TryFrom<i64> for QualScore {
    type Error = AnnotationError;

    fn try_from(v: i64) -> Result<Self, AnnotationError> {
        QualScore::new(v)
    }
}

impl From<QualScore> for u8 {
    fn from(s: QualScore) -> u8 {
        s.0
    }
}

impl fmt::Display for QualScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub score: QualScore,
    pub annotator_id: String,
    pub annotated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub item_id: String,
    pub record_id: String,
    pub method: RecoveryMethod,
    pub category: Category,
    pub response_text: String,
    pub predicted_prompt: String,
    pub original_prompt: String,
    pub score: Option<QualScore>,
    pub annotator_id: Option<String>,
    pub annotated_at: Option<DateTime<Utc>>,
    /// Scores from further annotators when multi-annotator mode is on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub additional: Vec<ScoreEntry>,
}

impl AnnotationItem {
    pub fn is_scored(&self) -> bool {
        self.score.is_some()
    }

    /// Every score on this item, primary first.
    pub fn entries(&self) -> Vec<ScoreEntry> {
        let mut out = Vec::with_capacity(1 + self.additional.len());
        if let (Some(score), Some(annotator_id), Some(annotated_at)) =
            (self.score, self.annotator_id.clone(), self.annotated_at)
        {
            out.push(ScoreEntry { score, annotator_id, annotated_at });
        }
        out.extend(self.additional.iter().cloned());
        out
    }

    pub fn score_by(&self, annotator: &str) -> Option<QualScore> {
        self.entries().into_iter().find(|e| e.annotator_id == annotator).map(|e| e.score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationPlan {
    pub methods: Vec<RecoveryMethod>,
    pub per_category_count: usize,
    pub seed: u64,
    pub items: Vec<AnnotationItem>,
}

/// Samples `per_category_count` predictions per (method, retained category).
///
/// Categories with fewer predictions contribute all of them and produce a
/// warning.
pub fn build_plan(
    predictions: &BTreeMap<RecoveryMethod, Vec<RecoveryPrediction>>,
    corpus: &Corpus,
    per_category_count: usize,
    seed: u64,
) -> Result<(AnnotationPlan, Vec<String>)> {
    if per_category_count == 0 {
        return Err(Error::InvalidArgument("per_category_count must be >= 1".into()));
    }
    let mut warnings = Vec::new();
    let mut items = Vec::new();
    if predictions.values().all(Vec::is_empty) {
        warnings.push("no predictions; the plan is empty".to_string());
    }

    for (method, preds) in predictions {
        let mut by_category: BTreeMap<Category, Vec<(&RecoveryPrediction, &crate::corpus::InstructionRecord)>> =
            BTreeMap::new();
        for p in preds {
            if p.method != *method {
                return Err(Error::InvalidArgument(format!(
                    "prediction {:?} has method {}, listed under {method}",
                    p.record_id, p.method
                )));
            }
            let record = corpus.get(&p.record_id).ok_or_else(|| Error::UnknownRecord(p.record_id.clone()))?;
            by_category.entry(record.category).or_default().push((p, record));
        }
        for category in Category::RETAINED {
            let mut pool = by_category.remove(&category).unwrap_or_default();
            if pool.len() < per_category_count {
                warnings.push(format!(
                    "{method}/{category}: only {} predictions available, wanted {per_category_count}",
                    pool.len()
                ));
            }
            pool.sort_by_cached_key(|(p, _)| {
                (seeded_key(seed, &[method.as_str(), p.record_id.as_str()]), p.record_id.clone())
            });
            pool.truncate(per_category_count);
            pool.sort_by(|a, b| a.0.record_id.cmp(&b.0.record_id));
            for (p, record) in pool {
                items.push(AnnotationItem {
                    item_id: format!("{method}:{}", p.record_id),
                    record_id: p.record_id.clone(),
                    method: *method,
                    category,
                    response_text: record.response.clone().unwrap_or_default(),
                    predicted_prompt: p.predicted_prompt.clone(),
                    original_prompt: record.instruction.clone(),
                    score: None,
                    annotator_id: None,
                    annotated_at: None,
                    additional: Vec::new(),
                });
            }
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok((
        AnnotationPlan {
            methods: predictions.keys().copied().collect(),
            per_category_count,
            seed,
            items,
        },
        warnings,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub method: RecoveryMethod,
    pub category: Category,
    pub n_scored: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDistribution {
    pub method: RecoveryMethod,
    /// Count of scores 1, 2, 3, 4 (index 0 is score 1).
    pub counts: [usize; 4],
    pub n_scored: usize,
    pub n_items: usize,
    pub frac_at_least_3: f64,
    pub frac_equal_1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub cells: Vec<CellMean>,
    pub distributions: Vec<MethodDistribution>,
    pub scored: usize,
    pub total: usize,
}

/// Means per (method, category) and per-method score distributions, over
/// scored items only.
pub fn aggregate(plan: &AnnotationPlan) -> Aggregate {
    let mut cells: BTreeMap<(RecoveryMethod, Category), (usize, u64)> = BTreeMap::new();
    let mut dists: BTreeMap<RecoveryMethod, ([usize; 4], usize)> = BTreeMap::new();
    let mut scored = 0;
    for item in &plan.items {
        let d = dists.entry(item.method).or_default();
        d.1 += 1;
        let entries = item.entries();
        if !entries.is_empty() {
            scored += 1;
        }
        for e in entries {
            let c = cells.entry((item.method, item.category)).or_default();
            c.0 += 1;
            c.1 += e.score.value() as u64;
            d.0[e.score.value() as usize - 1] += 1;
        }
    }
    Aggregate {
        cells: cells
            .into_iter()
            .map(|((method, category), (n, sum))| CellMean { method, category, n_scored: n, mean: sum as f64 / n as f64 })
            .collect(),
        distributions: dists
            .into_iter()
            .filter(|(_, (counts, _))| counts.iter().sum::<usize>() > 0)
            .map(|(method, (counts, n_items))| {
                let n: usize = counts.iter().sum();
                MethodDistribution {
                    method,
                    counts,
                    n_scored: n,
                    n_items,
                    frac_at_least_3: (counts[2] + counts[3]) as f64 / n as f64,
                    frac_equal_1: counts[0] as f64 / n as f64,
                }
            })
            .collect(),
        scored,
        total: plan.items.len(),
    }
}

pub fn export_jsonl(plan: &AnnotationPlan) -> String {
    plan.items
        .iter()
        .map(|i| serde_json::to_string(i).expect("item serializes") + "\n")
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per score entry (unscored items get one row with an empty score).
pub fn export_csv(plan: &AnnotationPlan) -> String {
    let mut out = String::from(
        "item_id,record_id,method,category,score,annotator_id,annotated_at,predicted_prompt,original_prompt\n",
    );
    for item in &plan.items {
        let entries = item.entries();
        let rows: Vec<(String, String, String)> = if entries.is_empty() {
            vec![(String::new(), String::new(), String::new())]
        } else {
            entries
                .into_iter()
                .map(|e| (e.score.to_string(), e.annotator_id, e.annotated_at.to_rfc3339()))
                .collect()
        };
        for (score, annotator, at) in rows {
            let fields = [
                item.item_id.as_str(),
                item.record_id.as_str(),
                item.method.as_str(),
                item.category.as_str(),
                &score,
                &annotator,
                &at,
                &item.predicted_prompt,
                &item.original_prompt,
            ];
            out.push_str(&fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
    }
    out
}
