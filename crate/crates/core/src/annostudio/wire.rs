//! Request and response bodies of the annotation service.
//!
//! | method | path                        | body            | response        |
//! |--------|-----------------------------|-----------------|-----------------|
//! | GET    | `/api/health`               |                 | [`Health`]      |
//! | GET    | `/api/items/next`           | `?annotator=&skip=id,id` | [`NextResponse`] |
//! | GET    | `/api/items/{id}`           |                 | [`ItemView`]    |
//! | POST   | `/api/items/{id}/score`     | [`ScoreRequest`] | [`ScoreResponse`] |
//! | GET    | `/api/aggregate`            |                 | [`Aggregate`](super::Aggregate) |
//! | GET    | `/api/export?format=csv\|jsonl` |             | text            |
//!
//! Failures carry an [`ErrorBody`] with status 400 (out of range, missing
//! annotator), 404 (unknown item), 409 (conflicting revision) or 500.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AnnotationItem, AnnotationPlan, QualScore};
use crate::corpus::Category;
use crate::recover::RecoveryMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLabel {
    pub value: u8,
    pub label: String,
}

pub fn scale_labels() -> Vec<ScaleLabel> {
    QualScore::LABELS
        .iter()
        .map(|(value, label)| ScaleLabel { value: *value, label: label.to_string() })
        .collect()
}

/// An item as shown to an annotator. `original_prompt` is withheld in blind
/// mode until the item is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub item_id: String,
    pub record_id: String,
    pub method: RecoveryMethod,
    pub category: Category,
    pub response_text: String,
    pub predicted_prompt: String,
    pub original_prompt: Option<String>,
    pub score: Option<QualScore>,
    pub annotator_id: Option<String>,
    pub annotated_at: Option<DateTime<Utc>>,
}

impl ItemView {
    pub fn of(item: &AnnotationItem, blind: bool, annotator: Option<&str>) -> Self {
        let own_score = match annotator {
            Some(a) => item.score_by(a),
            None => item.score,
        };
        let reveal = !blind || own_score.is_some();
        ItemView {
            item_id: item.item_id.clone(),
            record_id: item.record_id.clone(),
            method: item.method,
            category: item.category,
            response_text: item.response_text.clone(),
            predicted_prompt: item.predicted_prompt.clone(),
            original_prompt: reveal.then(|| item.original_prompt.clone()),
            score: item.score,
            annotator_id: item.annotator_id.clone(),
            annotated_at: item.annotated_at,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub scored: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub scored: usize,
    pub total: usize,
    pub per_method: BTreeMap<RecoveryMethod, Count>,
}

impl Progress {
    /// Progress for one annotator in multi-annotator mode, or overall.
    pub fn of(plan: &AnnotationPlan, annotator: Option<&str>) -> Self {
        let mut p = Progress::default();
        for item in &plan.items {
            let done = match annotator {
                Some(a) => item.score_by(a).is_some(),
                None => item.is_scored(),
            };
            let c = p.per_method.entry(item.method).or_default();
            c.total += 1;
            p.total += 1;
            if done {
                c.scored += 1;
                p.scored += 1;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextResponse {
    /// `None` once every item is scored.
    pub item: Option<ItemView>,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub score: i64,
    pub annotator_id: String,
    #[serde(default)]
    pub allow_revise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub item: ItemView,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub items: usize,
    pub scored: usize,
    pub blind: bool,
    pub multi_annotator: bool,
    pub scale: Vec<ScaleLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}
