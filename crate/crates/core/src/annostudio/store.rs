//! Durable annotation state: a plan snapshot plus an append-only score log.
//!
//! Every accepted score is appended to `scores.log` and fsynced before the
//! call returns. Opening a store replays the log over the snapshot, so a
//! crash loses nothing that was acknowledged. A torn trailing line (a write
//! interrupted before its newline) was never acknowledged and is dropped.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::wire::{ItemView, NextResponse, Progress};
use super::{aggregate, export_csv, export_jsonl, Aggregate, AnnotationError, AnnotationItem, AnnotationPlan, QualScore, ScoreEntry};
use crate::corpus::write_atomic;

pub const PLAN_FILE: &str = "plan.json";
pub const LOG_FILE: &str = "scores.log";
pub const OPTIONS_FILE: &str = "store.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreOptions {
    /// Withhold the original prompt until the item is scored.
    pub blind: bool,
    /// Permit changing an existing score without the per-request flag.
    pub allow_revise: bool,
    /// Keep one score per annotator instead of one per item.
    pub multi_annotator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoreEvent {
    item_id: String,
    score: QualScore,
    annotator_id: String,
    annotated_at: DateTime<Utc>,
}

struct Inner {
    plan: AnnotationPlan,
    index: HashMap<String, usize>,
    log: File,
}

pub struct AnnotationStore {
    dir: PathBuf,
    options: StoreOptions,
    inner: Mutex<Inner>,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> AnnotationError {
    AnnotationError::Storage(format!("{}: {e}", path.display()))
}

fn apply(item: &mut AnnotationItem, ev: &ScoreEvent, multi: bool) {
    let entry = ScoreEntry {
        score: ev.score,
        annotator_id: ev.annotator_id.clone(),
        annotated_at: ev.annotated_at,
    };
    let primary_matches = item.annotator_id.as_deref() == Some(ev.annotator_id.as_str());
    if item.score.is_none() || !multi || primary_matches {
        item.score = Some(entry.score);
        item.annotator_id = Some(entry.annotator_id);
        item.annotated_at = Some(entry.annotated_at);
    } else if let Some(slot) = item.additional.iter_mut().find(|e| e.annotator_id == ev.annotator_id) {
        *slot = entry;
    } else {
        item.additional.push(entry);
    }
}

fn open_log(path: &Path) -> Result<File, AnnotationError> {
    OpenOptions::new().create(true).append(true).open(path).map_err(|e| storage(path, e))
}

impl AnnotationStore {
    /// Initializes a new store directory from a plan. Fails if one exists.
    pub fn create(dir: impl AsRef<Path>, plan: &AnnotationPlan, options: StoreOptions) -> Result<Self, AnnotationError> {
        let dir = dir.as_ref();
        let plan_path = dir.join(PLAN_FILE);
        if plan_path.exists() {
            return Err(AnnotationError::Storage(format!("{} already exists", plan_path.display())));
        }
        let mut seen = HashSet::new();
        for item in &plan.items {
            if !seen.insert(item.item_id.as_str()) {
                return Err(AnnotationError::Storage(format!("duplicate item id {:?} in plan", item.item_id)));
            }
        }
        fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
        let opts_json = serde_json::to_vec_pretty(&options).expect("options serialize");
        write_atomic(&dir.join(OPTIONS_FILE), &opts_json).map_err(|e| AnnotationError::Storage(e.to_string()))?;
        let log_path = dir.join(LOG_FILE);
        File::create(&log_path).map_err(|e| storage(&log_path, e))?;
        let plan_json = serde_json::to_vec_pretty(plan).expect("plan serializes");
        write_atomic(&plan_path, &plan_json).map_err(|e| AnnotationError::Storage(e.to_string()))?;
        Self::open(dir)
    }

    /// Opens an existing store, replaying acknowledged scores.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, AnnotationError> {
        let dir = dir.as_ref().to_path_buf();
        let opts_path = dir.join(OPTIONS_FILE);
        let options: StoreOptions = match fs::read(&opts_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| storage(&opts_path, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreOptions::default(),
            Err(e) => return Err(storage(&opts_path, e)),
        };
        let plan_path = dir.join(PLAN_FILE);
        let bytes = fs::read(&plan_path).map_err(|e| storage(&plan_path, e))?;
        let mut plan: AnnotationPlan = serde_json::from_slice(&bytes).map_err(|e| storage(&plan_path, e))?;
        let index: HashMap<String, usize> =
            plan.items.iter().enumerate().map(|(i, it)| (it.item_id.clone(), i)).collect();

        let log_path = dir.join(LOG_FILE);
        let mut text = String::new();
        match File::open(&log_path) {
            Ok(mut f) => {
                f.read_to_string(&mut text).map_err(|e| storage(&log_path, e))?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(storage(&log_path, e)),
        }
        let complete_len = text.rfind('\n').map_or(0, |i| i + 1);
        if complete_len < text.len() {
            warn!("dropping torn trailing line in {}", log_path.display());
            let f = OpenOptions::new().write(true).open(&log_path).map_err(|e| storage(&log_path, e))?;
            f.set_len(complete_len as u64).map_err(|e| storage(&log_path, e))?;
            f.sync_all().map_err(|e| storage(&log_path, e))?;
        }
        for (n, line) in text[..complete_len].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ev: ScoreEvent = serde_json::from_str(line)
                .map_err(|e| AnnotationError::Storage(format!("{} line {}: {e}", log_path.display(), n + 1)))?;
            let Some(&i) = index.get(&ev.item_id) else {
                return Err(AnnotationError::Storage(format!(
                    "{} line {}: unknown item {:?}",
                    log_path.display(),
                    n + 1,
                    ev.item_id
                )));
            };
            apply(&mut plan.items[i], &ev, options.multi_annotator);
        }
        let log = open_log(&log_path)?;
        Ok(AnnotationStore { dir, options, inner: Mutex::new(Inner { plan, index, log }) })
    }

    pub fn with_blind(mut self, blind: bool) -> Self {
        self.options.blind = blind;
        self
    }

    pub fn with_allow_revise(mut self, allow: bool) -> Self {
        self.options.allow_revise = allow;
        self
    }

    pub fn options(&self) -> StoreOptions {
        self.options
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn plan(&self) -> AnnotationPlan {
        self.lock().plan.clone()
    }

    pub fn get(&self, item_id: &str) -> Result<AnnotationItem, AnnotationError> {
        let inner = self.lock();
        let i = *inner.index.get(item_id).ok_or_else(|| AnnotationError::NotFound(item_id.to_string()))?;
        Ok(inner.plan.items[i].clone())
    }

    pub fn view(&self, item_id: &str, annotator: Option<&str>) -> Result<ItemView, AnnotationError> {
        Ok(ItemView::of(&self.get(item_id)?, self.options.blind, annotator))
    }

    fn annotator_scope<'a>(&self, annotator: Option<&'a str>) -> Option<&'a str> {
        if self.options.multi_annotator {
            annotator
        } else {
            None
        }
    }

    pub fn progress(&self, annotator: Option<&str>) -> Progress {
        Progress::of(&self.lock().plan, self.annotator_scope(annotator))
    }

    /// The first unscored item in plan order that is not in `skip`. When
    /// only skipped items remain they come back in skip order.
    pub fn next_unscored(&self, annotator: Option<&str>, skip: &[String]) -> NextResponse {
        let scope = self.annotator_scope(annotator);
        let inner = self.lock();
        let open = |item: &&AnnotationItem| match scope {
            Some(a) => item.score_by(a).is_none(),
            None => !item.is_scored(),
        };
        let skipped: HashSet<&str> = skip.iter().map(String::as_str).collect();
        let item = inner
            .plan
            .items
            .iter()
            .filter(open)
            .find(|it| !skipped.contains(it.item_id.as_str()))
            .or_else(|| {
                skip.iter()
                    .filter_map(|id| inner.index.get(id).map(|&i| &inner.plan.items[i]))
                    .find(|it| open(it))
            });
        NextResponse {
            item: item.map(|it| ItemView::of(it, self.options.blind, annotator)),
            progress: Progress::of(&inner.plan, scope),
        }
    }

    /// Records a score. Resubmitting the stored value succeeds without a new
    /// log entry; a different value needs `allow_revise` (per call or store).
    pub fn submit_score(
        &self,
        item_id: &str,
        score: i64,
        annotator_id: &str,
        allow_revise: bool,
    ) -> Result<AnnotationItem, AnnotationError> {
        self.submit_score_at(item_id, score, annotator_id, allow_revise, Utc::now())
    }

    pub fn submit_score_at(
        &self,
        item_id: &str,
        score: i64,
        annotator_id: &str,
        allow_revise: bool,
        at: DateTime<Utc>,
    ) -> Result<AnnotationItem, AnnotationError> {
        let annotator_id = annotator_id.trim();
        if annotator_id.is_empty() {
            return Err(AnnotationError::MissingAnnotator);
        }
        let mut inner = self.lock();
        let i = *inner.index.get(item_id).ok_or_else(|| AnnotationError::NotFound(item_id.to_string()))?;
        let score = QualScore::new(score)?;
        let item = &inner.plan.items[i];
        let existing = if self.options.multi_annotator { item.score_by(annotator_id) } else { item.score };
        if let Some(stored) = existing {
            if stored == score {
                return Ok(item.clone());
            }
            if !(allow_revise || self.options.allow_revise) {
                return Err(AnnotationError::Conflict {
                    item_id: item_id.to_string(),
                    stored: stored.value(),
                    submitted: score.value(),
                });
            }
        }
        let ev = ScoreEvent {
            item_id: item_id.to_string(),
            score,
            annotator_id: annotator_id.to_string(),
            annotated_at: at,
        };
        let mut line = serde_json::to_string(&ev).expect("event serializes");
        line.push('\n');
        let log_path = self.dir.join(LOG_FILE);
        inner.log.write_all(line.as_bytes()).map_err(|e| storage(&log_path, e))?;
        inner.log.sync_data().map_err(|e| storage(&log_path, e))?;
        let multi = self.options.multi_annotator;
        apply(&mut inner.plan.items[i], &ev, multi);
        Ok(inner.plan.items[i].clone())
    }

    pub fn aggregate(&self) -> Aggregate {
        aggregate(&self.lock().plan)
    }

    pub fn export_csv(&self) -> String {
        export_csv(&self.lock().plan)
    }

    pub fn export_jsonl(&self) -> String {
        export_jsonl(&self.lock().plan)
    }

    /// Folds the log into a fresh snapshot and empties the log.
    pub fn compact(&self) -> Result<(), AnnotationError> {
        let mut inner = self.lock();
        let plan_json = serde_json::to_vec_pretty(&inner.plan).expect("plan serializes");
        write_atomic(&self.dir.join(PLAN_FILE), &plan_json).map_err(|e| AnnotationError::Storage(e.to_string()))?;
        let log_path = self.dir.join(LOG_FILE);
        let f = OpenOptions::new().write(true).truncate(true).open(&log_path).map_err(|e| storage(&log_path, e))?;
        f.sync_all().map_err(|e| storage(&log_path, e))?;
        inner.log = open_log(&log_path)?;
        Ok(())
    }
}
