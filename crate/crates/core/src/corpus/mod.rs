//! Instruction corpora: record types, JSONL ingest/export, category
//! filtering, split assignment and descriptive statistics.

mod split;
mod stats;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};

pub use split::{assign_splits, SplitConfig};
pub use stats::{first_word_stats, length_histogram, FirstWordEntry, Histogram, TextField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    OpenQa,
    GeneralQa,
    Summarization,
    Brainstorming,
    Classification,
    ClosedQa,
    InformationExtraction,
    CreativeWriting,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::OpenQa,
        Category::GeneralQa,
        Category::Summarization,
        Category::Brainstorming,
        Category::Classification,
        Category::ClosedQa,
        Category::InformationExtraction,
        Category::CreativeWriting,
    ];

    /// Categories kept after filtering, in report column order.
    pub const RETAINED: [Category; 5] = [
        Category::Brainstorming,
        Category::CreativeWriting,
        Category::GeneralQa,
        Category::OpenQa,
        Category::Summarization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::OpenQa => "open_qa",
            Category::GeneralQa => "general_qa",
            Category::Summarization => "summarization",
            Category::Brainstorming => "brainstorming",
            Category::Classification => "classification",
            Category::ClosedQa => "closed_qa",
            Category::InformationExtraction => "information_extraction",
            Category::CreativeWriting => "creative_writing",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::OpenQa => "Open QA",
            Category::GeneralQa => "General QA",
            Category::Summarization => "Summarization",
            Category::Brainstorming => "Brainstorming",
            Category::Classification => "Classification",
            Category::ClosedQa => "Closed QA",
            Category::InformationExtraction => "Information Extraction",
            Category::CreativeWriting => "Creative Writing",
        }
    }

    pub fn is_retrievable(self) -> bool {
        Self::RETAINED.contains(&self)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Human,
    Synthetic,
}

/// One prompt/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub category: Category,
    pub instruction: String,
    pub context: Option<String>,
    pub response: Option<String>,
    pub split: Split,
    pub provenance: Provenance,
}

impl InstructionRecord {
    pub fn human(id: impl Into<String>, category: Category, instruction: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            category,
            instruction: instruction.into(),
            context: None,
            response: None,
            split: Split::Unassigned,
            provenance: Provenance::Human,
        }
    }

    pub fn has_response(&self) -> bool {
        self.response.as_deref().is_some_and(|r| !r.trim().is_empty())
    }

    /// The text sent to the model when generating this record's response.
    /// A non-empty context passage is appended after a blank line.
    pub fn generation_text(&self, include_context: bool) -> String {
        match self.context.as_deref() {
            Some(ctx) if include_context && !ctx.trim().is_empty() => {
                format!("{}\n\nContext: {}", self.instruction, ctx)
            }
            _ => self.instruction.clone(),
        }
    }
}

/// An ordered collection of records with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<InstructionRecord>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and synthetic records outside train.
    pub fn new(records: Vec<InstructionRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate record id {:?}", r.id)));
            }
            check_provenance(r)?;
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[InstructionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<InstructionRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&InstructionRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &InstructionRecord> {
        self.records.iter()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &InstructionRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn split_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for r in &self.records {
            counts[r.split as usize] += 1;
        }
        counts
    }

    /// Appends records, enforcing the same invariants as [`Corpus::new`].
    pub fn extend(&mut self, more: Vec<InstructionRecord>) -> Result<()> {
        let mut records = std::mem::take(&mut self.records);
        records.extend(more);
        *self = Corpus::new(records)?;
        Ok(())
    }

    /// Serializes as native JSONL, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(self.to_jsonl())
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl().as_bytes())
    }
}

fn check_provenance(r: &InstructionRecord) -> Result<()> {
    if r.provenance == Provenance::Synthetic && r.split != Split::Train {
        return Err(Error::InvalidArgument(format!(
            "synthetic record {:?} must be in the train split",
            r.id
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    DollyJsonl,
    NativeJsonl,
}

impl FromStr for IngestFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dolly" | "dolly_jsonl" => Ok(IngestFormat::DollyJsonl),
            "native" | "native_jsonl" => Ok(IngestFormat::NativeJsonl),
            other => Err(Error::InvalidArgument(format!("unknown ingest format {other:?}"))),
        }
    }
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub corpus: Corpus,
    pub malformed: usize,
    pub unknown_category: usize,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct DollyLine {
    instruction: String,
    #[serde(default)]
    context: Option<String>,
    category: String,
}

pub fn ingest(path: &Path, format: IngestFormat) -> Result<IngestOutcome> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(ingest_str(&text, format))
}

/// Parses JSONL text. Bad lines are skipped and tallied, never fatal.
pub fn ingest_str(text: &str, format: IngestFormat) -> IngestOutcome {
    let mut out = IngestOutcome::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();

    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parsed = match format {
            IngestFormat::DollyJsonl => parse_dolly(line, idx),
            IngestFormat::NativeJsonl => parse_native(line),
        };
        match parsed {
            Ok(rec) => {
                if !seen.insert(rec.id.clone()) {
                    out.malformed += 1;
                    out.warnings.push(format!("line {lineno}: duplicate id {:?}", rec.id));
                } else {
                    records.push(rec);
                }
            }
            Err(LineError::UnknownCategory(c)) => {
                out.unknown_category += 1;
                out.warnings.push(format!("line {lineno}: unknown category {c:?}"));
            }
            Err(LineError::Malformed(msg)) => {
                out.malformed += 1;
                out.warnings.push(format!("line {lineno}: {msg}"));
            }
        }
    }
    for w in &out.warnings {
        warn!("{w}");
    }
    out.corpus = Corpus { records };
    out
}

enum LineError {
    UnknownCategory(String),
    Malformed(String),
}

fn parse_dolly(line: &str, idx: usize) -> Result<InstructionRecord, LineError> {
    let raw: DollyLine = serde_json::from_str(line).map_err(|e| LineError::Malformed(e.to_string()))?;
    if raw.instruction.trim().is_empty() {
        return Err(LineError::Malformed("empty instruction".into()));
    }
    let category = raw
        .category
        .parse::<Category>()
        .map_err(|_| LineError::UnknownCategory(raw.category.clone()))?;
    Ok(InstructionRecord {
        id: format!("{idx:05}"),
        category,
        instruction: raw.instruction,
        context: raw.context.filter(|c| !c.trim().is_empty()),
        response: None,
        split: Split::Unassigned,
        provenance: Provenance::Human,
    })
}

fn parse_native(line: &str) -> Result<InstructionRecord, LineError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| LineError::Malformed(e.to_string()))?;
    if let Some(c) = value.get("category").and_then(|c| c.as_str()) {
        if c.parse::<Category>().is_err() {
            return Err(LineError::UnknownCategory(c.to_string()));
        }
    }
    let rec: InstructionRecord =
        serde_json::from_value(value).map_err(|e| LineError::Malformed(e.to_string()))?;
    if rec.instruction.trim().is_empty() {
        return Err(LineError::Malformed("empty instruction".into()));
    }
    check_provenance(&rec).map_err(|e| LineError::Malformed(e.to_string()))?;
    Ok(rec)
}

/// Keeps only records whose category is one of the five retrievable ones.
pub fn filter_retrievable(corpus: &Corpus) -> Corpus {
    Corpus {
        records: corpus
            .records
            .iter()
            .filter(|r| r.category.is_retrievable())
            .cloned()
            .collect(),
    }
}

/// Writes through a temporary sibling file and renames into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp~");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
