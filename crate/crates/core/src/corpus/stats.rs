use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};
use crate::text::{is_stopword, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstWordEntry {
    pub word: String,
    pub count: usize,
    /// Most frequent next non-stopword tokens, descending.
    pub followers: Vec<(String, usize)>,
}

/// First-token taxonomy of instructions.
///
/// Returns the `inner_k` most common first tokens, each with its `outer_k`
/// most common followers, plus the number of records with at least one token
/// (the sum of all first-word counts before truncation). Ties break
/// alphabetically.
pub fn first_word_stats(corpus: &Corpus, inner_k: usize, outer_k: usize) -> Result<(Vec<FirstWordEntry>, usize)> {
    if inner_k == 0 || outer_k == 0 {
        return Err(Error::InvalidArgument("inner_k and outer_k must be >= 1".into()));
    }
    let mut firsts: HashMap<String, (usize, HashMap<String, usize>)> = HashMap::new();
    let mut with_tokens = 0;
    for r in corpus.iter() {
        let tokens = tokenize(&r.instruction);
        let Some((first, rest)) = tokens.split_first() else {
            continue;
        };
        with_tokens += 1;
        let entry = firsts.entry(first.clone()).or_default();
        entry.0 += 1;
        if let Some(next) = rest.iter().find(|t| !is_stopword(t)) {
            *entry.1.entry(next.clone()).or_default() += 1;
        }
    }

    let mut table: Vec<FirstWordEntry> = firsts
        .into_iter()
        .map(|(word, (count, followers))| FirstWordEntry {
            word,
            count,
            followers: top_k(followers, outer_k),
        })
        .collect();
    table.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    table.truncate(inner_k);
    Ok((table, with_tokens))
}

fn top_k(counts: HashMap<String, usize>, k: usize) -> Vec<(String, usize)> {
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    Instruction,
    Response,
}

impl FromStr for TextField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "instruction" => Ok(TextField::Instruction),
            "response" => Ok(TextField::Response),
            other => Err(Error::InvalidArgument(format!("unknown field {other:?}"))),
        }
    }
}

/// Sparse token-length histogram; key is the inclusive lower bound of each bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: usize,
    pub bins: BTreeMap<usize, usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.values().sum()
    }
}

pub fn length_histogram(corpus: &Corpus, field: TextField, bin_width: usize) -> Result<Histogram> {
    if bin_width == 0 {
        return Err(Error::InvalidArgument("bin_width must be >= 1".into()));
    }
    let mut bins = BTreeMap::new();
    for r in corpus.iter() {
        let text = match field {
            TextField::Instruction => Some(r.instruction.as_str()),
            TextField::Response => r.response.as_deref(),
        };
        let len = text.map(|t| tokenize(t).len()).unwrap_or(0);
        if len == 0 {
            continue;
        }
        *bins.entry(len / bin_width * bin_width).or_default() += 1;
    }
    Ok(Histogram { bin_width, bins })
}
