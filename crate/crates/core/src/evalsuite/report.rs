use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::warn;

use super::{bertscore_f1, cosine_similarity, rouge_l};
use crate::corpus::{Category, Corpus, Split};
use crate::error::{Error, Result};
use crate::llmgate::{Gateway, GatewayError};
use crate::recover::{RecoveryMethod, RecoveryPrediction};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricTriple {
    pub rouge_l: Option<f64>,
    pub minilm_sim: Option<f64>,
    /// Absent when the embedding provider has no token embeddings.
    pub bertscore: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryScores {
    pub scores: MetricTriple,
    pub rouge_l_recall: Option<f64>,
    pub n_scored: usize,
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: RecoveryMethod,
    pub per_category: BTreeMap<Category, CategoryScores>,
    pub balanced: MetricTriple,
    pub balanced_rouge_l_recall: Option<f64>,
    pub bertscore_available: bool,
}

/// Unweighted mean; `None` for an empty slice.
pub fn balanced_average(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Rounds half-up to two decimals. The 1e-9 nudge absorbs binary
/// representation error so that e.g. 0.285 rounds to 0.29.
pub fn round_half_up_2(x: f64) -> f64 {
    (x * 100.0 + 0.5 + 1e-9).floor() / 100.0
}

struct PairScore {
    category: Category,
    rouge_f1: f64,
    rouge_recall: f64,
    minilm: f64,
    bertscore: Option<f64>,
}

async fn score_pair(
    gateway: &dyn Gateway,
    predicted: &str,
    original: &str,
    want_bertscore: bool,
) -> Result<(f64, f64, f64, Option<Result<f64, GatewayError>>)> {
    let rl = rouge_l(predicted, original);
    if predicted.trim().is_empty() {
        return Ok((rl.f1, rl.recall, 0.0, want_bertscore.then_some(Ok(0.0))));
    }
    let a = gateway.sentence_embed(predicted).await?;
    let b = gateway.sentence_embed(original).await?;
    let minilm = cosine_similarity(&a.values, &b.values)?.max(0.0);

    let bert = if want_bertscore {
        let rows = async {
            let c = gateway.token_embed(predicted).await?;
            let r = gateway.token_embed(original).await?;
            Ok::<_, GatewayError>((c, r))
        }
        .await;
        Some(match rows {
            Ok((c, r)) => {
                let c: Vec<Vec<f64>> = c.into_iter().map(|v| v.values).collect();
                let r: Vec<Vec<f64>> = r.into_iter().map(|v| v.values).collect();
                Ok(bertscore_f1(&c, &r)?.f1.clamp(0.0, 1.0))
            }
            Err(GatewayError::InvalidRequest(_)) => Ok(0.0),
            Err(e) => Err(e),
        })
    } else {
        None
    };
    Ok((rl.f1, rl.recall, minilm, bert))
}

/// Scores each prediction against its record's original instruction.
///
/// Records of `split` without a prediction count toward `n_missing` and are
/// left out of the means. Cosine similarities are floored at 0.
pub async fn evaluate(
    method: RecoveryMethod,
    predictions: &[RecoveryPrediction],
    corpus: &Corpus,
    split: Split,
    gateway: &dyn Gateway,
) -> Result<MetricReport> {
    let index: HashMap<&str, _> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut jobs = Vec::with_capacity(predictions.len());
    for p in predictions {
        if p.method != method {
            return Err(Error::InvalidArgument(format!(
                "prediction for {:?} has method {}, expected {method}",
                p.record_id, p.method
            )));
        }
        let record = index
            .get(p.record_id.as_str())
            .ok_or_else(|| Error::UnknownRecord(p.record_id.clone()))?;
        if record.split != split {
            return Err(Error::Precondition(format!(
                "prediction for {:?} is outside the {} split",
                p.record_id,
                split.as_str()
            )));
        }
        jobs.push((record.category, p.predicted_prompt.as_str(), record.instruction.as_str()));
    }

    // Probe token-embedding support once so a provider without it drops the
    // column instead of failing every pair.
    let mut bertscore_available = true;
    if let Some((_, _, original)) = jobs.first() {
        if let Err(GatewayError::Unsupported(what)) = gateway.token_embed(original).await {
            warn!("{what} unsupported; BERTScore column will be absent");
            bertscore_available = false;
        }
    }

    let scored: Vec<Result<PairScore>> = stream::iter(jobs)
        .map(|(category, predicted, original)| async move {
            let (rouge_f1, rouge_recall, minilm, bert) =
                score_pair(gateway, predicted, original, bertscore_available).await?;
            let bertscore = bert.transpose()?;
            Ok(PairScore { category, rouge_f1, rouge_recall, minilm, bertscore })
        })
        .buffered(gateway.max_in_flight())
        .collect()
        .await;

    let mut sums: BTreeMap<Category, (usize, f64, f64, f64, f64)> = BTreeMap::new();
    for s in scored {
        let s = s?;
        let e = sums.entry(s.category).or_default();
        e.0 += 1;
        e.1 += s.rouge_f1;
        e.2 += s.rouge_recall;
        e.3 += s.minilm;
        e.4 += s.bertscore.unwrap_or(0.0);
    }

    let predicted_ids: std::collections::HashSet<&str> =
        predictions.iter().map(|p| p.record_id.as_str()).collect();
    let mut per_category = BTreeMap::new();
    for cat in Category::RETAINED {
        let n_missing = corpus
            .in_split(split)
            .filter(|r| r.category == cat && !predicted_ids.contains(r.id.as_str()))
            .count();
        let cs = match sums.get(&cat) {
            Some(&(n, rf, rr, mm, bs)) => {
                let n_f = n as f64;
                CategoryScores {
                    scores: MetricTriple {
                        rouge_l: Some(rf / n_f),
                        minilm_sim: Some(mm / n_f),
                        bertscore: bertscore_available.then_some(bs / n_f),
                    },
                    rouge_l_recall: Some(rr / n_f),
                    n_scored: n,
                    n_missing,
                }
            }
            None => CategoryScores { n_missing, ..CategoryScores::default() },
        };
        per_category.insert(cat, cs);
    }

    let column = |f: fn(&CategoryScores) -> Option<f64>| -> Option<f64> {
        balanced_average(&per_category.values().filter_map(f).collect::<Vec<_>>())
    };
    let balanced = MetricTriple {
        rouge_l: column(|c| c.scores.rouge_l),
        minilm_sim: column(|c| c.scores.minilm_sim),
        bertscore: column(|c| c.scores.bertscore),
    };
    let balanced_rouge_l_recall = column(|c| c.rouge_l_recall);

    Ok(MetricReport { method, per_category, balanced, balanced_rouge_l_recall, bertscore_available })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Jsonl,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "jsonl" => Ok(ReportFormat::Jsonl),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

const METRICS: [(&str, &str); 3] = [
    ("rouge_l", "ROUGE-L"),
    ("minilm_sim", "MiniLM similarity"),
    ("bertscore", "BERTScore"),
];

fn pick(t: &MetricTriple, metric: &str) -> Option<f64> {
    match metric {
        "rouge_l" => t.rouge_l,
        "minilm_sim" => t.minilm_sim,
        "bertscore" => t.bertscore,
        _ => None,
    }
}

fn table_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", round_half_up_2(x))).unwrap_or_else(|| "-".into())
}

/// Renders reports with columns Brainstorming, Creative Writing, General QA,
/// Open QA, Summarization, Average (balanced).
pub fn render_report(reports: &[MetricReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(reports),
        ReportFormat::Csv => render_csv(reports),
        ReportFormat::Jsonl => render_jsonl(reports),
    }
}

fn render_table(reports: &[MetricReport]) -> String {
    let mut header = vec!["Method".to_string(), "Metric".to_string()];
    header.extend(Category::RETAINED.iter().map(|c| c.display_name().to_string()));
    header.push("Average (balanced)".into());

    let mut rows = vec![header];
    for r in reports {
        for (key, label) in METRICS {
            let mut row = vec![r.method.display_name().to_string(), label.to_string()];
            row.extend(
                Category::RETAINED
                    .iter()
                    .map(|c| table_cell(r.per_category.get(c).and_then(|s| pick(&s.scores, key)))),
            );
            row.push(table_cell(pick(&r.balanced, key)));
            rows.push(row);
        }
    }

    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (n, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "| {} |", cells.join(" | ")).unwrap();
        if n == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(out, "|-{}-|", rule.join("-|-")).unwrap();
        }
    }
    out
}

fn render_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("method,metric");
    for c in Category::RETAINED {
        out.push(',');
        out.push_str(c.as_str());
    }
    out.push_str(",balanced\n");
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        for (key, _) in METRICS {
            write!(out, "{},{}", r.method, key).unwrap();
            for c in Category::RETAINED {
                write!(out, ",{}", cell(r.per_category.get(&c).and_then(|s| pick(&s.scores, key)))).unwrap();
            }
            writeln!(out, ",{}", cell(pick(&r.balanced, key))).unwrap();
        }
    }
    out
}

fn render_jsonl(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let counts = |f: fn(&CategoryScores) -> usize| -> serde_json::Map<String, serde_json::Value> {
            r.per_category.iter().map(|(c, s)| (c.as_str().to_string(), json!(f(s)))).collect()
        };
        let mut lines: Vec<(&str, BTreeMap<&str, Option<f64>>, Option<f64>)> = METRICS
            .iter()
            .map(|(key, _)| {
                (
                    *key,
                    r.per_category.iter().map(|(c, s)| (c.as_str(), pick(&s.scores, key))).collect(),
                    pick(&r.balanced, key),
                )
            })
            .collect();
        lines.push((
            "rouge_l_recall",
            r.per_category.iter().map(|(c, s)| (c.as_str(), s.rouge_l_recall)).collect(),
            r.balanced_rouge_l_recall,
        ));
        for (metric, per_category, balanced) in lines {
            let v = json!({
                "method": r.method,
                "metric": metric,
                "per_category": per_category,
                "balanced": balanced,
                "n_scored": counts(|s| s.n_scored),
                "n_missing": counts(|s| s.n_missing),
            });
            out.push_str(&v.to_string());
            out.push('\n');
        }
    }
    out
}
