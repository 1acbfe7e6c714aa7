//! Prompt-recovery metrics: ROUGE-L, sentence-embedding cosine, and
//! BERTScore-style greedy matching, aggregated per category and as the
//! balanced (unweighted) category average.

mod report;
mod rouge;
mod similarity;

pub use report::{
    balanced_average, evaluate, render_report, round_half_up_2, CategoryScores, MetricReport, MetricTriple,
    ReportFormat,
};
pub use rouge::{lcs_length, rouge_l, rouge_l_tokens, RougeL};
pub use similarity::{bertscore_f1, cosine_similarity, BertScore};
