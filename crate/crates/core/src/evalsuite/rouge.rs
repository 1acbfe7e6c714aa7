use serde::{Deserialize, Serialize};

use crate::text::tokenize;

/// Length of the longest common subsequence. Keeps one DP row sized by the
/// shorter input.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[short.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// ROUGE-L over token sequences; zero when either side is empty.
pub fn rouge_l_tokens<T: PartialEq>(candidate: &[T], reference: &[T]) -> RougeL {
    if candidate.is_empty() || reference.is_empty() {
        return RougeL::default();
    }
    let lcs = lcs_length(candidate, reference) as f64;
    if lcs == 0.0 {
        return RougeL::default();
    }
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    RougeL {
        precision,
        recall,
        f1: 2.0 * precision * recall / (precision + recall),
    }
}

pub fn rouge_l(candidate: &str, reference: &str) -> RougeL {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}
