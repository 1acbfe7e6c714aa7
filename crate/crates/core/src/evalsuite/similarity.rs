use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidArgument("cosine of a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Greedy-matching BERTScore without IDF weighting or baseline rescaling.
///
/// Recall averages, over reference rows, the best cosine against any
/// candidate row; precision does the same from the candidate side.
pub fn bertscore_f1(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<BertScore> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::InvalidArgument("bertscore needs non-empty embedding matrices".into()));
    }
    let normalize = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|r| {
                let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n == 0.0 {
                    return Err(Error::InvalidArgument("zero embedding row".into()));
                }
                Ok(r.iter().map(|x| x / n).collect())
            })
            .collect()
    };
    let dim = candidate[0].len();
    if candidate.iter().chain(reference).any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument("embedding rows differ in dimension".into()));
    }
    let cand = normalize(candidate)?;
    let refs = normalize(reference)?;

    let sim: Vec<Vec<f64>> = cand
        .iter()
        .map(|c| refs.iter().map(|r| c.iter().zip(r).map(|(a, b)| a * b).sum()).collect())
        .collect();

    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / cand.len() as f64;
    let recall = (0..refs.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / refs.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(BertScore { precision, recall, f1 })
}
