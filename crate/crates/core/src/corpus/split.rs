use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Category, Corpus, Split};
use crate::digest::seeded_key;
use crate::error::{Error, Result};

const SPLITS: [Split; 3] = [Split::Train, Split::Validation, Split::Test];
const MIN_RECORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub validation_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            validation_frac: 0.1,
            test_frac: 0.1,
            seed: 42,
        }
    }
}

impl SplitConfig {
    pub fn fractions(&self) -> [f64; 3] {
        [self.train_frac, self.validation_frac, self.test_frac]
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be positive, got {f:?}"
            )));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Assigns every record to train/validation/test, stratified by category.
///
/// Within a category, records are ordered by a seeded hash of their id and
/// dealt out in that order. Counts are a controlled rounding of
/// `fraction × n`: every (category, split) cell is the floor or ceiling of
/// its exact share, every category keeps all of its records, and each
/// split's total is the largest-remainder rounding of `fraction × N`.
pub fn assign_splits(corpus: &Corpus, cfg: &SplitConfig) -> Result<Corpus> {
    cfg.validate()?;
    if corpus.len() < MIN_RECORDS {
        return Err(Error::Precondition(format!(
            "corpus has {} records, need at least {MIN_RECORDS} to split",
            corpus.len()
        )));
    }
    if let Some(r) = corpus.iter().find(|r| r.split != Split::Unassigned) {
        return Err(Error::Precondition(format!(
            "record {:?} already assigned to {}",
            r.id,
            r.split.as_str()
        )));
    }

    let mut by_category: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.records.iter().enumerate() {
        by_category.entry(r.category).or_default().push(i);
    }
    for members in by_category.values_mut() {
        members.sort_by_cached_key(|&i| {
            let id = corpus.records[i].id.as_str();
            (seeded_key(cfg.seed, &[id]), id.to_string())
        });
    }

    let sizes: Vec<usize> = by_category.values().map(Vec::len).collect();
    let cells = controlled_rounding(&sizes, &cfg.fractions());

    let mut records = corpus.records.clone();
    for (members, row) in by_category.values().zip(&cells) {
        let mut it = members.iter();
        for (split, &count) in SPLITS.iter().zip(row) {
            for &i in it.by_ref().take(count) {
                records[i].split = *split;
            }
        }
    }
    Ok(Corpus { records })
}

fn exact_bounds(x: f64) -> (usize, usize) {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        (r as usize, r as usize)
    } else {
        (x.floor() as usize, x.ceil() as usize)
    }
}

/// Rounds `quotas` (which sum to `total`) to integers summing to `total`,
/// giving leftover units to the largest fractional parts (ties: lower index).
fn largest_remainder(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = quotas.iter().map(|&q| exact_bounds(q).0).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - out[a] as f64;
        let fb = quotas[b] - out[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Rounds the `sizes × fracs` table so rows sum to `sizes`, columns sum to
/// the largest-remainder rounding of `fracs × Σsizes`, and each cell is the
/// floor or ceiling of its exact value.
fn controlled_rounding(sizes: &[usize], fracs: &[f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = sizes.iter().sum();
    let col_targets = largest_remainder(&fracs.map(|f| f * total as f64), total);

    let exact: Vec<[f64; 3]> = sizes.iter().map(|&n| fracs.map(|f| f * n as f64)).collect();
    let bounds: Vec<[(usize, usize); 3]> = exact.iter().map(|row| row.map(exact_bounds)).collect();
    let mut cells: Vec<[usize; 3]> = exact
        .iter()
        .zip(sizes)
        .map(|(row, &n)| {
            let v = largest_remainder(row, n);
            [v[0], v[1], v[2]]
        })
        .collect();

    loop {
        let col_sums: Vec<usize> = (0..3).map(|s| cells.iter().map(|r| r[s]).sum()).collect();
        let over: Vec<usize> = (0..3).filter(|&s| col_sums[s] > col_targets[s]).collect();
        if over.is_empty() {
            break;
        }
        let under = |s: usize| col_sums[s] < col_targets[s];

        // BFS over columns; an edge a -> b is a row that can shift one unit from a to b.
        let mut prev: [Option<(usize, usize)>; 3] = [None; 3];
        let mut visited = [false; 3];
        let mut queue = VecDeque::new();
        for &s in &over {
            visited[s] = true;
            queue.push_back(s);
        }
        let mut found = None;
        while let Some(a) = queue.pop_front() {
            if under(a) {
                found = Some(a);
                break;
            }
            for b in 0..3 {
                if visited[b] {
                    continue;
                }
                let row = (0..cells.len())
                    .find(|&c| cells[c][a] > bounds[c][a].0 && cells[c][b] < bounds[c][b].1);
                if let Some(c) = row {
                    visited[b] = true;
                    prev[b] = Some((a, c));
                    queue.push_back(b);
                }
            }
        }
        let Some(mut b) = found else {
            debug_assert!(false, "controlled rounding has no augmenting path");
            break;
        };
        while let Some((a, c)) = prev[b] {
            cells[c][a] -= 1;
            cells[c][b] += 1;
            b = a;
        }
    }
    cells
}
