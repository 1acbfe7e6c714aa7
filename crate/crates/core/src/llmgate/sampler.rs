//! Reference token sampler: temperature, then top-k, then top-p, then
//! renormalize and draw.

use rand::Rng;

use super::{GatewayError, GenerationParams};

fn check_logits(logits: &[f64]) -> Result<(), GatewayError> {
    if logits.is_empty() {
        return Err(GatewayError::InvalidRequest("logits must be non-empty".into()));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(GatewayError::InvalidRequest("logits must be finite".into()));
    }
    Ok(())
}

/// Index of the largest logit; the lowest index wins ties.
fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate().skip(1) {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

/// Softmax of `logits / temperature`, numerically stabilized.
pub fn softmax_with_temperature(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| ((l - max) / temperature).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// The distribution actually sampled from: `(token index, probability)`
/// pairs sorted by descending probability (ties: ascending index), summing
/// to one.
///
/// With temperature 0 this is the single argmax token.
pub fn truncated_distribution(
    logits: &[f64],
    params: &GenerationParams,
) -> Result<Vec<(usize, f64)>, GatewayError> {
    check_logits(logits)?;
    params.validate()?;
    if params.temperature == 0.0 {
        return Ok(vec![(argmax(logits), 1.0)]);
    }

    let probs = softmax_with_temperature(logits, params.temperature);
    let mut ranked: Vec<(usize, f64)> = probs.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    if let Some(k) = params.top_k {
        ranked.truncate(k as usize);
        normalize(&mut ranked);
    }

    if params.top_p < 1.0 {
        let mut cumulative = 0.0;
        let mut keep = ranked.len();
        for (i, &(_, p)) in ranked.iter().enumerate() {
            cumulative += p;
            if cumulative >= params.top_p - 1e-12 {
                keep = i + 1;
                break;
            }
        }
        ranked.truncate(keep);
    }
    normalize(&mut ranked);
    Ok(ranked)
}

fn normalize(dist: &mut [(usize, f64)]) {
    let z: f64 = dist.iter().map(|(_, p)| p).sum();
    for (_, p) in dist.iter_mut() {
        *p /= z;
    }
}

/// Draws one token index. The caller owns the generator state.
pub fn sample_token<R: Rng + ?Sized>(
    logits: &[f64],
    params: &GenerationParams,
    rng: &mut R,
) -> Result<usize, GatewayError> {
    let dist = truncated_distribution(logits, params)?;
    if dist.len() == 1 {
        return Ok(dist[0].0);
    }
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for &(idx, p) in &dist {
        cumulative += p;
        if u < cumulative {
            return Ok(idx);
        }
    }
    Ok(dist[dist.len() - 1].0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(temperature: f64, top_p: f64, top_k: Option<u32>) -> GenerationParams {
        GenerationParams { temperature, top_p, top_k, max_tokens: 16, seed: 0 }
    }

    fn entropy(p: &[f64]) -> f64 {
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
    }

    #[test]
    fn zero_temperature_is_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_token(&[10.0, 0.0, 0.0], &params(0.0, 1.0, None), &mut rng).unwrap(), 0);
        }
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn top_k_one_ties_pick_lowest_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(sample_token(&[2.0; 5], &params(1.0, 1.0, Some(1)), &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn top_k_ties_keep_lowest_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(1.0, 1.0, Some(2));
        let mut seen = [0usize; 4];
        for _ in 0..10_000 {
            seen[sample_token(&[1.0; 4], &p, &mut rng).unwrap()] += 1;
        }
        assert_eq!(seen[2] + seen[3], 0);
        assert!(seen[0] > 4_500 && seen[1] > 4_500, "{seen:?}");
    }

    #[test]
    fn top_p_keeps_minimal_prefix() {
        let d = truncated_distribution(&[3.0, 2.0, 1.0], &params(1.0, 0.9, None)).unwrap();
        let idx: Vec<usize> = d.iter().map(|x| x.0).collect();
        assert_eq!(idx, vec![0, 1]);
        let e = (1.0f64).exp();
        let (p0, p1) = (e * e / (e * e + e), e / (e * e + e));
        assert!((d[0].1 - p0).abs() < 1e-12 && (d[1].1 - p1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_logits() {
        let p = params(1.0, 1.0, None);
        assert!(truncated_distribution(&[], &p).is_err());
        assert!(truncated_distribution(&[f64::NAN], &p).is_err());
        assert!(truncated_distribution(&[1.0], &params(1.0, 1.5, None)).is_err());
    }

    proptest! {
        #[test]
        fn truncation_is_a_distribution(
            logits in proptest::collection::vec(-20.0f64..20.0, 1..40),
            t in 0.05f64..3.0,
            top_p in 0.01f64..=1.0,
            top_k in proptest::option::of(1u32..50),
        ) {
            let p = params(t, top_p, top_k);
            let d = truncated_distribution(&logits, &p).unwrap();
            let sum: f64 = d.iter().map(|x| x.1).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(d.iter().all(|x| x.1 >= 0.0));
            if let Some(k) = top_k {
                prop_assert!(d.len() <= k as usize);
            }
            // minimal prefix: dropping the last kept token falls short of top_p
            if top_p < 1.0 && d.len() > 1 {
                let mut ranked: Vec<f64> = softmax_with_temperature(&logits, t);
                ranked.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if let Some(k) = top_k { ranked.truncate(k as usize); }
                let z: f64 = ranked.iter().sum();
                let short: f64 = ranked[..d.len() - 1].iter().sum::<f64>() / z;
                prop_assert!(short < top_p);
            }
        }

        #[test]
        fn entropy_grows_with_temperature(
            logits in proptest::collection::vec(-10.0f64..10.0, 2..20),
            t in 0.05f64..3.0,
            dt in 0.0f64..3.0,
        ) {
            let lo = entropy(&softmax_with_temperature(&logits, t));
            let hi = entropy(&softmax_with_temperature(&logits, t + dt));
            prop_assert!(hi >= lo - 1e-9);
        }
    }
}
