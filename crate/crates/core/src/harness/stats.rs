//! Small rank and permutation statistics for trend checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParam("correlation needs two equal-length samples of size >= 2".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidParam("correlation of a constant sample is undefined".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Above this many pairs the sign-flip distribution is sampled instead of enumerated.
pub const EXACT_PAIRS_LIMIT: usize = 20;
const MONTE_CARLO_DRAWS: usize = 200_000;

/// One-sided paired sign-flip permutation test of `mean(diffs) > 0`.
///
/// Returns the fraction of sign assignments whose mean is at least the
/// observed one (the identity included, so `p >= 2^-n`).
pub fn sign_flip_test(diffs: &[f64]) -> Result<f64> {
    if diffs.is_empty() || diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParam("sign-flip test needs finite differences".into()));
    }
    let observed: f64 = diffs.iter().sum();
    // guard against rounding making the identity look smaller than itself
    let tol = 1e-12 * diffs.iter().map(|d| d.abs()).sum::<f64>();
    let n = diffs.len();
    let count_at_least = |sum: f64| (sum >= observed - tol) as u64;
    if n <= EXACT_PAIRS_LIMIT {
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = diffs
                .iter()
                .enumerate()
                .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
                .sum();
            hits += count_at_least(s);
        }
        Ok(hits as f64 / (1u64 << n) as f64)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut hits = 1u64;
        for _ in 0..MONTE_CARLO_DRAWS {
            let s: f64 = diffs.iter().map(|d| if rng.random::<bool>() { -d } else { *d }).sum();
            hits += count_at_least(s);
        }
        Ok(hits as f64 / (MONTE_CARLO_DRAWS + 1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 30.0, 20.0, 20.0]), vec![1.0, 4.0, 2.5, 2.5]);
    }

    #[test]
    fn spearman_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap(), 1.0);
        assert_eq!(spearman(&x, &[5.0, 3.0, 2.0, 1.0, 0.0]).unwrap(), -1.0);
        assert!(spearman(&x, &[1.0; 5]).is_err());
    }

    #[test]
    fn spearman_matches_hand_value() {
        // rank differences 1, -1, 0, 0, 0 -> rho = 1 - 6*2/(5*24) = 0.9
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((rho - 0.9).abs() < 1e-12);
    }

    #[test]
    fn sign_flip_all_positive() {
        // only the identity reaches the observed sum
        let p = sign_flip_test(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(p, 1.0 / 32.0);
    }

    #[test]
    fn sign_flip_by_enumeration() {
        // sums over the 8 sign patterns of (3, -1, 2): 4, -2, 6, 0, 0, -6, 2, -4 -> two are >= 4
        let p = sign_flip_test(&[3.0, -1.0, 2.0]).unwrap();
        assert_eq!(p, 2.0 / 8.0);
    }

    #[test]
    fn sign_flip_null_is_not_significant() {
        let p = sign_flip_test(&[1.0, -1.0, 0.5, -0.5, 0.2, -0.2]).unwrap();
        assert!(p > 0.5);
    }

    #[test]
    fn sign_flip_sampled_for_many_pairs() {
        let diffs: Vec<f64> = (0..30).map(|i| 1.0 + i as f64 * 0.01).collect();
        let p = sign_flip_test(&diffs).unwrap();
        assert!(p < 1e-4);
        let null: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(sign_flip_test(&null).unwrap() > 0.3);
    }
}
