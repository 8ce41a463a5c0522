use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ranking::fractional_ranks;
use crate::error::{Error, Result};

/// Meaning of a [`UTestMatrix`] entry, written next to every p-value.
pub const ORIENTATION: &str = "p(row,col): H1 = column outperforms row (column errors stochastically smaller)";

/// Largest `n·m` for which the exact null distribution is enumerated.
const EXACT_LIMIT: usize = 400;

/// `U_A`: pairs with `a > b`, plus one half per tie.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// One-sided Mann-Whitney U test of "A is stochastically smaller than B".
///
/// Exact (conditional on the observed ties) when `n·m ≤ 400`, otherwise the
/// normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::invalid("Mann-Whitney U needs two nonempty samples"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = fractional_ranks(&pooled);
    if n * m <= EXACT_LIMIT {
        Ok(exact_lower_tail(&ranks, n))
    } else {
        Ok(normal_lower_tail(&pooled, &ranks, n, m))
    }
}

/// `P(R_A ≤ observed)` over all ways of choosing `n` of the pooled ranks.
fn exact_lower_tail(ranks: &[f64], n: usize) -> f64 {
    // Doubled midranks are integers.
    let r2: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let observed: usize = r2[..n].iter().sum();
    let max_sum: usize = {
        let mut s = r2.clone();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s[..n].iter().sum()
    };
    // ways[j][s]: subsets of size j with doubled rank sum s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n + 1];
    ways[0][0] = 1.0;
    for &r in &r2 {
        for j in (1..=n).rev() {
            let (lo, hi) = ways.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let total: f64 = ways[n].iter().sum();
    let below: f64 = ways[n][..=observed.min(max_sum)].iter().sum();
    (below / total).clamp(0.0, 1.0)
}

fn normal_lower_tail(pooled: &[f64], ranks: &[f64], n: usize, m: usize) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let big_n = nf + mf;
    let r_a: f64 = ranks[..n].iter().sum();
    let u = r_a - nf * (nf + 1.0) / 2.0;
    let mean = nf * mf / 2.0;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let z = (u - mean + 0.5) / var.sqrt();
    Normal::standard().cdf(z).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Means of consecutive groups of `size` values; a trailing partial group is dropped.
pub fn group_means(values: &[f64], size: usize) -> Vec<f64> {
    if size == 0 {
        return Vec::new();
    }
    values
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UTestMatrix {
    pub methods: Vec<String>,
    /// `p[row][col]`; the diagonal is `None`.
    pub p: Vec<Vec<Option<f64>>>,
    pub orientation: String,
}

/// Pairwise one-sided U tests; entry `(row, col)` tests whether the column
/// method's errors are smaller than the row method's.
pub fn pairwise_utest_matrix(methods: &[String], samples: &[Vec<f64>]) -> Result<UTestMatrix> {
    if methods.len() < 2 || methods.len() != samples.len() {
        return Err(Error::invalid("need at least two methods, each with a sample"));
    }
    let k = methods.len();
    let mut p = vec![vec![None; k]; k];
    for row in 0..k {
        for col in 0..k {
            if row != col {
                p[row][col] = Some(mann_whitney_u(&samples[col], &samples[row])?);
            }
        }
    }
    Ok(UTestMatrix {
        methods: methods.to_vec(),
        p,
        orientation: ORIENTATION.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute force over all C(n+m, n) assignments of pooled ranks to A.
    fn enumerate_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let ranks = fractional_ranks(&pooled);
        let observed: f64 = ranks[..a.len()].iter().sum();
        let total = pooled.len();
        let (mut hit, mut all) = (0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != a.len() {
                continue;
            }
            let s: f64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            all += 1;
            if s <= observed + 1e-9 {
                hit += 1;
            }
        }
        hit as f64 / all as f64
    }

    #[test]
    fn two_by_two() {
        let p = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert!((p - 1.0 / 6.0).abs() < 1e-12);
        assert!((mann_whitney_u(&[3.0, 4.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let a = [0.3, 0.1, 0.7, 0.7, 0.2];
        assert!(mann_whitney_u(&a, &a).unwrap() >= 0.5);
        let big: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        assert!(mann_whitney_u(&big, &big).unwrap() >= 0.5);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let a = [1.0, 2.0, 2.0, 5.0];
        let b = [2.0, 3.0, 3.0, 4.0, 6.0];
        assert!((mann_whitney_u(&a, &b).unwrap() - enumerate_p(&a, &b)).abs() < 1e-12);
        assert!((mann_whitney_u(&b, &a).unwrap() - enumerate_p(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn exact_and_normal_agree_without_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut v: Vec<f64> = (0..30).map(|i| i as f64).collect();
            v.shuffle(&mut rng);
            let (a, b) = v.split_at(15);
            let ranks = fractional_ranks(&v);
            let exact = exact_lower_tail(&ranks, 15);
            let approx = normal_lower_tail(&v, &ranks, 15, 15);
            assert!((exact - approx).abs() <= 0.02, "{exact} {approx}");
            assert_eq!(mann_whitney_u(a, b).unwrap(), exact);
        }
    }

    #[test]
    fn matrix_orientation() {
        let names: Vec<String> = ["bad", "good", "good2"].iter().map(|s| s.to_string()).collect();
        let samples = vec![
            vec![10.0, 11.0, 12.0, 13.0, 14.0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![1.5, 2.5, 3.5, 4.5, 5.5],
        ];
        let m = pairwise_utest_matrix(&names, &samples).unwrap();
        assert_eq!(m.orientation, ORIENTATION);
        // Columns "good" and "good2" outperform row "bad".
        assert!(m.p[0][1].unwrap() < 0.05 && m.p[0][2].unwrap() < 0.05);
        // "bad" as the column never outperforms.
        assert!(m.p[1][0].unwrap() > 0.05 && m.p[2][0].unwrap() > 0.05);
        assert!(m.p[0][0].is_none());
        assert!((m.p[0][1].unwrap() - enumerate_p(&samples[1], &samples[0])).abs() < 1e-12);
        assert!((m.p[1][0].unwrap() - enumerate_p(&samples[0], &samples[1])).abs() < 1e-12);
    }

    #[test]
    fn identical_methods_matrix() {
        let names = vec!["a".to_string(), "b".to_string()];
        let s = vec![0.4, 0.1, 0.9, 0.3];
        let m = pairwise_utest_matrix(&names, &[s.clone(), s]).unwrap();
        assert!(m.p[0][1].unwrap() >= 0.4 && m.p[1][0].unwrap() >= 0.4);
    }

    #[test]
    fn groups() {
        assert_eq!(group_means(&[1.0, 3.0, 5.0, 7.0, 9.0], 2), vec![2.0, 6.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn u_statistics_sum_to_nm(
            a in prop::collection::hash_set(0i32..1000, 1..12),
            b in prop::collection::hash_set(1000i32..2000, 1..12),
            flip in any::<bool>(),
        ) {
            let mut a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let mut b: Vec<f64> = b.into_iter().map(f64::from).collect();
            if flip {
                std::mem::swap(&mut a, &mut b);
            }
            let nm = (a.len() * b.len()) as f64;
            prop_assert_eq!(u_statistic(&a, &b) + u_statistic(&b, &a), nm);
        }

        #[test]
        fn p_values_are_probabilities(
            a in prop::collection::vec(0u8..6, 1..25),
            b in prop::collection::vec(0u8..6, 1..25),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let p = mann_whitney_u(&a, &b).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
        }

        #[test]
        fn exact_branch_matches_enumeration(
            a in prop::collection::vec(0u8..5, 1..6),
            b in prop::collection::vec(0u8..5, 1..6),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            prop_assert!((mann_whitney_u(&a, &b).unwrap() - enumerate_p(&a, &b)).abs() < 1e-12);
        }
    }
}
