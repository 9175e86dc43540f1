//! Run statistics: type-7 quantiles, the best / quartile-trimmed-mean /
//! tolerance summary used for reporting 30-run experiments, and the paired
//! two-tailed Wilcoxon signed-rank test (exact by enumeration for small n,
//! normal approximation with continuity and tie corrections otherwise).

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Linear-interpolation quantile (R type 7) of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    /// Maximum over all n values (untrimmed).
    pub best: f64,
    /// Mean of the values v with q1 <= v <= q3.
    pub mean_trimmed: f64,
    /// Half the interquartile range, the paper-style "+-" value.
    pub tolerance: f64,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

/// Summarize per-run accuracies (percent) the way the benchmark tables
/// report them.
pub fn summarize(values: &[f64]) -> Result<StatsSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput("summarize over empty value list"));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let kept: Vec<f64> = sorted.iter().copied().filter(|v| *v >= q1 && *v <= q3).collect();
    // q1..q3 can contain no sample only for n = 2 with distinct values;
    // fall back to the plain mean there.
    let mean_trimmed = if kept.is_empty() {
        sorted.iter().sum::<f64>() / sorted.len() as f64
    } else {
        kept.iter().sum::<f64>() / kept.len() as f64
    };
    Ok(StatsSummary {
        best: *sorted.last().unwrap(),
        mean_trimmed,
        tolerance: (q3 - q1) / 2.0,
        q1,
        q3,
        n: values.len(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Tail {
    /// H1: the paired samples differ (either direction).
    TwoSided,
    /// H1: a tends to exceed b.
    Greater,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// min(W+, W-) for two-sided, W- for the one-sided greater test.
    pub statistic: f64,
    pub p_value: f64,
    /// Pair count after dropping zero differences.
    pub n_effective: usize,
    /// All differences were zero; p is reported as 1.
    pub degenerate: bool,
    /// Whether the exact enumeration path was used.
    pub exact: bool,
}

/// Effective-n at or below which the exact enumeration is used.
pub const WILCOXON_EXACT_MAX_N: usize = 12;

/// Paired two-tailed Wilcoxon signed-rank test.
pub fn wilcoxon_signed_rank_two_tailed(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank(a, b, Tail::TwoSided)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], tail: Tail) -> Result<WilcoxonResult> {
    wilcoxon_with_threshold(a, b, tail, WILCOXON_EXACT_MAX_N)
}

pub(crate) fn wilcoxon_with_threshold(
    a: &[f64],
    b: &[f64],
    tail: Tail,
    exact_max_n: usize,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("wilcoxon over empty samples"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            degenerate: true,
            exact: true,
        });
    }

    let (ranks, signs, tie_sizes) = signed_ranks(&diffs);
    let w_plus: f64 = ranks.iter().zip(&signs).filter(|(_, s)| **s).map(|(r, _)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;

    let (statistic, p_value, exact) = if n <= exact_max_n {
        let p = match tail {
            Tail::TwoSided => exact_p(&ranks, w_plus.min(w_minus), true),
            Tail::Greater => exact_p(&ranks, w_minus, false),
        };
        let stat = match tail {
            Tail::TwoSided => w_plus.min(w_minus),
            Tail::Greater => w_minus,
        };
        (stat, p, true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let sd = libm::sqrt(var.max(f64::MIN_POSITIVE));
        match tail {
            Tail::TwoSided => {
                let w = w_plus.min(w_minus);
                let z = (w - mean + 0.5) / sd;
                (w, (2.0 * phi(z)).min(1.0), false)
            }
            Tail::Greater => {
                let z = (w_minus - mean + 0.5) / sd;
                (w_minus, phi(z).min(1.0), false)
            }
        }
    };

    Ok(WilcoxonResult {
        statistic,
        p_value,
        n_effective: n,
        degenerate: false,
        exact,
    })
}

/// Ranks of |d| (average ranks for ties), the sign of each d, and the tie
/// group sizes for the variance correction.
fn signed_ranks(diffs: &[f64]) -> (Vec<f64>, Vec<bool>, Vec<usize>) {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| libm::fabs(diffs[i]).total_cmp(&libm::fabs(diffs[j])));
    let mut ranks = alloc::vec![0.0; diffs.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len()
            && libm::fabs(diffs[order[j + 1]]) == libm::fabs(diffs[order[i]])
        {
            j += 1;
        }
        // positions i..=j share the average rank
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        if j > i {
            tie_sizes.push(j - i + 1);
        }
        i = j + 1;
    }
    let signs = diffs.iter().map(|d| *d > 0.0).collect();
    (ranks, signs, tie_sizes)
}

/// Exact tail probability by enumerating all 2^n sign assignments over the
/// observed ranks. Two-sided: P(min(S+, S-) <= w); one-sided: P(S- <= w).
fn exact_p(ranks: &[f64], w: f64, two_sided: bool) -> f64 {
    let n = ranks.len();
    let total: f64 = ranks.iter().sum();
    let mut hits = 0u64;
    for mask in 0u64..(1u64 << n) {
        let mut s_plus = 0.0;
        for (bit, r) in ranks.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                s_plus += r;
            }
        }
        let s_minus = total - s_plus;
        let stat = if two_sided { s_plus.min(s_minus) } else { s_minus };
        // tolerate float summation noise in the comparison
        if stat <= w + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    #[test]
    fn quantiles_match_hand_values() {
        let v = [70.0, 71.0, 72.0, 73.0, 74.0];
        assert_eq!(quantile_sorted(&v, 0.25), 71.0);
        assert_eq!(quantile_sorted(&v, 0.75), 73.0);
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 100.0];
        assert!((quantile_sorted(&w, 0.25) - 3.25).abs() < 1e-12);
        assert!((quantile_sorted(&w, 0.75) - 7.75).abs() < 1e-12);
    }

    #[test]
    fn summarize_identical_values() {
        let s = summarize(&[81.5; 30]).unwrap();
        assert_eq!(s.best, 81.5);
        assert_eq!(s.mean_trimmed, 81.5);
        assert_eq!(s.tolerance, 0.0);
        assert_eq!(s.n, 30);
    }

    #[test]
    fn summarize_hand_case() {
        let s = summarize(&[73.0, 70.0, 74.0, 71.0, 72.0]).unwrap();
        assert_eq!(s.q1, 71.0);
        assert_eq!(s.q3, 73.0);
        assert_eq!(s.tolerance, 1.0);
        assert_eq!(s.mean_trimmed, 72.0);
        assert_eq!(s.best, 74.0);
    }

    #[test]
    fn summarize_reproduces_table_row_format() {
        // 30-run sample constructed to land on a "77.7 +- 1.5"-style row:
        // ramp v_i = 74.8 + 0.2 i gives Q1 = 76.25, Q3 = 79.15 (type-7),
        // trimmed band v8..v21 with mean exactly 77.7, tolerance 1.45.
        let vals: Vec<f64> = (0..30).map(|i| 74.8 + 0.2 * i as f64).collect();
        let s = summarize(&vals).unwrap();
        assert!((s.q1 - 76.25).abs() < 1e-12);
        assert!((s.q3 - 79.15).abs() < 1e-12);
        assert!((s.mean_trimmed - 77.7).abs() < 1e-9);
        assert!((s.tolerance - 1.45).abs() < 1e-12);
        assert!((s.tolerance - 1.5).abs() < 0.06);
        assert!((s.best - 80.6).abs() < 1e-12);
    }

    #[test]
    fn tolerance_zero_iff_q1_equals_q3() {
        let s = summarize(&[5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(s.tolerance, 0.0);
        let t = summarize(&[5.0, 6.0, 7.0, 8.0]).unwrap();
        assert!(t.tolerance > 0.0);
        assert_ne!(t.q1, t.q3);
    }

    #[test]
    fn wilcoxon_all_equal_is_degenerate() {
        let a = [1.0, 2.0, 3.0];
        let r = wilcoxon_signed_rank_two_tailed(&a, &a).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n_effective, 0);
    }

    #[test]
    fn wilcoxon_one_through_five() {
        // d = {1..5}: W- = 0, exact two-tailed p = 2/32
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank_two_tailed(&a, &b).unwrap();
        assert!(r.exact);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 0.0625);
    }

    #[test]
    fn wilcoxon_one_sided_greater() {
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&a, &b, Tail::Greater).unwrap();
        assert_eq!(r.p_value, 1.0 / 32.0);
        // and the reverse direction is near 1
        let r2 = wilcoxon_signed_rank(&b, &a, Tail::Greater).unwrap();
        assert!(r2.p_value > 0.9);
    }

    #[test]
    fn wilcoxon_length_mismatch() {
        assert!(wilcoxon_signed_rank_two_tailed(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exact_and_normal_paths_agree_at_n12() {
        let mut r = rng::stream_rng(7, 1234);
        for _ in 0..50 {
            let a: Vec<f64> = (0..12).map(|_| r.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..12).map(|_| r.gen_range(-3.0..3.0)).collect();
            let exact = wilcoxon_with_threshold(&a, &b, Tail::TwoSided, 12).unwrap();
            let approx = wilcoxon_with_threshold(&a, &b, Tail::TwoSided, 0).unwrap();
            assert!(exact.exact && !approx.exact);
            assert!(
                (exact.p_value - approx.p_value).abs() < 0.02,
                "exact {} vs normal {}",
                exact.p_value,
                approx.p_value
            );
        }
    }

    proptest! {
        #[test]
        fn summarize_is_permutation_invariant(seed in 0u64..200) {
            let mut r = rng::stream_rng(seed, 55);
            let vals: Vec<f64> = (0..17).map(|_| r.gen_range(0.0..100.0)).collect();
            let mut shuffled = vals.clone();
            shuffled.shuffle(&mut r);
            prop_assert_eq!(summarize(&vals).unwrap(), summarize(&shuffled).unwrap());
        }

        #[test]
        fn wilcoxon_two_tailed_is_symmetric(seed in 0u64..200) {
            let mut r = rng::stream_rng(seed, 56);
            let n = r.gen_range(3usize..20);
            let a: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
            let ab = wilcoxon_signed_rank_two_tailed(&a, &b).unwrap();
            let ba = wilcoxon_signed_rank_two_tailed(&b, &a).unwrap();
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert_eq!(ab.statistic, ba.statistic);
        }
    }
}
