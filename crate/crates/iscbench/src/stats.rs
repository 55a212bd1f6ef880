//! Nonparametric comparison statistics for campaign reports.
//!
//! The U statistic follows the pair-counting convention
//! `U = #{(x,y) in a x b : x > y} + 0.5 * #ties`. For pooled sample sizes up
//! to [`EXACT_ENUMERATION_LIMIT`] the p-value is exact: every C(n+m, n)
//! assignment of the pooled values to the first group is enumerated. Larger
//! samples fall back to the tie-corrected normal approximation with
//! continuity correction and are flagged as such.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest pooled sample size enumerated exactly.
pub const EXACT_ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitneyOutcome {
    /// U statistic for the first sample (half-counts for ties).
    pub u: f64,
    /// Two-sided p-value, in (0, 1].
    pub p_two_sided: f64,
    /// Smaller one-sided tail, in (0, 1].
    pub p_one_sided: f64,
    /// True when the p-value came from exact enumeration.
    pub exact: bool,
}

/// Two-sample Mann-Whitney U test.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitneyOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let u_obs = u_statistic(a, b);
    if a.len() + b.len() <= EXACT_ENUMERATION_LIMIT {
        let (p_le, p_ge) = exact_tail_probabilities(a, b, u_obs);
        let one = p_le.min(p_ge);
        Ok(MannWhitneyOutcome {
            u: u_obs,
            p_two_sided: (2.0 * one).min(1.0),
            p_one_sided: one,
            exact: true,
        })
    } else {
        let (p_two, one) = normal_approximation(a, b, u_obs);
        Ok(MannWhitneyOutcome {
            u: u_obs,
            p_two_sided: p_two,
            p_one_sided: one,
            exact: false,
        })
    }
}

/// Pair-counting U for sample `a` against sample `b`.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// P(U <= u_obs) and P(U >= u_obs) over all rank splits of the pooled sample.
fn exact_tail_probabilities(a: &[f64], b: &[f64], u_obs: f64) -> (f64, f64) {
    let n = a.len();
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).expect("sample values must be ordered"));
    let total = pooled.len();

    let mut le = 0u64;
    let mut ge = 0u64;
    let mut splits = 0u64;
    let mut indices: Vec<usize> = (0..n).collect();
    let eps = 1e-9;
    loop {
        let mut in_a = vec![false; total];
        for &i in &indices {
            in_a[i] = true;
        }
        let mut u = 0.0;
        for i in 0..total {
            if !in_a[i] {
                continue;
            }
            for j in 0..total {
                if in_a[j] {
                    continue;
                }
                if pooled[i] > pooled[j] {
                    u += 1.0;
                } else if pooled[i] == pooled[j] {
                    u += 0.5;
                }
            }
        }
        if u <= u_obs + eps {
            le += 1;
        }
        if u >= u_obs - eps {
            ge += 1;
        }
        splits += 1;
        if !advance_combination(&mut indices, total) {
            break;
        }
    }
    (le as f64 / splits as f64, ge as f64 / splits as f64)
}

/// Advance `indices` to the next lexicographic k-combination of 0..total.
fn advance_combination(indices: &mut [usize], total: usize) -> bool {
    let k = indices.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if indices[i] < total - k + i {
            indices[i] += 1;
            for j in i + 1..k {
                indices[j] = indices[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn normal_approximation(a: &[f64], b: &[f64], u_obs: f64) -> (f64, f64) {
    let n = a.len() as f64;
    let m = b.len() as f64;
    let big_n = n + m;
    let mean = n * m / 2.0;

    // Tie correction over the pooled sample.
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).expect("sample values must be ordered"));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = n * m / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if variance <= 0.0 {
        return (1.0, 0.5);
    }
    let z = ((u_obs - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let tail = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    let p_two = (2.0 * tail).clamp(f64::MIN_POSITIVE, 1.0);
    (p_two, tail.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Complementary error function, Abramowitz & Stegun 7.1.26 (|err| < 1.5e-7).
fn erfc(x: f64) -> f64 {
    let sign_negative = x < 0.0;
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let result = poly * (-x * x).exp();
    if sign_negative {
        2.0 - result
    } else {
        result
    }
}

/// Trigger-time improvement: `baseline_time / subject_time`.
/// `None` when the subject never triggered (reported as "N.A").
pub fn speedup_ratio(baseline_secs: f64, subject_secs: f64) -> Option<f64> {
    if subject_secs > 0.0 {
        Some(baseline_secs / subject_secs)
    } else {
        None
    }
}

/// Reach-count improvement: `baseline_reaches / subject_reaches`.
/// `None` when the subject recorded no reaches (reported as "N.A").
pub fn reach_ratio(baseline_reaches: u64, subject_reaches: u64) -> Option<f64> {
    if subject_reaches >= 1 {
        Some(baseline_reaches as f64 / subject_reaches as f64)
    } else {
        None
    }
}
