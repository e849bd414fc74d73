//! Two-sample Mann-Whitney U test.
//!
//! The statistic follows the reference-sample convention
//! `U = k1*k2 + k1*(k1+1)/2 - R1`, where `R1` is the rank sum of the first
//! sample. Two-sided p-values are identical under either convention.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest pooled sample size accepted by [`mann_whitney_exact`].
pub const EXACT_MAX_POOLED: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Approximate,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: Method,
}

fn validate(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("rank test sample"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "rank test sample",
        });
    }
    Ok(())
}

/// Pooled midranks (1-based) plus the tie-group sizes.
///
/// Consecutive sorted values closer than `tie_tolerance` join the same tie
/// group; with a tolerance of zero only exact equality ties.
fn pooled_midranks(x: &[f64], y: &[f64], tie_tolerance: f64) -> (Vec<f64>, Vec<usize>) {
    let n = x.len() + y.len();
    let mut order: Vec<(f64, usize)> = x.iter().chain(y).copied().zip(0..n).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut ranks = vec![0.0; n];
    let mut groups = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && order[end].0 - order[end - 1].0 <= tie_tolerance {
            end += 1;
        }
        // positions start..end share ranks start+1..=end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &(_, idx) in &order[start..end] {
            ranks[idx] = mid;
        }
        groups.push(end - start);
        start = end;
    }
    (ranks, groups)
}

/// Two-sided Mann-Whitney U test with the tie-corrected normal approximation
/// and a 0.5 continuity correction. Exact ties use midranks.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<RankTestResult> {
    mann_whitney_u_with_tolerance(x, y, 0.0)
}

/// As [`mann_whitney_u`], but values within `tie_tolerance` of their sorted
/// neighbour are treated as tied.
pub fn mann_whitney_u_with_tolerance(x: &[f64], y: &[f64], tie_tolerance: f64) -> Result<RankTestResult> {
    validate(x, y)?;
    if !(tie_tolerance >= 0.0) {
        return Err(Error::invalid("tie_tolerance", "must be non-negative"));
    }
    let k1 = x.len() as f64;
    let k2 = y.len() as f64;
    let n = k1 + k2;
    let (ranks, groups) = pooled_midranks(x, y, tie_tolerance);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u = k1 * k2 + k1 * (k1 + 1.0) / 2.0 - r1;

    let tie_term: f64 = groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = k1 * k2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p_value = if groups.len() <= 1 || variance <= 0.0 {
        1.0
    } else {
        let z = ((u - k1 * k2 / 2.0).abs() - 0.5) / variance.sqrt();
        // 2 * Phi(-z)
        erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
    };
    Ok(RankTestResult {
        u_statistic: u,
        p_value,
        method: Method::Approximate,
    })
}

/// Number of group assignments giving each pair count, for sizes `m` and
/// `n`: `counts[u]` arrangements have exactly `u` (x, y) pairs with x ranked
/// above y. Sum over `u` is `C(m + n, m)`.
fn arrangement_counts(m: usize, n: usize) -> Vec<u64> {
    // table[i][j] = distribution for i x-values and j y-values; the largest
    // pooled value is either an x (beating all j y-values) or a y.
    let mut table: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            let mut dist = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1;
            } else {
                for (u, &c) in table[i - 1][j].iter().enumerate() {
                    dist[u + j] += c;
                }
                for (u, &c) in table[i][j - 1].iter().enumerate() {
                    dist[u] += c;
                }
            }
            table[i][j] = dist;
        }
    }
    std::mem::take(&mut table[m][n])
}

/// Exact two-sided Mann-Whitney test by counting every assignment of the
/// pooled ranks to the two groups. Tie-free samples only, `k1 + k2 <= 16`.
pub fn mann_whitney_exact(x: &[f64], y: &[f64]) -> Result<RankTestResult> {
    validate(x, y)?;
    let pooled = x.len() + y.len();
    if pooled > EXACT_MAX_POOLED {
        return Err(Error::invalid(
            "sample sizes",
            format!("exact test supports at most {EXACT_MAX_POOLED} pooled values, got {pooled}"),
        ));
    }
    let (ranks, groups) = pooled_midranks(x, y, 0.0);
    if groups.iter().any(|&g| g > 1) {
        return Err(Error::invalid("samples", "exact test requires tie-free data"));
    }
    let k1 = x.len();
    let k2 = y.len();
    let r1: f64 = ranks[..k1].iter().sum();
    let u = (k1 * k2) as f64 + (k1 * (k1 + 1)) as f64 / 2.0 - r1;
    let u_int = u.round() as usize;
    let total = k1 * k2;
    let hi = u_int.max(total - u_int);
    let lo = u_int.min(total - u_int);

    let counts = arrangement_counts(k1, k2);
    let all: u64 = counts.iter().sum();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .map(|(v, &c)| {
            let mut hits = 0;
            if v >= hi {
                hits += c;
            }
            if v <= lo {
                hits += c;
            }
            hits
        })
        .sum();
    Ok(RankTestResult {
        u_statistic: u,
        p_value: (extreme as f64 / all as f64).min(1.0),
        method: Method::Exact,
    })
}
