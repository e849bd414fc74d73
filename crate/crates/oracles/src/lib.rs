//! Slow, obviously-correct reference computations.
//!
//! Everything in here is written from the textbook definitions with
//! exhaustive enumeration where possible, and deliberately shares no code
//! with `hlle-fault`. Tests in that crate compare the fast implementations
//! against these.

use std::collections::BTreeMap;

/// Null distribution of the pair-count statistic `#{x_i > y_j}` for tie-free
/// samples of sizes `k1` and `k2`.
///
/// Entry `u` holds `P(U = u)`, for `u` in `0..=k1*k2`. The distribution is
/// symmetric, so it serves equally for the complementary convention
/// `k1*k2 - U`.
///
/// # Panics
///
/// Panics if `k1 + k2 > 16` or either size is zero.
pub fn exact_u_distribution(k1: usize, k2: usize) -> Vec<f64> {
    assert!(k1 >= 1 && k2 >= 1, "sample sizes must be positive");
    let n = k1 + k2;
    assert!(n <= 16, "enumeration bound exceeded");
    let mut counts = vec![0u64; k1 * k2 + 1];
    let mut total = 0u64;
    // Each k1-subset of pooled positions 0..n is one assignment of ranks
    // to the first sample.
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != k1 {
            continue;
        }
        // U = number of (x, y) pairs with x ranked above y.
        let mut u = 0usize;
        let mut ys_below = 0usize;
        for pos in 0..n {
            if mask & (1 << pos) != 0 {
                u += ys_below;
            } else {
                ys_below += 1;
            }
        }
        counts[u] += 1;
        total += 1;
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Pair-counting statistic `#{x_i > y_j} + 0.5 * #{x_i == y_j}`.
pub fn pair_count_u(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for &a in x {
        for &b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

/// Exact two-sided p-value for tie-free samples, by enumeration.
pub fn exact_two_sided_p(x: &[f64], y: &[f64]) -> f64 {
    let dist = exact_u_distribution(x.len(), y.len());
    let u = pair_count_u(x, y);
    let max_u = (x.len() * y.len()) as f64;
    let hi = u.max(max_u - u);
    let lo = u.min(max_u - u);
    let mut p = 0.0;
    for (value, mass) in dist.iter().enumerate() {
        let v = value as f64;
        if v >= hi - 1e-9 {
            p += mass;
        }
        if v <= lo + 1e-9 {
            p += mass;
        }
    }
    p.min(1.0)
}

/// Every set partition of `n` elements into at most `max_blocks` blocks, as
/// restricted growth strings (element 0 is always in block 0, and each new
/// block label is one more than the largest seen so far).
pub fn all_partitions(n: usize, max_blocks: usize) -> Vec<Vec<usize>> {
    fn extend(current: &mut Vec<usize>, n: usize, max_blocks: usize, used: usize, out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        let limit = (used + 1).min(max_blocks);
        for label in 0..limit {
            current.push(label);
            extend(current, n, max_blocks, used.max(label + 1), out);
            current.pop();
        }
    }
    assert!(n <= 8, "partition enumeration bound exceeded");
    let mut out = Vec::new();
    if n == 0 || max_blocks == 0 {
        return out;
    }
    extend(&mut Vec::with_capacity(n), n, max_blocks, 0, &mut out);
    out
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn finite_difference_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Indices of the `k` points nearest to `points[i]` (excluding `i`) by a
/// full sort of all squared distances. Ties go to the lower index.
pub fn brute_force_knn(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| {
            let s: f64 = p.iter().zip(&points[i]).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Responsibilities of a bivariate Gaussian mixture evaluated with the raw
/// density formula (explicit 2x2 inverse and determinant, no log-space).
pub fn naive_responsibilities_2d(
    weights: &[f64],
    means: &[[f64; 2]],
    covs: &[[[f64; 2]; 2]],
    points: &[[f64; 2]],
) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let dens: Vec<f64> = (0..weights.len())
                .map(|k| {
                    let c = covs[k];
                    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
                    let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
                    let dx = p[0] - means[k][0];
                    let dy = p[1] - means[k][1];
                    let q = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy);
                    weights[k] * (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
                })
                .collect();
            let total: f64 = dens.iter().sum();
            dens.iter().map(|d| d / total).collect()
        })
        .collect()
}

fn entropy_of_counts<K>(counts: &BTreeMap<K, usize>, n: usize) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

fn tally<K: Ord + Clone>(keys: impl Iterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Entropy (nats) of a labeling, straight from label frequencies.
pub fn entropy(labels: &[usize]) -> f64 {
    entropy_of_counts(&tally(labels.iter().copied()), labels.len())
}

/// Joint entropy (nats) of two labelings.
pub fn joint_entropy(a: &[usize], b: &[usize]) -> f64 {
    entropy_of_counts(&tally(a.iter().copied().zip(b.iter().copied())), a.len())
}

/// `MI(X, Y) = H(X) + H(Y) - H(X, Y)`.
pub fn mutual_information(truth: &[usize], pred: &[usize]) -> f64 {
    entropy(truth) + entropy(pred) - joint_entropy(truth, pred)
}

/// Rand index by looping over every unordered pair of elements.
pub fn rand_index(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len();
    if n < 2 {
        return 1.0;
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let same_t = truth[i] == truth[j];
            let same_p = pred[i] == pred[j];
            match (same_t, same_p) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
            }
        }
    }
    (tp + tn) as f64 / (tp + tn + fp + fn_) as f64
}

/// Visit every permutation of `items` (Heap's algorithm).
fn for_each_permutation(items: &mut [usize], mut visit: impl FnMut(&[usize])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Average of `score(truth, shuffled pred)` over every permutation of the
/// predicted labels. This is the expectation under the fixed-marginals
/// (permutation) null model.
pub fn permutation_expectation(truth: &[usize], pred: &[usize], score: impl Fn(&[usize], &[usize]) -> f64) -> f64 {
    assert!(pred.len() <= 8, "permutation enumeration bound exceeded");
    let mut items = pred.to_vec();
    let mut sum = 0.0;
    let mut count = 0u64;
    for_each_permutation(&mut items, |perm| {
        sum += score(truth, perm);
        count += 1;
    });
    sum / count as f64
}

/// `(RI - E[RI]) / (RI_max - E[RI])` with `RI_max = 1`, expectation by
/// enumeration. Identical partitions with a zero denominator score 1.
pub fn adjusted_rand_index(truth: &[usize], pred: &[usize]) -> f64 {
    let ri = rand_index(truth, pred);
    let expected = permutation_expectation(truth, pred, rand_index);
    let denom = (1.0 - expected).max(0.0);
    if denom.abs() < 1e-15 {
        return 1.0;
    }
    (ri - expected) / denom
}

/// `(MI - E[MI]) / (max(H(X), H(Y)) - E[MI])`, expectation by enumeration.
pub fn adjusted_mutual_information(truth: &[usize], pred: &[usize]) -> f64 {
    let mi = mutual_information(truth, pred);
    let expected = permutation_expectation(truth, pred, mutual_information);
    let denom = entropy(truth).max(entropy(pred)) - expected;
    if denom.abs() < 1e-12 {
        return 1.0;
    }
    (mi - expected) / denom
}

/// Conditional entropy `H(A | B)` from the joint and marginal tallies.
pub fn conditional_entropy(a: &[usize], b: &[usize]) -> f64 {
    joint_entropy(a, b) - entropy(b)
}

/// `1 - H(truth | pred) / H(truth)`; 1 when `H(truth) = 0`.
pub fn homogeneity(truth: &[usize], pred: &[usize]) -> f64 {
    let h = entropy(truth);
    if h == 0.0 {
        return 1.0;
    }
    1.0 - conditional_entropy(truth, pred) / h
}

/// `1 - H(pred | truth) / H(pred)`; 1 when `H(pred) = 0`.
pub fn completeness(truth: &[usize], pred: &[usize]) -> f64 {
    let h = entropy(pred);
    if h == 0.0 {
        return 1.0;
    }
    1.0 - conditional_entropy(pred, truth) / h
}
