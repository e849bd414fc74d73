//! External clustering scores: predicted partition against ground truth.
//! Entropies are in nats.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Counts `n_ij` of (true class i, predicted cluster j). Classes and
/// clusters are numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub total: u64,
}

fn index_labels<L: Eq + Hash>(labels: &[L]) -> (Vec<usize>, usize) {
    let mut seen = HashMap::new();
    let idx = labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(l).or_insert(next)
        })
        .collect();
    (idx, seen.len())
}

impl ContingencyTable {
    pub fn new<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch {
                truth: truth.len(),
                pred: pred.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::EmptyInput("label sequences are empty"));
        }
        let (ti, nt) = index_labels(truth);
        let (pi, np) = index_labels(pred);
        let mut counts = vec![vec![0u64; np]; nt];
        for (&i, &j) in ti.iter().zip(&pi) {
            counts[i][j] += 1;
        }
        let rows = counts.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..np).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            rows,
            cols,
            total: truth.len() as u64,
        })
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().flatten().copied()
    }
}

fn entropy(counts: impl Iterator<Item = u64>, n: u64) -> f64 {
    let n = n as f64;
    -counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

impl ContingencyTable {
    /// `H(X)` of the true classes.
    pub fn truth_entropy(&self) -> f64 {
        entropy(self.rows.iter().copied(), self.total)
    }

    /// `H(Y)` of the predicted clusters.
    pub fn pred_entropy(&self) -> f64 {
        entropy(self.cols.iter().copied(), self.total)
    }

    pub fn joint_entropy(&self) -> f64 {
        entropy(self.cells(), self.total)
    }

    pub fn mutual_information(&self) -> f64 {
        (self.truth_entropy() + self.pred_entropy() - self.joint_entropy()).max(0.0)
    }

    /// `E[MI]` under random labelings with these marginals (hypergeometric
    /// model), summed exactly over every feasible cell count.
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.total;
        let nf = n as f64;
        let lf = |k: u64| ln_factorial(k);
        let mut emi = 0.0;
        for &a in &self.rows {
            for &b in &self.cols {
                let lo = (a + b).saturating_sub(n).max(1);
                let hi = a.min(b);
                let fixed = lf(a) + lf(b) + lf(n - a) + lf(n - b) - lf(n);
                for nij in lo..=hi {
                    let x = nij as f64;
                    let log_p = fixed - lf(nij) - lf(a - nij) - lf(b - nij) - lf(n + nij - a - b);
                    emi += x / nf * (nf * x / (a as f64 * b as f64)).ln() * log_p.exp();
                }
            }
        }
        emi
    }

    pub fn adjusted_mutual_information(&self) -> f64 {
        let mi = self.mutual_information();
        let emi = self.expected_mutual_information();
        let denom = self.truth_entropy().max(self.pred_entropy()) - emi;
        // only identical trivial partitions (one block, or all singletons)
        // reach a zero denominator
        if denom.abs() < 1e-12 {
            return 1.0;
        }
        (mi - emi) / denom
    }

    /// `Σ C(n_ij, 2)`, `Σ C(a_i, 2)`, `Σ C(b_j, 2)`, `C(N, 2)`.
    fn pair_sums(&self) -> (f64, f64, f64, f64) {
        let c2 = |k: u64| (k * k.saturating_sub(1) / 2) as f64;
        (
            self.cells().map(c2).sum(),
            self.rows.iter().copied().map(c2).sum(),
            self.cols.iter().copied().map(c2).sum(),
            c2(self.total),
        )
    }

    /// Fraction of element pairs on which both partitions agree.
    pub fn rand_index(&self) -> f64 {
        let (same_both, same_truth, same_pred, pairs) = self.pair_sums();
        if pairs == 0.0 {
            return 1.0;
        }
        let tn = pairs - same_truth - same_pred + same_both;
        (same_both + tn) / pairs
    }

    pub fn adjusted_rand_index(&self) -> f64 {
        let (same_both, same_truth, same_pred, pairs) = self.pair_sums();
        if pairs == 0.0 {
            return 1.0;
        }
        let expected = same_truth * same_pred / pairs;
        let max = 0.5 * (same_truth + same_pred);
        if (max - expected).abs() < 1e-12 {
            return 1.0;
        }
        (same_both - expected) / (max - expected)
    }

    /// `1 - H(X|Y) / H(X)`; 1 when every element has the same class.
    pub fn homogeneity(&self) -> f64 {
        let hx = self.truth_entropy();
        if hx == 0.0 {
            return 1.0;
        }
        let h_x_given_y = self.joint_entropy() - self.pred_entropy();
        (1.0 - h_x_given_y / hx).clamp(0.0, 1.0)
    }

    /// `1 - H(Y|X) / H(Y)`; 1 when there is a single cluster.
    pub fn completeness(&self) -> f64 {
        let hy = self.pred_entropy();
        if hy == 0.0 {
            return 1.0;
        }
        let h_y_given_x = self.joint_entropy() - self.truth_entropy();
        (1.0 - h_y_given_x / hy).clamp(0.0, 1.0)
    }
}

pub fn mutual_information<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<f64> {
    Ok(ContingencyTable::new(truth, pred)?.mutual_information())
}

pub fn adjusted_mutual_information<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<f64> {
    Ok(ContingencyTable::new(truth, pred)?.adjusted_mutual_information())
}

pub fn rand_index<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<f64> {
    Ok(ContingencyTable::new(truth, pred)?.rand_index())
}

pub fn adjusted_rand_index<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<f64> {
    Ok(ContingencyTable::new(truth, pred)?.adjusted_rand_index())
}

pub fn homogeneity<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<f64> {
    Ok(ContingencyTable::new(truth, pred)?.homogeneity())
}

pub fn completeness<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<f64> {
    Ok(ContingencyTable::new(truth, pred)?.completeness())
}

/// The six scores, serialized as the metrics report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub mutual_info: f64,
    pub adjusted_mutual_info: f64,
    pub rand: f64,
    pub adjusted_rand: f64,
    pub completeness: f64,
    pub homogeneity: f64,
}

pub fn score_all<T: Eq + Hash, P: Eq + Hash>(truth: &[T], pred: &[P]) -> Result<ClusterScores> {
    let t = ContingencyTable::new(truth, pred)?;
    Ok(ClusterScores {
        mutual_info: t.mutual_information(),
        adjusted_mutual_info: t.adjusted_mutual_information(),
        rand: t.rand_index(),
        adjusted_rand: t.adjusted_rand_index(),
        completeness: t.completeness(),
        homogeneity: t.homogeneity(),
    })
}
