//! Exact t-distributed stochastic neighbor embedding.
//!
//! Affinities are computed over all pairs (O(N²) memory), which is fine for
//! the few thousand events a detection run produces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities below this are clamped before logs and gradients.
pub const PROB_FLOOR: f64 = 1e-12;

/// Gradient-descent step size. `Auto` uses N / 2 for N points, since the
/// gradient of each point shrinks as 1/N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Auto,
    Fixed(f64),
}

impl LearningRate {
    pub fn value(self, n: usize) -> f64 {
        match self {
            LearningRate::Auto => (n as f64 / 2.0).max(1.0),
            LearningRate::Fixed(v) => v,
        }
    }
}

impl Serialize for LearningRate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LearningRate::Auto => s.serialize_str("auto"),
            LearningRate::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LearningRate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(LearningRate::Fixed(v)),
            Raw::Text(t) if t == "auto" => Ok(LearningRate::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "learning_rate: expected a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

const BISECTION_ITERS: usize = 50;
const ENTROPY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    /// Upper bound; the effective value is `min(perplexity, (N - 1) / 3)`.
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: LearningRate,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    pub output_dim: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: LearningRate::Auto,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            output_dim: 2,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perplexity > 1.0 && self.perplexity.is_finite()) {
            return Err(Error::invalid("perplexity", "must be finite and above 1"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if let LearningRate::Fixed(v) = self.learning_rate {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("learning_rate", "must be positive"));
            }
        }
        if !(self.early_exaggeration >= 1.0 && self.early_exaggeration.is_finite()) {
            return Err(Error::invalid("early_exaggeration", "must be at least 1"));
        }
        for (name, m) in [
            ("momentum_initial", self.momentum_initial),
            ("momentum_final", self.momentum_final),
        ] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::invalid(name, "must lie in [0, 1)"));
            }
        }
        if self.output_dim == 0 {
            return Err(Error::invalid("output_dim", "must be at least 1"));
        }
        Ok(())
    }
}

/// Joint input-space probabilities `p_ij` (row-major N×N, zero diagonal)
/// plus the per-point conditionals they were symmetrized from.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities {
    pub n: usize,
    pub p: Vec<f64>,
    /// Row `i` holds `p_{j|i}`.
    pub conditional: Vec<f64>,
    /// Gaussian bandwidth chosen for each point.
    pub sigma: Vec<f64>,
    /// Perplexity after clamping.
    pub perplexity: f64,
}

impl Affinities {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn conditional(&self, i: usize, j: usize) -> f64 {
        self.conditional[i * self.n + j]
    }
}

/// Low-dimensional result. `coords[i]` is the image of input point `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLD {
    pub coords: Vec<Vec<f64>>,
    pub final_kl: f64,
    /// `(iteration, KL)` sampled every 50 iterations and at the end; values
    /// during early exaggeration are of the exaggerated objective.
    pub kl_history: Vec<(usize, f64)>,
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points.first().map(Vec::len).ok_or(Error::EmptyInput("no points"))?;
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points", "rows differ in length"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "t-SNE input" });
    }
    Ok(dim)
}

/// Per-dimension z-scores. Constant columns carry no neighbourhood
/// information and are removed; the indices of kept columns are returned.
pub fn standardize(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let dim = check_points(points)?;
    let n = points.len() as f64;
    let mut kept = Vec::new();
    let mut stats = Vec::new();
    for c in 0..dim {
        let mean = points.iter().map(|p| p[c]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 1e-12 * mean.abs().max(1.0) {
            kept.push(c);
            stats.push((mean, sd));
        } else {
            log::warn!("feature dimension {c} has zero variance and is dropped");
        }
    }
    let out = points
        .iter()
        .map(|p| kept.iter().zip(&stats).map(|(&c, (m, s))| (p[c] - m) / s).collect())
        .collect();
    Ok((out, kept))
}

fn squared_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
        }
    });
    d
}

/// Conditional row for one point at precision `beta`; returns the Shannon
/// entropy in bits. Distances are shifted by the row minimum so large
/// `beta` cannot underflow every weight.
fn conditional_row(d: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = d
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if j == i { 0.0 } else { (-(d[j] - min) * beta).exp() };
        sum += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            h -= *o * o.log2();
        }
    }
    h
}

/// Input-space affinities. Each bandwidth is found by bisection on the
/// precision so the conditional entropy equals `log2(perplexity)`.
pub fn conditional_affinities(points: &[Vec<f64>], perplexity: f64) -> Result<Affinities> {
    check_points(points)?;
    let n = points.len();
    if n < 3 {
        return Err(Error::TooFewPoints { required: 3, actual: n });
    }
    if !(perplexity > 0.0 && perplexity.is_finite()) {
        return Err(Error::invalid("perplexity", "must be positive"));
    }
    let perplexity = perplexity.min((n - 1) as f64 / 3.0).max(1.0);
    let target = perplexity.log2();
    let d = squared_distances(points);
    if d.iter().all(|&v| v == 0.0) {
        return Err(Error::IdenticalPoints);
    }

    let mut conditional = vec![0.0; n * n];
    let sigma: Vec<f64> = conditional
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let di = &d[i * n..(i + 1) * n];
            let spread: f64 = di.iter().sum::<f64>() / (n - 1) as f64;
            let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
            let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
            for _ in 0..BISECTION_ITERS {
                let h = conditional_row(di, i, beta, row);
                if (h - target).abs() < ENTROPY_TOL {
                    break;
                }
                if h > target {
                    lo = beta;
                    beta = if hi.is_finite() { (beta * hi).sqrt() } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = if lo > 0.0 { (beta * lo).sqrt() } else { beta / 2.0 };
                }
            }
            conditional_row(di, i, beta, row);
            (0.5 / beta).sqrt()
        })
        .collect();

    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) * scale;
        }
    }
    Ok(Affinities {
        n,
        p,
        conditional,
        sigma,
        perplexity,
    })
}

/// Student-t kernel weights `(1 + |y_i - y_j|²)^-1` with zero diagonal, and
/// their total.
fn kernel(y: &[f64], n: usize, dim: usize) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; n * n];
    let row_sums: Vec<f64> = w
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let yi = &y[i * dim..(i + 1) * dim];
            let mut s = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                if j != i {
                    let d2: f64 = yi
                        .iter()
                        .zip(&y[j * dim..(j + 1) * dim])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    *v = 1.0 / (1.0 + d2);
                    s += *v;
                }
            }
            s
        })
        .collect();
    let z = row_sums.iter().sum();
    (w, z)
}

/// Output-space joint probabilities `q_ij` for row-major coordinates.
pub fn low_dim_affinities(y: &[f64], dim: usize) -> Vec<f64> {
    let n = y.len() / dim;
    let (mut w, z) = kernel(y, n, dim);
    w.iter_mut().for_each(|v| *v /= z);
    w
}

fn cost_and_gradient(p: &Affinities, scale: f64, y: &[f64], dim: usize) -> (f64, Vec<f64>) {
    let n = p.n;
    let (w, z) = kernel(y, n, dim);
    let mut grad = vec![0.0; n * dim];
    let costs: Vec<f64> = grad
        .par_chunks_mut(dim)
        .enumerate()
        .map(|(i, g)| {
            let yi = &y[i * dim..(i + 1) * dim];
            let mut c = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let pij = (scale * p.p[i * n + j]).max(PROB_FLOOR);
                let wij = w[i * n + j];
                let qij = (wij / z).max(PROB_FLOOR);
                c += pij * (pij / qij).ln();
                let f = 4.0 * (pij - wij / z) * wij;
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk += f * (yi[k] - y[j * dim + k]);
                }
            }
            c
        })
        .collect();
    (costs.iter().sum(), grad)
}

/// KL divergence between `P` and the Student-t affinities of `y`
/// (row-major, `dim` columns), with its gradient in the same layout.
pub fn kl_and_gradient(p: &Affinities, y: &[f64], dim: usize) -> Result<(f64, Vec<f64>)> {
    if dim == 0 || y.len() != p.n * dim {
        return Err(Error::invalid(
            "y",
            format!("expected {} x {dim} coordinates, got {} values", p.n, y.len()),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "t-SNE coordinates",
        });
    }
    Ok(cost_and_gradient(p, 1.0, y, dim))
}

/// Standardize, compute affinities and run momentum gradient descent.
/// Deterministic for a given seed.
pub fn tsne_embed(points: &[Vec<f64>], cfg: &TsneConfig) -> Result<EmbeddingLD> {
    cfg.validate()?;
    check_points(points)?;
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            required: 3,
            actual: points.len(),
        });
    }
    let (z, kept) = standardize(points)?;
    if kept.is_empty() {
        return Err(Error::IdenticalPoints);
    }
    let p = conditional_affinities(&z, cfg.perplexity)?;
    let (n, dim) = (p.n, cfg.output_dim);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..n * dim).map(|_| normal.sample(&mut rng)).collect();
    let mut velocity = vec![0.0; n * dim];
    let mut history = Vec::new();
    let lr = cfg.learning_rate.value(n);

    for iter in 0..cfg.iterations {
        let exaggerating = iter < cfg.exaggeration_iters;
        let scale = if exaggerating { cfg.early_exaggeration } else { 1.0 };
        let momentum = if iter < cfg.momentum_switch_iter {
            cfg.momentum_initial
        } else {
            cfg.momentum_final
        };
        if iter == cfg.exaggeration_iters && iter > 0 {
            // momentum built up on the exaggerated objective overshoots the
            // true one
            velocity.iter_mut().for_each(|v| *v = 0.0);
        }
        let (cost, grad) = cost_and_gradient(&p, scale, &y, dim);
        if iter % 50 == 0 {
            history.push((iter, cost));
        }
        for k in 0..n * dim {
            velocity[k] = momentum * velocity[k] - lr * grad[k];
            y[k] += velocity[k];
        }
        for k in 0..dim {
            let mean = (0..n).map(|i| y[i * dim + k]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[i * dim + k] -= mean);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "t-SNE iteration",
            });
        }
    }
    let (final_kl, _) = cost_and_gradient(&p, 1.0, &y, dim);
    history.push((cfg.iterations, final_kl));
    Ok(EmbeddingLD {
        coords: y.chunks(dim).map(<[f64]>::to_vec).collect(),
        final_kl: final_kl.max(0.0),
        kl_history: history,
    })
}
