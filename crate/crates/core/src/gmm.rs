//! Gaussian mixture fitted by expectation-maximization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    /// Number of components.
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub restarts: usize,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            k: 10,
            restarts: 5,
            tol: 1e-6,
            max_iters: 200,
            seed: 0,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("K", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts", "must be at least 1"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid("tol", "must be non-negative"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `d × d`.
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub components: Vec<Component>,
    /// Log-likelihood of the data the model was last evaluated on.
    pub log_likelihood: f64,
}

/// `w[i * k + t]` is the posterior probability that point `i` came from
/// component `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub n: usize,
    pub k: usize,
    pub w: Vec<f64>,
    /// Log-likelihood of the points under the model that produced `w`.
    pub log_likelihood: f64,
}

impl Responsibilities {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.k..(i + 1) * self.k]
    }

    /// Most probable component per point; ties go to the lower index.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (t, &v)| if v > best.1 { (t, v) } else { best },
                    )
                    .0
            })
            .collect()
    }
}

/// Outcome of [`fit`]: the best restart.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: GmmModel,
    pub labels: Vec<usize>,
    /// Log-likelihood at every E-step of the winning restart.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
    pub restart: usize,
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().map(Vec::len).ok_or(Error::EmptyInput("no points"))?;
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("points", "rows must share a positive length"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "mixture input",
        });
    }
    Ok(d)
}

/// Precomputed Cholesky factor and normalizer of one component density.
struct Density {
    log_weight: f64,
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    log_norm: f64,
}

impl Density {
    fn new(c: &Component) -> Result<Self> {
        let d = c.mean.len();
        let cov = DMatrix::from_fn(d, d, |r, s| c.covariance[r][s]);
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::invalid("covariance", "not positive definite"))?;
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            log_weight: c.weight.ln(),
            mean: DVector::from_column_slice(&c.mean),
            chol_l: l,
            log_norm: -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }

    /// `ln π_t + ln N(x | μ_t, Σ_t)`.
    fn log_joint(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        self.log_weight + self.log_norm - 0.5 * z.norm_squared()
    }
}

fn densities(model: &GmmModel, d: usize) -> Result<Vec<Density>> {
    if model.components.is_empty() {
        return Err(Error::invalid("model", "has no components"));
    }
    for c in &model.components {
        if c.mean.len() != d || c.covariance.len() != d || c.covariance.iter().any(|r| r.len() != d) {
            return Err(Error::invalid(
                "model",
                format!("component dimension differs from data dimension {d}"),
            ));
        }
    }
    model.components.iter().map(Density::new).collect()
}

/// Posterior responsibilities, evaluated in log space with log-sum-exp.
pub fn e_step(model: &GmmModel, points: &[Vec<f64>]) -> Result<Responsibilities> {
    let d = check_points(points)?;
    let dens = densities(model, d)?;
    let k = dens.len();
    let mut w = vec![0.0; points.len() * k];
    let row_ll: Vec<f64> = w
        .par_chunks_mut(k)
        .zip(points.par_iter())
        .map(|(row, x)| {
            for (v, de) in row.iter_mut().zip(&dens) {
                *v = de.log_joint(x);
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v = (*v - lse).exp());
            lse
        })
        .collect();
    Ok(Responsibilities {
        n: points.len(),
        k,
        w,
        log_likelihood: row_ll.iter().sum(),
    })
}

/// Total log-likelihood of `points` under `model`.
pub fn log_likelihood(model: &GmmModel, points: &[Vec<f64>]) -> Result<f64> {
    Ok(e_step(model, points)?.log_likelihood)
}

/// Weighted means, biased covariances and mixing weights, then a ridge of
/// `1e-6 · trace(Σ)/d + 1e-10` on each diagonal. Every column of `resp`
/// needs positive mass.
pub fn m_step(points: &[Vec<f64>], resp: &Responsibilities) -> Result<GmmModel> {
    let d = check_points(points)?;
    if resp.n != points.len() {
        return Err(Error::LengthMismatch {
            truth: points.len(),
            pred: resp.n,
        });
    }
    let n = points.len() as f64;
    let components = (0..resp.k)
        .map(|t| {
            let nk: f64 = (0..resp.n).map(|i| resp.w[i * resp.k + t]).sum();
            if !(nk > 0.0) {
                return Err(Error::invalid("responsibilities", format!("component {t} has no mass")));
            }
            let mut mean = vec![0.0; d];
            for (i, x) in points.iter().enumerate() {
                let wi = resp.w[i * resp.k + t];
                mean.iter_mut().zip(x).for_each(|(m, v)| *m += wi * v);
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut cov = vec![vec![0.0; d]; d];
            for (i, x) in points.iter().enumerate() {
                let wi = resp.w[i * resp.k + t];
                for r in 0..d {
                    for s in 0..=r {
                        cov[r][s] += wi * (x[r] - mean[r]) * (x[s] - mean[s]);
                    }
                }
            }
            for r in 0..d {
                for s in 0..=r {
                    cov[r][s] /= nk;
                    cov[s][r] = cov[r][s];
                }
            }
            let trace: f64 = (0..d).map(|r| cov[r][r]).sum();
            let ridge = 1e-6 * trace / d as f64 + 1e-10;
            (0..d).for_each(|r| cov[r][r] += ridge);
            Ok(Component {
                weight: nk / n,
                mean,
                covariance: cov,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GmmModel {
        components,
        log_likelihood: f64::NAN,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-means++ seeding: returns the indices of `k` distinct-as-possible centers.
fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut centers = vec![rng.random_range(0..n)];
    let mut best: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[centers[0]])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &b) in best.iter().enumerate() {
                if b > 0.0 && r < b {
                    pick = i;
                    break;
                }
                r -= b;
            }
            pick
        } else {
            (0..n).find(|i| !centers.contains(i)).unwrap_or(0)
        };
        centers.push(next);
        for (b, p) in best.iter_mut().zip(points) {
            *b = b.min(sq_dist(p, &points[next]));
        }
    }
    centers
}

/// Hard assignment to the nearest seed, ties to the lower seed.
fn initial_responsibilities(points: &[Vec<f64>], centers: &[usize]) -> Responsibilities {
    let k = centers.len();
    let mut w = vec![0.0; points.len() * k];
    for (i, p) in points.iter().enumerate() {
        let t = centers
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (t, &c)| {
                let dd = sq_dist(p, &points[c]);
                if dd < best.1 {
                    (t, dd)
                } else {
                    best
                }
            })
            .0;
        w[i * k + t] = 1.0;
    }
    Responsibilities {
        n: points.len(),
        k,
        w,
        log_likelihood: f64::NAN,
    }
}

/// Give each component with (numerically) no mass the point that the
/// current fit explains worst, one distinct point per empty component.
fn reseed_empty(resp: &mut Responsibilities, point_ll: &[f64]) {
    let (n, k) = (resp.n, resp.k);
    let mut taken = Vec::new();
    for t in 0..k {
        let mass: f64 = (0..n).map(|i| resp.w[i * k + t]).sum();
        if mass > 1e-10 {
            continue;
        }
        let worst = (0..n)
            .filter(|i| !taken.contains(i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if point_ll[b] <= point_ll[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = worst {
            taken.push(i);
            resp.w[i * k..(i + 1) * k].iter_mut().for_each(|v| *v = 0.0);
            resp.w[i * k + t] = 1.0;
        }
    }
}

fn point_log_likelihoods(model: &GmmModel, points: &[Vec<f64>]) -> Vec<f64> {
    let dens = match densities(model, points[0].len()) {
        Ok(d) => d,
        Err(_) => return vec![0.0; points.len()],
    };
    points
        .iter()
        .map(|x| {
            let v: Vec<f64> = dens.iter().map(|de| de.log_joint(x)).collect();
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            max + v.iter().map(|a| (a - max).exp()).sum::<f64>().ln()
        })
        .collect()
}

fn run_once(points: &[Vec<f64>], cfg: &GmmConfig, seed: u64) -> Result<(GmmModel, Responsibilities, Vec<f64>, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp(points, cfg.k, &mut rng);
    let mut resp = initial_responsibilities(points, &centers);
    let mut model = m_step(points, &resp)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        resp = e_step(&model, points)?;
        let ll = resp.log_likelihood;
        if !ll.is_finite() {
            return Err(Error::NonFinite {
                context: "mixture log-likelihood",
            });
        }
        model.log_likelihood = ll;
        if let Some(&prev) = trace.last() {
            trace.push(ll);
            if ll - prev < cfg.tol {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
        let before = resp.clone();
        reseed_empty(&mut resp, &point_log_likelihoods(&model, points));
        if resp != before {
            log::debug!("reseeded an empty mixture component");
        }
        model = m_step(points, &resp)?;
    }
    if !converged {
        resp = e_step(&model, points)?;
        model.log_likelihood = resp.log_likelihood;
    }
    Ok((model, resp, trace, converged))
}

/// Best of `cfg.restarts` EM runs from independent k-means++ seedings.
/// Restarts run in parallel; the highest final log-likelihood wins, ties to
/// the earlier restart.
pub fn fit(points: &[Vec<f64>], cfg: &GmmConfig) -> Result<GmmFit> {
    cfg.validate()?;
    check_points(points)?;
    if points.len() < cfg.k {
        return Err(Error::TooFewPoints {
            required: cfg.k,
            actual: points.len(),
        });
    }
    let runs: Vec<_> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_once(points, cfg, cfg.seed ^ (r as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)))
        .collect::<Result<_>>()?;
    let (restart, (model, resp, trace, converged)) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cur| {
            if cur.1 .0.log_likelihood > best.1 .0.log_likelihood {
                cur
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok(GmmFit {
        labels: resp.labels(),
        model,
        log_likelihood_trace: trace,
        converged,
        restart,
    })
}
