//! Hessian locally linear embedding (Donoho & Grimes).
//!
//! For every point the local neighbourhood is centred and projected onto its
//! leading principal directions. A design matrix of constant, linear and
//! quadratic monomials in those tangent coordinates is orthonormalized; the
//! orthonormal quadratic columns estimate the local Hessian. Summing their
//! outer products over all neighbourhoods gives a symmetric PSD quadratic
//! form whose near-null space (minus the constant mode) holds the embedding.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HlleConfig {
    pub k_neighbors: usize,
    pub target_dim: usize,
    /// Eigenvalues below `null_space_tolerance * max eigenvalue` are
    /// counted as null; diagnostic only.
    pub null_space_tolerance: f64,
    /// Weight of the penalty on each neighbourhood's residual outside
    /// span{1, t, t^2}. With 20-point windows only about `n - k` distinct
    /// neighbourhoods exist, so the pure Hessian form has a large exactly
    /// degenerate null space; this small penalty picks the locally affine
    /// solution inside it. Zero gives the unregularized form.
    pub residual_weight: f64,
}

impl Default for HlleConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 8,
            target_dim: 1,
            null_space_tolerance: 1e-8,
            residual_weight: 1e-3,
        }
    }
}

impl HlleConfig {
    /// Smallest neighbourhood that supports the Hessian estimator basis:
    /// `1 + d + d(d+1)/2`.
    pub fn min_neighbors(target_dim: usize) -> usize {
        1 + target_dim + target_dim * (target_dim + 1) / 2
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.target_dim == 0 {
            return Err(Error::invalid("target_dim", "must be at least 1"));
        }
        if self.target_dim >= input_dim {
            return Err(Error::invalid(
                "target_dim",
                format!("must be below the input dimension {input_dim}"),
            ));
        }
        let min = Self::min_neighbors(self.target_dim);
        if self.k_neighbors < min {
            return Err(Error::invalid(
                "k_neighbors",
                format!("need at least {min} for target_dim {}", self.target_dim),
            ));
        }
        if !(self.null_space_tolerance >= 0.0) {
            return Err(Error::invalid("null_space_tolerance", "must be non-negative"));
        }
        if !(self.residual_weight >= 0.0 && self.residual_weight.is_finite()) {
            return Err(Error::invalid("residual_weight", "must be non-negative"));
        }
        Ok(())
    }
}

/// One-dimensional embedding coordinates, one per input point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding1D {
    pub coords: Vec<f64>,
    pub degenerate: bool,
    /// Number of eigenvalues of the Hessian form under the null-space
    /// tolerance. Two for a perfectly flat one-dimensional input.
    pub null_space_dim: usize,
}

impl Embedding1D {
    pub fn mean(&self) -> f64 {
        if self.coords.is_empty() {
            return 0.0;
        }
        self.coords.iter().sum::<f64>() / self.coords.len() as f64
    }
}

/// Embedding coordinates for arbitrary target dimension, stored per output
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub columns: Vec<Vec<f64>>,
    pub degenerate: bool,
    pub null_space_dim: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest neighbours of point `i` (excluding `i` itself) under the
/// Euclidean metric, nearest first. Ties go to the lower index.
pub fn knn<P: AsRef<[f64]>>(points: &[P], i: usize, k: usize) -> Result<Vec<usize>> {
    if i >= points.len() {
        return Err(Error::invalid("i", format!("index {i} out of range")));
    }
    if k >= points.len() {
        return Err(Error::invalid(
            "k",
            format!("k = {k} needs more than {} points", points.len()),
        ));
    }
    let origin = points[i].as_ref();
    let mut dist: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (squared_distance(origin, p.as_ref()), j))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dist.into_iter().take(k).map(|(_, j)| j).collect())
}

fn validate_points<P: AsRef<[f64]>>(points: &[P], cfg: &HlleConfig) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptyInput("hlle points"))?;
    let dim = first.as_ref().len();
    if points.iter().any(|p| p.as_ref().len() != dim) {
        return Err(Error::invalid("points", "inconsistent point dimensions"));
    }
    cfg.validate(dim)?;
    let required = cfg.k_neighbors + 1;
    if points.len() < required {
        return Err(Error::TooFewPoints {
            required,
            actual: points.len(),
        });
    }
    if points.iter().any(|p| p.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite { context: "hlle points" });
    }
    Ok(dim)
}

fn all_identical<P: AsRef<[f64]>>(points: &[P]) -> bool {
    let first = points[0].as_ref();
    let scale = points
        .iter()
        .flat_map(|p| p.as_ref().iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 16.0 * f64::EPSILON * scale;
    points
        .iter()
        .all(|p| p.as_ref().iter().zip(first).all(|(a, b)| (a - b).abs() <= tol))
}

/// Orthonormalize the columns of `m` in order (modified Gram-Schmidt with one
/// re-orthogonalization pass). Columns that vanish under projection come back
/// as `None`.
fn gram_schmidt(m: &DMatrix<f64>) -> Vec<Option<DVector<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::with_capacity(m.ncols());
    for c in 0..m.ncols() {
        let original = m.column(c).into_owned();
        let norm0 = original.norm();
        let mut v = original;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm0 > 0.0 && norm > 1e-10 * norm0 {
            v /= norm;
            basis.push(v.clone());
            out.push(Some(v));
        } else {
            out.push(None);
        }
    }
    out
}

/// The accumulated Hessian quadratic form over all neighbourhoods.
pub fn hessian_functional<P: AsRef<[f64]>>(points: &[P], cfg: &HlleConfig) -> Result<DMatrix<f64>> {
    let dim = validate_points(points, cfg)?;
    Ok(accumulate_hessian(points, dim, cfg))
}

fn accumulate_hessian<P: AsRef<[f64]>>(points: &[P], dim: usize, cfg: &HlleConfig) -> DMatrix<f64> {
    let n = points.len();
    let d = cfg.target_dim;
    let k = cfg.k_neighbors;
    let n_quad = d * (d + 1) / 2;
    let mut h = DMatrix::<f64>::zeros(n, n);

    for i in 0..n {
        let mut nbhd = Vec::with_capacity(k + 1);
        nbhd.push(i);
        nbhd.extend(knn(points, i, k).expect("validated neighbourhood size"));
        let m = nbhd.len();

        let mut centred = DMatrix::<f64>::zeros(m, dim);
        for (r, &j) in nbhd.iter().enumerate() {
            for (c, v) in points[j].as_ref().iter().enumerate() {
                centred[(r, c)] = *v;
            }
        }
        let mean = centred.row_mean();
        for mut row in centred.row_iter_mut() {
            row -= &mean;
        }

        // local principal directions, largest variance first
        let cov = centred.transpose() * &centred;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut tangent = DMatrix::<f64>::zeros(m, d);
        for (t, &e) in order.iter().take(d).enumerate() {
            let dir = eig.eigenvectors.column(e);
            tangent.set_column(t, &(&centred * dir));
        }

        let mut design = DMatrix::<f64>::zeros(m, 1 + d + n_quad);
        design.column_mut(0).fill(1.0);
        for t in 0..d {
            design.set_column(1 + t, &tangent.column(t));
        }
        let mut col = 1 + d;
        for a in 0..d {
            for b in a..d {
                let prod = tangent.column(a).component_mul(&tangent.column(b));
                design.set_column(col, &prod);
                col += 1;
            }
        }

        let ortho = gram_schmidt(&design);
        let mut local = DMatrix::<f64>::zeros(m, m);
        for w in ortho[1 + d..].iter().flatten() {
            local += w * w.transpose();
        }
        if cfg.residual_weight > 0.0 {
            let mut residual = DMatrix::<f64>::identity(m, m);
            for q in ortho.iter().flatten() {
                residual -= q * q.transpose();
            }
            local += residual * cfg.residual_weight;
        }
        for (r1, &j1) in nbhd.iter().enumerate() {
            for (r2, &j2) in nbhd.iter().enumerate() {
                h[(j1, j2)] += local[(r1, r2)];
            }
        }
    }
    // symmetrize away accumulated round-off
    let ht = h.transpose();
    (h + ht) * 0.5
}

/// Resolve the sign so the entry of largest magnitude is positive. Entries
/// within a relative 1e-9 of the maximum count as tied and the lowest index
/// among them decides.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .expect("maximum exists");
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Normalize to zero mean and unit (population) variance, then fix the sign.
/// Returns `false` when the vector has no spread.
fn normalize(v: &mut [f64]) -> bool {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= mean);
    let var = v.iter().map(|x| x * x).sum::<f64>() / n;
    if !(var > 1e-300) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return false;
    }
    let sd = var.sqrt();
    v.iter_mut().for_each(|x| *x /= sd);
    fix_sign(v);
    true
}

/// Embed `points` into `cfg.target_dim` dimensions.
pub fn hlle_embed_multi<P: AsRef<[f64]>>(points: &[P], cfg: &HlleConfig) -> Result<Embedding> {
    let dim = validate_points(points, cfg)?;
    let n = points.len();
    let d = cfg.target_dim;
    let degenerate = || Embedding {
        columns: vec![vec![0.0; n]; d],
        degenerate: true,
        null_space_dim: n,
    };
    if all_identical(points) {
        return Ok(degenerate());
    }

    let h = accumulate_hessian(points, dim, cfg);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda_max = eig.eigenvalues[order[n - 1]].max(0.0);
    let null_space_dim = order
        .iter()
        .filter(|&&j| eig.eigenvalues[j] <= cfg.null_space_tolerance * lambda_max)
        .count();

    // The d+1 smallest eigenvectors span the constant mode plus the
    // embedding; remove the constant component and keep the d strongest
    // remaining directions.
    let mut v = DMatrix::<f64>::zeros(n, d + 1);
    for (c, &j) in order.iter().take(d + 1).enumerate() {
        v.set_column(c, &eig.eigenvectors.column(j));
    }
    for mut col in v.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    // principal directions of the centred block from its small Gram matrix
    let gram = SymmetricEigen::new(v.transpose() * &v);
    let mut pc_order: Vec<usize> = (0..d + 1).collect();
    pc_order.sort_by(|&a, &b| gram.eigenvalues[b].total_cmp(&gram.eigenvalues[a]));
    if gram.eigenvalues[pc_order[0]] < 1e-24 {
        return Ok(degenerate());
    }

    let mut columns = Vec::with_capacity(d);
    for &s in pc_order.iter().take(d) {
        let mut c: Vec<f64> = (&v * gram.eigenvectors.column(s)).iter().copied().collect();
        if !normalize(&mut c) {
            return Ok(degenerate());
        }
        columns.push(c);
    }
    Ok(Embedding {
        columns,
        degenerate: false,
        null_space_dim,
    })
}

/// One-dimensional HLLE embedding. `cfg.target_dim` must be 1.
pub fn hlle_embed<P: AsRef<[f64]>>(points: &[P], cfg: &HlleConfig) -> Result<Embedding1D> {
    if cfg.target_dim != 1 {
        return Err(Error::invalid("target_dim", "hlle_embed produces one dimension"));
    }
    let e = hlle_embed_multi(points, cfg)?;
    Ok(Embedding1D {
        coords: e.columns.into_iter().next().unwrap_or_default(),
        degenerate: e.degenerate,
        null_space_dim: e.null_space_dim,
    })
}
