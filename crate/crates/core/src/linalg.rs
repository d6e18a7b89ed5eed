//! Dense symmetric eigen-solves and the helpers built on them.
//!
//! Every rank decision in the crate goes through [`zero_cutoff`], so that
//! "rank N-1" means the same thing for the susceptance matrix, the PTDF,
//! the topological matrix and the flow covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues at or below this are treated as exact zeros:
/// `dim * eps * max|lambda|`.
pub fn zero_cutoff(dim: usize, max_abs: f64) -> f64 {
    dim.max(1) as f64 * f64::EPSILON * max_abs
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    /// Unit eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn cutoff(&self) -> f64 {
        zero_cutoff(self.dim(), self.max_abs())
    }

    /// Number of eigenvalues above the shared zero cutoff.
    pub fn rank(&self) -> usize {
        let cut = self.cutoff();
        self.values.iter().filter(|v| **v > cut).count()
    }
}

pub fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes `m`, then decomposes it. Eigenvalues come back sorted
/// descending; ties keep the solver's order.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "symmetric eigendecomposition",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    check_finite(m, "symmetric eigendecomposition input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SymEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    check_finite(&vectors, "eigenvectors")?;
    Ok(SymEigen { values, vectors })
}

/// Moore-Penrose pseudoinverse of a symmetric matrix, dropping eigenvalues
/// below the shared cutoff.
pub fn pinv_sym(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m)?;
    Ok(spectral_map(&eig, |v, cut| {
        if v.abs() > cut {
            1.0 / v
        } else {
            0.0
        }
    }))
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues below
/// the cutoff (including negative round-off) are set to zero first.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m)?;
    Ok(spectral_map(
        &eig,
        |v, cut| if v > cut { v.sqrt() } else { 0.0 },
    ))
}

/// `V f(Lambda) V^T` for a scalar map `f(lambda, cutoff)`.
pub fn spectral_map(eig: &SymEigen, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    let cut = eig.cutoff();
    let n = eig.dim();
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let s = f(eig.values[j], cut);
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * eig.vectors.transpose()
}

/// Largest entrywise deviation of `Q^T Q` from the identity.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Angle in radians between the lines spanned by two nonzero vectors
/// (sign-insensitive).
pub fn line_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    let ua = a / na;
    let ub = b / nb;
    let c = ua.dot(&ub);
    // residual form stays accurate for tiny angles
    let resid = (&ub - &ua * c).norm();
    resid.atan2(c.abs())
}

/// Spectral norm distance between the orthogonal projectors onto the column
/// spans of `a` and `b` (columns assumed orthonormal). Equals the sine of the
/// largest principal angle.
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let pa = a * a.transpose();
    let pb = b * b.transpose();
    let diff = pa - pb;
    let eig = SymmetricEigen::new(diff);
    eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
