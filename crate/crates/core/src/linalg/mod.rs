//! Dense symmetric eigensolvers.
//!
//! Two independent routes: cyclic Jacobi rotations (the reference for small
//! problems) and Householder tridiagonalization followed by implicit QL,
//! which also serves the large Nyström matrices. For those, selected
//! eigenvectors come from inverse iteration on the tridiagonal form.

mod jacobi;
mod matrix;
mod tridiagonal;

pub use jacobi::SWEEP_BUDGET as JACOBI_SWEEP_BUDGET;
pub use matrix::Matrix;

use crate::error::{Error, Result};
use tridiagonal::{inverse_iteration, ql_implicit, Tridiagonal};

/// Largest order that [`symmetric_eigensolve`] hands to Jacobi by default.
pub const JACOBI_MAX_ORDER: usize = 96;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Jacobi,
    Householder,
}

/// Eigenvalues in non-increasing order with matching orthonormal vectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl SymmetricEigen {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unit eigenvector belonging to `values[k]`.
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k]
    }

    pub fn vector_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.vectors[k]
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<Vec<f64>>) {
        (self.values, self.vectors)
    }

    /// `V Λ Vᵀ` over the stored pairs.
    pub fn reconstruct(&self, n: usize) -> Matrix {
        let mut out = Matrix::zeros(n);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                let s = lambda * v[i];
                for (o, vj) in out.row_mut(i).iter_mut().zip(v) {
                    *o += s * vj;
                }
            }
        }
        out
    }

    fn sorted(values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        Self {
            values: order.iter().map(|&i| values[i]).collect(),
            vectors: order.iter().map(|&i| vectors[i].clone()).collect(),
        }
    }
}

pub fn check_symmetric(a: &Matrix) -> Result<()> {
    let asymmetry = a.max_asymmetry();
    if asymmetry > SYMMETRY_TOLERANCE * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Full eigendecomposition, Jacobi up to [`JACOBI_MAX_ORDER`], Householder–QL
/// beyond.
pub fn symmetric_eigensolve(a: &Matrix) -> Result<SymmetricEigen> {
    let method = if a.dim() <= JACOBI_MAX_ORDER {
        EigenMethod::Jacobi
    } else {
        EigenMethod::Householder
    };
    symmetric_eigensolve_with(a, method)
}

pub fn symmetric_eigensolve_with(a: &Matrix, method: EigenMethod) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.dim();
    match method {
        EigenMethod::Jacobi => {
            let (values, v) = jacobi::jacobi_eigen(a)?;
            let vectors = (0..n).map(|k| (0..n).map(|i| v[(i, k)]).collect()).collect();
            Ok(SymmetricEigen::sorted(values, vectors))
        }
        EigenMethod::Householder => {
            let tri = Tridiagonal::reduce(a);
            let mut rows = tri.q_transpose();
            let mut values = tri.diag.clone();
            ql_implicit(&mut values, &tri.off, Some(&mut rows))?;
            let vectors = (0..n).map(|k| rows.row(k).to_vec()).collect();
            Ok(SymmetricEigen::sorted(values, vectors))
        }
    }
}

/// All eigenvalues, non-increasing, without vectors.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let tri = Tridiagonal::reduce(a);
    let mut values = tri.diag.clone();
    ql_implicit(&mut values, &tri.off, None)?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// The `k` largest eigenpairs; vectors by inverse iteration on the
/// tridiagonal form, mapped back through the Householder reflectors.
pub fn symmetric_top_eigenpairs(a: &Matrix, k: usize) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.dim();
    let k = k.min(n);
    let tri = Tridiagonal::reduce(a);
    let mut values = tri.diag.clone();
    ql_implicit(&mut values, &tri.off, None)?;
    values.sort_by(|a, b| b.total_cmp(a));
    values.truncate(k);

    let scale = values
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let cluster_gap = 1e-3 * scale;
    let mut tri_vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, &mu) in values.iter().enumerate() {
        let neighbours: Vec<&[f64]> = (0..j)
            .filter(|&i| (values[i] - mu).abs() <= cluster_gap)
            .map(|i| tri_vectors[i].as_slice())
            .collect();
        let y = inverse_iteration(&tri.diag, &tri.off, mu, &neighbours);
        tri_vectors.push(y);
    }
    let vectors = tri_vectors
        .into_iter()
        .map(|mut y| {
            tri.apply_q(&mut y);
            y
        })
        .collect();
    Ok(SymmetricEigen { values, vectors })
}
