use super::Matrix;
use crate::error::{Error, Result};

pub const SWEEP_BUDGET: usize = 30;
const OFF_DIAGONAL_THRESHOLD: f64 = 1e-12;

/// Cyclic Jacobi rotations.
///
/// Returns unsorted eigenvalues and the rotation product whose columns are
/// the eigenvectors. Converged once the off-diagonal Frobenius norm drops
/// below `1e-12 · ‖A‖_F`.
pub(crate) fn jacobi_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.dim();
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let target = OFF_DIAGONAL_THRESHOLD * a.frobenius_norm();

    for _sweep in 0..SWEEP_BUDGET {
        let off = off_diagonal_norm(&a);
        if off <= target {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Entries below the rounding of both diagonals are dropped.
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s, t);
            }
        }
    }
    if off_diagonal_norm(&a) <= target {
        return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
    }
    Err(Error::NoConvergence {
        budget: SWEEP_BUDGET,
        unit: "Jacobi sweeps",
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.dim();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    sum.sqrt()
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = a.dim();
    let apq = a[(p, q)];
    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[(k, p)] = new_p;
        a[(p, k)] = new_p;
        a[(k, q)] = new_q;
        a[(q, k)] = new_q;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
