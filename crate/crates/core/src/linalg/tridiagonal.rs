//! Householder reduction to tridiagonal form, implicit QL iteration and
//! inverse iteration for selected eigenvectors.

use super::Matrix;
use crate::error::{Error, Result};

/// Per-eigenvalue iteration budget for the QL sweep.
const QL_ITERATION_BUDGET: usize = 30;

struct Reflector {
    v: Vec<f64>,
    beta: f64,
}

/// `A = Q T Qᵀ` with `Q = H₀ H₁ ⋯` stored as Householder reflectors.
pub(crate) struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[k]` couples rows `k` and `k + 1`.
    pub off: Vec<f64>,
    reflectors: Vec<Reflector>,
}

impl Tridiagonal {
    pub fn reduce(a: &Matrix) -> Self {
        let n = a.dim();
        let mut a = a.clone();
        let mut off = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut p = vec![0.0; n];

        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let v_start = k + 1;
            let mut v: Vec<f64> = (v_start..n).map(|i| a[(i, k)]).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                off[k] = 0.0;
                reflectors.push(Reflector { v, beta: 0.0 });
                continue;
            }
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            off[k] = alpha;
            if vnorm2 == 0.0 {
                reflectors.push(Reflector { v, beta: 0.0 });
                continue;
            }
            let beta = 2.0 / vnorm2;

            // p = β A₂₂ v
            let p = &mut p[..m];
            for (i, pi) in p.iter_mut().enumerate() {
                let row = &a.row(v_start + i)[v_start..];
                *pi = beta * row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
            }
            let kappa = 0.5 * beta * p.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
            // w = p − κ v, then A₂₂ −= v wᵀ + w vᵀ
            for (pi, vi) in p.iter_mut().zip(&v) {
                *pi -= kappa * vi;
            }
            let w = &*p;
            for i in 0..m {
                let vi = v[i];
                let wi = w[i];
                let row = &mut a.row_mut(v_start + i)[v_start..];
                for ((x, &vj), &wj) in row.iter_mut().zip(&v).zip(w) {
                    *x -= vi * wj + wi * vj;
                }
            }
            reflectors.push(Reflector { v, beta });
        }
        if n >= 2 {
            off[n - 2] = a[(n - 1, n - 2)];
        }
        let diag = (0..n).map(|i| a[(i, i)]).collect();
        Self {
            diag,
            off,
            reflectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Applies `Q` to `y` in place.
    pub fn apply_q(&self, y: &mut [f64]) {
        for (k, r) in self.reflectors.iter().enumerate().rev() {
            if r.beta == 0.0 {
                continue;
            }
            let tail = &mut y[k + 1..];
            let dot: f64 = r.v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
            let scale = r.beta * dot;
            for (t, vi) in tail.iter_mut().zip(&r.v) {
                *t -= scale * vi;
            }
        }
    }

    /// `Qᵀ`, i.e. the rows are the columns of `Q`.
    pub fn q_transpose(&self) -> Matrix {
        let n = self.dim();
        // Q = H₀(H₁(⋯ I)); build Q row-major, then transpose.
        let mut q = Matrix::identity(n);
        let mut acc = vec![0.0; n];
        for (k, r) in self.reflectors.iter().enumerate().rev() {
            if r.beta == 0.0 {
                continue;
            }
            acc.iter_mut().for_each(|x| *x = 0.0);
            for (i, vi) in r.v.iter().enumerate() {
                for (x, qij) in acc.iter_mut().zip(q.row(k + 1 + i)) {
                    *x += vi * qij;
                }
            }
            for (i, vi) in r.v.iter().enumerate() {
                let s = r.beta * vi;
                for (qij, x) in q.row_mut(k + 1 + i).iter_mut().zip(&acc) {
                    *qij -= s * x;
                }
            }
        }
        q.transpose()
    }
}

/// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
///
/// On return `diag` holds the (unsorted) eigenvalues. When `rows` is given
/// its rows are rotated alongside, so starting from `Qᵀ` they end up as the
/// eigenvectors of `Q T Qᵀ`.
pub(crate) fn ql_implicit(diag: &mut [f64], off: &[f64], mut rows: Option<&mut Matrix>) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let d = diag;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_ITERATION_BUDGET {
                    return Err(Error::NoConvergence {
                        budget: QL_ITERATION_BUDGET,
                        unit: "QL iterations per eigenvalue",
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = rows.as_deref_mut() {
                        rotate_rows(z, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn rotate_rows(z: &mut Matrix, i: usize, c: f64, s: f64) {
    let (lo, hi) = z.adjacent_rows_mut(i);
    for (zi, zj) in lo.iter_mut().zip(hi.iter_mut()) {
        let h = *zj;
        *zj = s * *zi + c * h;
        *zi = c * *zi - s * h;
    }
}

/// Eigenvector of the tridiagonal matrix for the eigenvalue `mu` by inverse
/// iteration, orthogonalized against `previous` (vectors of nearby
/// eigenvalues).
pub(crate) fn inverse_iteration(
    diag: &[f64],
    off: &[f64],
    mu: f64,
    previous: &[&[f64]],
) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![1.0];
    }
    let norm = diag
        .iter()
        .map(|x| x.abs())
        .chain(off.iter().map(|x| x.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let floor = f64::EPSILON * norm;
    let lu = TridiagonalLu::factor(diag, off, mu, floor);

    // Deterministic start vector with no special symmetry.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract())
        .collect();
    orthogonalize(&mut x, previous);
    normalize(&mut x);
    for _ in 0..4 {
        lu.solve(&mut x);
        orthogonalize(&mut x, previous);
        normalize(&mut x);
    }
    x
}

fn orthogonalize(x: &mut [f64], basis: &[&[f64]]) {
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = x.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
            for (xi, bi) in x.iter_mut().zip(b.iter()) {
                *xi -= dot * bi;
            }
        }
    }
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// LU factors of `T − μI` with partial pivoting (one extra superdiagonal).
struct TridiagonalLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: &[f64], mu: f64, floor: f64) -> Self {
        let n = diag.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let mut cur_b = diag[0] - mu;
        let mut cur_c = if n > 1 { off[0] } else { 0.0 };
        for i in 0..n - 1 {
            let a_next = off[i];
            let b_next = diag[i + 1] - mu;
            let c_next = if i + 1 < n - 1 { off[i + 1] } else { 0.0 };
            if cur_b.abs() >= a_next.abs() {
                let pivot = if cur_b == 0.0 { floor } else { cur_b };
                let l = a_next / pivot;
                u0[i] = pivot;
                u1[i] = cur_c;
                u2[i] = 0.0;
                mult[i] = l;
                cur_b = b_next - l * cur_c;
                cur_c = c_next;
            } else {
                let l = cur_b / a_next;
                u0[i] = a_next;
                u1[i] = b_next;
                u2[i] = c_next;
                mult[i] = l;
                swapped[i] = true;
                cur_b = cur_c - l * b_next;
                cur_c = -l * c_next;
            }
        }
        u0[n - 1] = if cur_b.abs() < floor { floor.copysign(cur_b) } else { cur_b };
        for u in u0.iter_mut() {
            if u.abs() < floor {
                *u = if *u < 0.0 { -floor } else { floor };
            }
        }
        Self {
            u0,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve(&self, y: &mut [f64]) {
        let n = self.u0.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.mult[i] * y[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * y[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * y[i + 2];
            }
            y[i] = s / self.u0[i];
        }
    }
}
