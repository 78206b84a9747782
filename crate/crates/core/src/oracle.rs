//! Brute-force checks on discretized additive fields `Y_d(t) = Σ_j X_j(t_j)`
//! over a tensor grid: complexity from the full spectrum, the split of that
//! spectrum between the symmetrized-average part `J̃_d` and the remainder
//! `Z̃_d`, their mutual orthogonality, and a rank-one secular computation of
//! the `J̃_d` spectrum.
//!
//! The `N^d × N^d` matrices have rank at most `dN`. With `e = √w` and
//! `U_a y = e ⊗ ⋯ ⊗ y ⊗ ⋯ ⊗ e` (`y` in slot `a`), the additive matrix is
//! `U B Uᵀ` with `B = diag(K̃, …, K̃)` and `K̃ = W^{1/2} K W^{1/2}`. Its
//! nonzero eigenvalues are those of `C^{1/2} B C^{1/2}` where
//! `C = UᵀU = I ⊗ (I − eeᵀ) + 𝟙𝟙ᵀ ⊗ eeᵀ`, so
//! `C^{1/2} = I ⊗ (I − eeᵀ) + d^{−1/2} 𝟙𝟙ᵀ ⊗ eeᵀ`. The same holds for `J̃_d`
//! with `B_J = d⁻¹ 𝟙𝟙ᵀ ⊗ K̃` and for `Z̃_d` with `B − B_J`. The dense
//! matrices are still built for small grids to cross-check this reduction.

use rayon::prelude::*;
use serde::Serialize;

use crate::complexity::{ComplexityAnswer, Method, THRESHOLD_SLACK};
use crate::error::{Error, Result};
use crate::grid::{GridDiscretization, TensorIndex};
use crate::kernels::{nystrom_matrix, Kernel};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::special::{compensated_sum, CompensatedSum};
use crate::spectral::Spectrum;

/// Largest number of summands the oracle accepts.
pub const MAX_D: usize = 3;

/// Feasibility cap on the number of tensor grid points `N^d`.
pub const MAX_GRID_POINTS: usize = 30_000;

/// Largest order for which the dense `N^d × N^d` matrices are materialized.
pub const DENSE_MAX_ORDER: usize = 4096;

/// Eigenvalues above this fraction of the trace count as significant.
pub const DEFAULT_SIGNIFICANCE: f64 = 1e-8;

/// Both orthogonality residuals must stay below this.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

/// Relative accuracy of the secular roots.
const SECULAR_TOLERANCE: f64 = 1e-13;

/// `d` copies of a marginal kernel discretized on a common per-axis grid.
#[derive(Debug, Clone)]
pub struct AdditiveFieldSpec {
    kernel: Kernel,
    d: usize,
    grid: GridDiscretization,
}

impl AdditiveFieldSpec {
    pub fn new(kernel: Kernel, d: usize, grid: GridDiscretization) -> Result<Self> {
        if d == 0 || d > MAX_D {
            return Err(Error::Size(format!("oracle supports 1 ≤ d ≤ {MAX_D}, got d = {d}")));
        }
        let points = TensorIndex::new(grid.len(), d).checked_len();
        match points {
            Some(p) if p <= MAX_GRID_POINTS => {}
            _ => {
                return Err(Error::Size(format!(
                    "N^d = {}^{d} exceeds the cap of {MAX_GRID_POINTS} grid points",
                    grid.len()
                )))
            }
        }
        Ok(Self { kernel, d, grid })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &GridDiscretization {
        &self.grid
    }

    fn tensor(&self) -> TensorIndex {
        TensorIndex::new(self.grid.len(), self.d)
    }

    /// `Σ_a ∫K(s,s)ds` by the grid rule, i.e. `d` times the marginal trace.
    pub fn trace(&self) -> f64 {
        self.d as f64 * self.grid.integrate(|s| self.kernel.eval(s, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Full,
    Average,
    Remainder,
}

/// Nonzero spectra through the `dN × dN` reduction.
struct Reduced {
    n: usize,
    d: usize,
    ktilde: Matrix,
    e: Vec<f64>,
}

impl Reduced {
    fn new(spec: &AdditiveFieldSpec) -> Self {
        Self {
            n: spec.grid.len(),
            d: spec.d,
            ktilde: nystrom_matrix(&spec.kernel, &spec.grid),
            e: spec.grid.sqrt_weights(),
        }
    }

    fn gram_sqrt(&self) -> Matrix {
        let (n, d) = (self.n, self.d);
        let scale = 1.0 / (d as f64).sqrt();
        Matrix::from_fn(d * n, |r, c| {
            let (a, i) = (r / n, r % n);
            let (b, j) = (c / n, c % n);
            let p = self.e[i] * self.e[j];
            let identity_part = if a == b { (if i == j { 1.0 } else { 0.0 }) - p } else { 0.0 };
            identity_part + scale * p
        })
    }

    fn block(&self, part: Part) -> Matrix {
        let (n, d) = (self.n, self.d);
        let df = d as f64;
        Matrix::from_fn(d * n, |r, c| {
            let (a, i) = (r / n, r % n);
            let (b, j) = (c / n, c % n);
            let k = self.ktilde[(i, j)];
            let diagonal = if a == b { k } else { 0.0 };
            match part {
                Part::Full => diagonal,
                Part::Average => k / df,
                Part::Remainder => diagonal - k / df,
            }
        })
    }

    fn matrix(&self, part: Part) -> Matrix {
        let s = self.gram_sqrt();
        let m = s.mul(&self.block(part)).mul(&s);
        let dim = m.dim();
        Matrix::symmetric_from_fn(dim, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    fn eigenvalues(&self, part: Part) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.matrix(part))
    }
}

fn dense(spec: &AdditiveFieldSpec, entry: impl Fn(&[usize], &[usize], &Matrix) -> f64 + Sync) -> Result<Matrix> {
    let tensor = spec.tensor();
    let rows = tensor.len();
    if rows > DENSE_MAX_ORDER {
        return Err(Error::Size(format!(
            "dense oracle matrix of order {rows} exceeds {DENSE_MAX_ORDER}; use the reduced spectra"
        )));
    }
    let kgrid = spec.kernel.grid_values(&spec.grid);
    let w = spec.grid.weights();
    let weight = |m: &[usize]| m.iter().map(|&i| w[i]).product::<f64>().sqrt();
    let multi: Vec<Vec<usize>> = (0..rows).map(|f| tensor.multi_index(f)).collect();
    let root: Vec<f64> = multi.iter().map(|m| weight(m)).collect();
    Ok(Matrix::symmetric_from_fn(rows, |i, j| {
        root[i] * entry(&multi[i], &multi[j], &kgrid) * root[j]
    }))
}

fn additive_entry(t: &[usize], s: &[usize], k: &Matrix) -> f64 {
    t.iter().zip(s).map(|(&a, &b)| k[(a, b)]).sum()
}

fn average_entry(t: &[usize], s: &[usize], k: &Matrix) -> f64 {
    let mut sum = 0.0;
    for &a in t {
        for &b in s {
            sum += k[(a, b)];
        }
    }
    sum / t.len() as f64
}

/// `√W_i [Σ_a K(x_{i_a}, x_{j_a})] √W_j` over the tensor grid with product
/// weights `W`.
pub fn additive_matrix(spec: &AdditiveFieldSpec) -> Result<Matrix> {
    dense(spec, additive_entry)
}

/// Discretized `K^{J̃}(t,s) = d⁻¹ Σ_l Σ_r K(t_l, s_r)`.
pub fn jtilde_matrix(spec: &AdditiveFieldSpec) -> Result<Matrix> {
    dense(spec, average_entry)
}

/// Discretized `K^{Z̃} = K^{Y} − K^{J̃}`.
pub fn ztilde_matrix(spec: &AdditiveFieldSpec) -> Result<Matrix> {
    dense(spec, |t, s, k| additive_entry(t, s, k) - average_entry(t, s, k))
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Nonzero part (at most `dN` values) of the spectrum of the additive
/// matrix, non-increasing. The remaining eigenvalues are zero.
pub fn additive_spectrum(spec: &AdditiveFieldSpec) -> Result<Vec<f64>> {
    Ok(sorted_desc(Reduced::new(spec).eigenvalues(Part::Full)?))
}

pub fn jtilde_spectrum(spec: &AdditiveFieldSpec) -> Result<Vec<f64>> {
    Ok(sorted_desc(Reduced::new(spec).eigenvalues(Part::Average)?))
}

pub fn ztilde_spectrum(spec: &AdditiveFieldSpec) -> Result<Vec<f64>> {
    Ok(sorted_desc(Reduced::new(spec).eigenvalues(Part::Remainder)?))
}

/// Nonzero spectrum of the discretized `J̃_d` from an `N × N` problem: it is
/// the spectrum of `G^{1/2} K̃ G^{1/2}` with `G = I + (d − 1)eeᵀ`.
pub fn jtilde_grid_spectrum(kernel: &Kernel, grid: &GridDiscretization, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::Domain {
            name: "d",
            value: 0.0,
            domain: "positive integers",
        });
    }
    let k = nystrom_matrix(kernel, grid);
    let e = grid.sqrt_weights();
    let n = grid.len();
    let c = (d as f64).sqrt() - 1.0;
    // G^{1/2} K̃ G^{1/2} = K̃ + c(e fᵀ + f eᵀ) + c²(eᵀf) eeᵀ with f = K̃e.
    let f = k.mul_vec(&e);
    let efe = compensated_sum(e.iter().zip(&f).map(|(a, b)| a * b));
    let m = Matrix::symmetric_from_fn(n, |i, j| {
        k[(i, j)] + c * (e[i] * f[j] + f[i] * e[j]) + c * c * efe * e[i] * e[j]
    });
    Ok(sorted_desc(symmetric_eigenvalues(&m)?))
}

/// Relative tails `r(n) = Σ_{k>n} μ_k / trace` for `n = 0..=len`.
fn relative_tails(values: &[f64], trace: f64) -> Vec<f64> {
    let mut tails = vec![0.0; values.len() + 1];
    let mut acc = CompensatedSum::new();
    for (k, v) in values.iter().enumerate().rev() {
        acc.add(v.max(0.0));
        tails[k] = acc.value() / trace;
    }
    tails
}

/// `min{n ≥ 1 : tail(n) ≤ ε² trace}` on the grid, as a point when the
/// grid and its half-resolution companion agree on the decision and as an
/// interval otherwise. The interval uses `|r_N(n) − r_{N/2}(n)|` as the
/// discretization error of the relative tail. Custom grids have no coarser
/// companion and always give a point.
pub fn oracle_complexity(spec: &AdditiveFieldSpec, eps: f64) -> Result<ComplexityAnswer> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(0, 1)",
        });
    }
    let trace = spec.trace();
    if !(trace > 0.0) {
        return Ok(ComplexityAnswer::trivial(spec.d, eps));
    }
    let fine = relative_tails(&additive_spectrum(spec)?, trace);
    let coarse = match spec.grid.coarsened() {
        Ok(grid) if !grid.is_empty() => {
            let coarse_spec = AdditiveFieldSpec::new(spec.kernel.clone(), spec.d, grid)?;
            Some(relative_tails(&additive_spectrum(&coarse_spec)?, coarse_spec.trace()))
        }
        _ => None,
    };
    let budget = eps * eps * (1.0 + THRESHOLD_SLACK);
    let delta = |n: usize| match &coarse {
        Some(c) => (fine[n] - c.get(n).copied().unwrap_or(0.0)).abs(),
        None => 0.0,
    };
    let first = |f: &dyn Fn(usize) -> f64| -> u64 {
        (1..fine.len())
            .find(|&n| f(n) <= budget)
            .unwrap_or(fine.len() - 1)
            .max(1) as u64
    };
    let lower = first(&|n| fine[n] - delta(n));
    let upper = first(&|n| fine[n] + delta(n));
    Ok(ComplexityAnswer {
        d: spec.d,
        epsilon: eps,
        lower,
        upper,
        value: (lower == upper).then_some(lower),
        method: Method::Oracle,
    })
}

/// Spectra of the discretized `Y_d`, `J̃_d` and `Z̃_d` and how well the
/// latter two reassemble the first.
#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub spectrum_y: Vec<f64>,
    pub spectrum_jtilde: Vec<f64>,
    pub spectrum_ztilde: Vec<f64>,
    pub union_defect: f64,
    pub trace: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Sorts both lists descending, pads the shorter with zeros and returns the
/// largest pointwise gap.
pub fn multiset_defect(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted_desc(a.to_vec());
    let b = sorted_desc(b.to_vec());
    (0..a.len().max(b.len()))
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Compares `spec(Y_d)` with `spec(J̃_d) ∪ spec(Z̃_d)` over eigenvalues above
/// `tol · trace`; passes when the defect is at most `10 · tol · trace`.
pub fn verify_union(spec: &AdditiveFieldSpec, tol: f64) -> Result<EigenReport> {
    let reduced = Reduced::new(spec);
    let trace = spec.trace();
    let cut = tol * trace;
    let significant = |v: Vec<f64>| -> Vec<f64> { sorted_desc(v).into_iter().filter(|&x| x > cut).collect() };
    let y = significant(reduced.eigenvalues(Part::Full)?);
    let j = significant(reduced.eigenvalues(Part::Average)?);
    let z = significant(reduced.eigenvalues(Part::Remainder)?);
    let merged: Vec<f64> = j.iter().chain(&z).copied().collect();
    let union_defect = multiset_defect(&y, &merged);
    Ok(EigenReport {
        passed: union_defect <= 10.0 * tol * trace,
        spectrum_y: y,
        spectrum_jtilde: j,
        spectrum_ztilde: z,
        union_defect,
        trace,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrthogonalityReport {
    /// `max |cov(J̃_d(t), Z̃_d(s))|` over grid points `t`, `s`.
    pub cross_covariance: f64,
    /// `max |∫K^{Z̃}(t,s)ds|` over grid points `t`.
    pub row_sum: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Grid-level check that `J̃_d` and `Z̃_d` are uncorrelated and that the
/// covariance of `Z̃_d` annihilates constants.
///
/// With `X = (X_1, …, X_d)` on the grid, covariance `I_d ⊗ K`, both fields
/// are linear in `X`: `J̃_d(t) = d⁻¹ Σ_j Σ_l X_j(t_l)` and
/// `Z̃_d(s) = Σ_j (X_j(s_j) − d⁻¹ Σ_k X_j(s_k))`. The cross-covariance is
/// assembled from those rows, the row sum from `K^{Y} − K^{J̃}` with the
/// product-weight rule.
pub fn verify_orthogonality(spec: &AdditiveFieldSpec) -> Result<OrthogonalityReport> {
    let tensor = spec.tensor();
    let points = tensor.len();
    let d = spec.d;
    let df = d as f64;
    let kgrid = spec.kernel.grid_values(&spec.grid);
    let w = spec.grid.weights();
    let multi: Vec<Vec<usize>> = (0..points).map(|f| tensor.multi_index(f)).collect();
    let weight: Vec<f64> = multi.iter().map(|m| m.iter().map(|&i| w[i]).product()).collect();

    let (cross, row) = (0..points)
        .into_par_iter()
        .map(|ti| {
            let t = &multi[ti];
            // rows[j][i] = cov(J̃_d(t), X_j(x_i)), identical for every j but
            // kept per coordinate as in the linear-map form.
            let rows: Vec<Vec<f64>> = (0..d)
                .map(|_| {
                    (0..spec.grid.len())
                        .map(|i| t.iter().map(|&tl| kgrid[(tl, i)]).sum::<f64>() / df)
                        .collect()
                })
                .collect();
            let mut worst_cross: f64 = 0.0;
            let mut row_sum = CompensatedSum::new();
            for (s, &ws) in multi.iter().zip(&weight) {
                let mut cov = 0.0;
                for (j, rj) in rows.iter().enumerate() {
                    let own = rj[s[j]];
                    let avg = s.iter().map(|&sk| rj[sk]).sum::<f64>() / df;
                    cov += own - avg;
                }
                worst_cross = worst_cross.max(cov.abs());
                row_sum.add(ws * (additive_entry(t, s, &kgrid) - average_entry(t, s, &kgrid)));
            }
            (worst_cross, row_sum.value().abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));

    Ok(OrthogonalityReport {
        cross_covariance: cross,
        row_sum: row,
        tolerance: ORTHOGONALITY_TOLERANCE,
        passed: cross <= ORTHOGONALITY_TOLERANCE && row <= ORTHOGONALITY_TOLERANCE,
    })
}

/// Top `k_max` eigenvalues of `diag(δ) + ρ zzᵀ` for `ρ ≥ 0` and
/// non-increasing `δ`.
///
/// Negligible `z_k` and repeated `δ_k` are deflated first; the remaining
/// roots of `1 + ρ Σ z_k²/(δ_k − μ) = 0` are bracketed by the interlacing
/// intervals `(δ_1, δ_1 + ρ‖z‖²]` and `(δ_i, δ_{i−1})` and found by
/// bisection with the origin shifted to the left pole.
pub fn rank_one_update_eigenvalues(delta: &[f64], z: &[f64], rho: f64, k_max: usize) -> Result<Vec<f64>> {
    assert_eq!(delta.len(), z.len());
    if delta.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidSpectrum("secular poles must be non-increasing".into()));
    }
    if rho < 0.0 {
        return Err(Error::Domain {
            name: "rho",
            value: rho,
            domain: "[0, ∞)",
        });
    }
    let mut poles: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut fixed: Vec<f64> = Vec::new();
    for (&dk, &zk) in delta.iter().zip(z) {
        let w = rho * zk * zk;
        if w <= f64::EPSILON * f64::EPSILON * dk.abs() || w == 0.0 {
            fixed.push(dk);
            continue;
        }
        match poles.last() {
            // Equal poles: rotate the weight into one of them, the other
            // eigenvalue stays put.
            Some(&last) if last - dk <= 4.0 * f64::EPSILON * last.abs() => {
                *weights.last_mut().expect("paired with a pole") += w;
                fixed.push(dk);
            }
            _ => {
                poles.push(dk);
                weights.push(w);
            }
        }
    }
    let total_weight = compensated_sum(weights.iter().copied());
    let mut roots = Vec::with_capacity(k_max.min(poles.len()));
    for i in 0..poles.len().min(k_max) {
        let origin = poles[i];
        let width = if i == 0 { total_weight } else { poles[i - 1] - origin };
        // Pole offsets relative to the shifted origin.
        let secular = |tau: f64| -> f64 {
            let mut acc = CompensatedSum::new();
            acc.add(1.0);
            for (&p, &w) in poles.iter().zip(&weights) {
                acc.add(w / ((p - origin) - tau));
            }
            acc.value()
        };
        let (mut lo, mut hi) = (0.0, width);
        if i == 0 {
            // f(δ_1 + ρ‖z‖²) ≥ 0 always; include the endpoint.
            if secular(hi) < 0.0 {
                return Err(Error::Bracketing {
                    lo: origin,
                    hi: origin + hi,
                });
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f = secular(mid);
            if !f.is_finite() {
                return Err(Error::Bracketing {
                    lo: origin + lo,
                    hi: origin + hi,
                });
            }
            if f < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= SECULAR_TOLERANCE * (origin + lo).abs() {
                break;
            }
        }
        roots.push(origin + 0.5 * (lo + hi));
    }
    let mut all: Vec<f64> = roots.into_iter().chain(fixed).collect();
    all.sort_by(|a, b| b.total_cmp(a));
    all.truncate(k_max);
    Ok(all)
}

/// Top `k_max` eigenvalues of `diag(λ) + (d − 1) vvᵀ`, `v_k = √λ_k c_k`,
/// which is the nonzero spectrum of `J̃_d` written in the basis
/// `e_k(t) = Σ_l ψ_k(t_l)`.
pub fn jtilde_secular_spectrum(s: &Spectrum, d: usize, k_max: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::Domain {
            name: "d",
            value: 0.0,
            domain: "positive integers",
        });
    }
    let means = s.means().ok_or(Error::MissingMeans)?;
    let v: Vec<f64> = s.eigenvalues().iter().zip(means).map(|(l, c)| l.sqrt() * c).collect();
    rank_one_update_eigenvalues(s.eigenvalues(), &v, (d - 1) as f64, k_max)
}

/// `(4 f − c)/3`, removing the `h²` term from paired fine/coarse values.
pub fn richardson(fine: &[f64], coarse: &[f64]) -> Vec<f64> {
    fine.iter().zip(coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}
