//! Marginal covariance kernels on `[0, 1]²`, their centering, and the scalar
//! constants `λ̄₀ = ∬K`, `Λ = ∫K(s,s)`, `Λ̄ = Λ − λ̄₀`, `ε₀ = (Λ̄/Λ)^{1/2}`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridDiscretization;
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::special::{compensated_sum, CompensatedSum};
use crate::spectral::{centered_wiener_spectrum, wiener_spectrum, Spectrum};

/// Nyström matrices may carry negative eigenvalues down to this fraction of
/// the trace before the kernel is considered indefinite.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// `Λ̄` below this fraction of `Λ` is treated as exactly zero.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Kernels whose spectrum and constants are known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedForm {
    Wiener,
    CenteredWiener,
}

impl ClosedForm {
    pub fn spectrum(self, k_max: usize) -> Result<Spectrum> {
        match self {
            ClosedForm::Wiener => wiener_spectrum(k_max),
            ClosedForm::CenteredWiener => centered_wiener_spectrum(k_max),
        }
    }

    pub fn constants(self) -> KernelConstants {
        match self {
            ClosedForm::Wiener => KernelConstants::from_parts(1.0 / 3.0, 0.5),
            ClosedForm::CenteredWiener => KernelConstants::from_parts(0.0, 1.0 / 6.0),
        }
    }

    /// The closed form of the centered kernel `K̄`, whose spectrum is that of
    /// `X − ∫X`.
    pub fn centered(self) -> ClosedForm {
        ClosedForm::CenteredWiener
    }
}

type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Wiener,
    CenteredWiener,
    Constant(f64),
    Grid(Arc<GridKernel>),
    Centered(Arc<CenteredKernel>),
    Function(KernelFn),
}

/// A symmetric covariance function on `[0, 1]²`. Immutable once built.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    repr: Repr,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel").field("name", &self.name).finish_non_exhaustive()
    }
}

/// `K(t, s) = min(t, s)`.
pub fn wiener_kernel() -> Kernel {
    Kernel {
        name: "wiener".into(),
        repr: Repr::Wiener,
    }
}

/// `K(t, s) = min(t, s) + (t² + s²)/2 − t − s + 1/3`, the covariance of
/// `W(t) − ∫W`.
pub fn centered_wiener_kernel() -> Kernel {
    Kernel {
        name: "centered-wiener".into(),
        repr: Repr::CenteredWiener,
    }
}

impl Kernel {
    /// `K ≡ c`, the fully correlated case with `Λ̄ = 0`.
    pub fn constant(c: f64) -> Kernel {
        Kernel {
            name: format!("constant({c})"),
            repr: Repr::Constant(c),
        }
    }

    pub fn from_fn(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Kernel {
        Kernel {
            name: name.into(),
            repr: Repr::Function(Arc::new(f)),
        }
    }

    /// Kernel sampled on the uniform nodes `i/(n − 1)`, `i = 0..n`, and
    /// interpolated bilinearly. `values` is row-major `n × n`.
    pub fn from_grid_values(n: usize, values: Vec<f64>) -> Result<Kernel> {
        if n < 2 {
            return Err(Error::InvalidKernel(format!(
                "grid kernel needs at least 2 nodes per axis, got {n}"
            )));
        }
        if values.len() != n * n {
            return Err(Error::InvalidKernel(format!(
                "grid kernel with N = {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel(format!("non-finite grid value {bad}")));
        }
        let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (values[i * n + j] - values[j * n + i]).abs();
                if gap > 1e-12 * scale {
                    return Err(Error::InvalidKernel(format!(
                        "grid kernel is not symmetric at ({i}, {j}): gap {gap:e}"
                    )));
                }
            }
        }
        Ok(Kernel {
            name: format!("grid({n})"),
            repr: Repr::Grid(Arc::new(GridKernel { n, values })),
        })
    }

    /// Reads a grid kernel: the first token is `N`, followed by `N²`
    /// whitespace-separated values in row-major order.
    pub fn from_grid_file(path: impl AsRef<Path>) -> Result<Kernel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut kernel = Self::parse_grid(&text)?;
        kernel.name = format!("grid-file({})", path.display());
        Ok(kernel)
    }

    pub fn parse_grid(text: &str) -> Result<Kernel> {
        let mut tokens = text.split_whitespace();
        let header = tokens
            .next()
            .ok_or_else(|| Error::Parse("empty kernel grid file".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("kernel grid header {header:?} is not a node count")))?;
        let values = tokens
            .enumerate()
            .map(|(i, tok)| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("value #{} ({tok:?}) is not a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::from_grid_values(n, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn closed_form(&self) -> Option<ClosedForm> {
        match self.repr {
            Repr::Wiener => Some(ClosedForm::Wiener),
            Repr::CenteredWiener => Some(ClosedForm::CenteredWiener),
            _ => None,
        }
    }

    pub fn closed_form_spectrum(&self, k_max: usize) -> Option<Result<Spectrum>> {
        self.closed_form().map(|c| c.spectrum(k_max))
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match &self.repr {
            Repr::Wiener => t.min(s),
            Repr::CenteredWiener => t.min(s) + 0.5 * (t * t + s * s) - t - s + 1.0 / 3.0,
            Repr::Constant(c) => *c,
            Repr::Grid(g) => g.eval(t, s),
            Repr::Centered(c) => c.eval(t, s),
            Repr::Function(f) => f(t, s),
        }
    }

    /// `K(x_i, x_j)` over the grid nodes.
    pub fn grid_values(&self, quad: &GridDiscretization) -> Matrix {
        let x = quad.nodes();
        Matrix::symmetric_from_fn(x.len(), |i, j| self.eval(x[i], x[j]))
    }
}

struct GridKernel {
    n: usize,
    values: Vec<f64>,
}

impl GridKernel {
    fn locate(&self, t: f64) -> (usize, f64) {
        let h = (self.n - 1) as f64;
        let pos = (t.clamp(0.0, 1.0) * h).min(h);
        let i = (pos.floor() as usize).min(self.n - 2);
        (i, pos - i as f64)
    }

    fn eval(&self, t: f64, s: f64) -> f64 {
        let (i, a) = self.locate(t);
        let (j, b) = self.locate(s);
        let n = self.n;
        let v = |r: usize, c: usize| self.values[r * n + c];
        (1.0 - a) * ((1.0 - b) * v(i, j) + b * v(i, j + 1)) + a * ((1.0 - b) * v(i + 1, j) + b * v(i + 1, j + 1))
    }
}

struct CenteredKernel {
    base: Kernel,
    quad: GridDiscretization,
    /// `m(x_i) = ∫K(x_i, u)du` at the quadrature nodes.
    row_means: Vec<f64>,
    lambda0_bar: f64,
}

impl CenteredKernel {
    fn mean_at(&self, t: f64) -> f64 {
        match self.quad.node_index(t) {
            Some(i) => self.row_means[i],
            None => self.quad.integrate(|u| self.base.eval(t, u)),
        }
    }

    fn eval(&self, t: f64, s: f64) -> f64 {
        self.base.eval(t, s) - self.mean_at(t) - self.mean_at(s) + self.lambda0_bar
    }
}

/// `K̄(t,s) = K(t,s) − m(t) − m(s) + λ̄₀` with `m(t) = ∫K(t,u)du` and
/// `λ̄₀ = ∬K`, both by the supplied quadrature.
pub fn center_kernel(k: &Kernel, quad: &GridDiscretization) -> Result<Kernel> {
    if quad.len() < 2 {
        return Err(Error::QuadratureTooSmall {
            required: 2,
            got: quad.len(),
        });
    }
    let x = quad.nodes();
    let w = quad.weights();
    let row_means: Vec<f64> = x
        .iter()
        .map(|&t| compensated_sum(x.iter().zip(w).map(|(&u, &wu)| wu * k.eval(t, u))))
        .collect();
    let lambda0_bar = compensated_sum(row_means.iter().zip(w).map(|(m, wi)| m * wi));
    Ok(Kernel {
        name: format!("centered({})", k.name),
        repr: Repr::Centered(Arc::new(CenteredKernel {
            base: k.clone(),
            quad: quad.clone(),
            row_means,
            lambda0_bar,
        })),
    })
}

/// `λ̄₀`, `Λ`, `Λ̄` and `ε₀` of a marginal kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConstants {
    pub lambda0_bar: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "Lambda_bar")]
    pub lambda_bar: f64,
    pub eps0: f64,
    /// `Λ̄ = 0`: the summands are fully correlated with their averages and
    /// every complexity equals one.
    pub degenerate: bool,
}

impl KernelConstants {
    /// Builds the constants from `λ̄₀` and `Λ`; a `Λ̄` within
    /// [`DEGENERACY_TOLERANCE`] of zero is snapped to zero and flagged.
    pub fn from_parts(lambda0_bar: f64, lambda: f64) -> Self {
        let mut lambda_bar = lambda - lambda0_bar;
        let degenerate = lambda_bar <= DEGENERACY_TOLERANCE * lambda;
        if degenerate {
            lambda_bar = 0.0;
        }
        Self {
            lambda0_bar,
            lambda,
            lambda_bar,
            eps0: (lambda_bar / lambda).sqrt(),
            degenerate,
        }
    }
}

/// Constants of `k` by the closed form when the kernel declares one,
/// otherwise by quadrature on `quad`.
pub fn kernel_constants(k: &Kernel, quad: &GridDiscretization) -> Result<KernelConstants> {
    if let Some(closed) = k.closed_form() {
        return Ok(closed.constants());
    }
    quadrature_constants(k, quad)
}

/// Constants by quadrature only, ignoring any closed form.
pub fn quadrature_constants(k: &Kernel, quad: &GridDiscretization) -> Result<KernelConstants> {
    let x = quad.nodes();
    let w = quad.weights();
    let lambda = quad.integrate(|s| k.eval(s, s));
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidKernel(format!(
            "trace ∫K(s,s)ds = {lambda} must be positive"
        )));
    }
    let mut double = CompensatedSum::new();
    for (&t, &wt) in x.iter().zip(w) {
        let row = compensated_sum(x.iter().zip(w).map(|(&s, &ws)| ws * k.eval(t, s)));
        double.add(wt * row);
    }
    let lambda0_bar = double.value();
    if lambda - lambda0_bar < -DEGENERACY_TOLERANCE * lambda {
        return Err(Error::InvalidKernel(format!(
            "∬K = {lambda0_bar} exceeds the trace {lambda}; the kernel is not positive semidefinite"
        )));
    }
    Ok(KernelConstants::from_parts(lambda0_bar, lambda))
}

/// `A[i][j] = √w_i K(x_i, x_j) √w_j`.
pub fn nystrom_matrix(k: &Kernel, quad: &GridDiscretization) -> Matrix {
    let x = quad.nodes();
    let r = quad.sqrt_weights();
    Matrix::symmetric_from_fn(x.len(), |i, j| r[i] * k.eval(x[i], x[j]) * r[j])
}

/// Smallest Nyström eigenvalue on `quad`; fails if it lies below
/// `−PSD_TOLERANCE · trace`.
pub fn check_psd(k: &Kernel, quad: &GridDiscretization) -> Result<f64> {
    let a = nystrom_matrix(k, quad);
    let trace = a.trace();
    let values = symmetric_eigenvalues(&a)?;
    let min = values.last().copied().unwrap_or(0.0);
    if min < -PSD_TOLERANCE * trace.abs() {
        return Err(Error::InvalidKernel(format!(
            "Nyström matrix has eigenvalue {min:e} below −{PSD_TOLERANCE:e}·trace"
        )));
    }
    Ok(min)
}
