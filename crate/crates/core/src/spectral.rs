//! Eigenvalue sequences of one-dimensional covariance operators: closed forms
//! for the Wiener kernels, Nyström discretization for everything else.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::GridDiscretization;
use crate::kernels::{nystrom_matrix, Kernel};
use crate::linalg::{symmetric_eigensolve, symmetric_top_eigenpairs, SymmetricEigen};
use crate::special::{compensated_sum, trigamma, CompensatedSum};

/// Default length of the listed part of a closed-form spectrum.
pub const DEFAULT_CLOSED_FORM_K_MAX: usize = 10_000;

/// Slack allowed when the listed eigenvalues add up to slightly more than
/// the trace.
const TRACE_SLACK: f64 = 1e-10;

/// Closed-form spectra whose eigenvalues, means and tails are available at
/// every index, not only the listed ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticTail {
    /// `λ_k = 1/(π²(k − ½)²)`.
    Wiener,
    /// `λ̄_k = 1/(π²k²)`.
    CenteredWiener,
}

impl AnalyticTail {
    /// Offset `a` in `λ_k = 1/(π²(k − a)²)`.
    fn offset(self) -> f64 {
        match self {
            AnalyticTail::Wiener => 0.5,
            AnalyticTail::CenteredWiener => 0.0,
        }
    }

    pub fn trace(self) -> f64 {
        match self {
            AnalyticTail::Wiener => 0.5,
            AnalyticTail::CenteredWiener => 1.0 / 6.0,
        }
    }

    /// `k`-th eigenvalue, `k ≥ 1`.
    pub fn eigenvalue(self, k: usize) -> f64 {
        let x = k as f64 - self.offset();
        1.0 / (PI * PI * x * x)
    }

    /// `∫ψ_k` for the unit eigenfunction `ψ_k`.
    pub fn mean(self, k: usize) -> f64 {
        match self {
            AnalyticTail::Wiener => SQRT_2 / ((k as f64 - 0.5) * PI),
            AnalyticTail::CenteredWiener => 0.0,
        }
    }

    /// `Σ_{k>n} λ_k = ψ'(n + 1 − a)/π²`.
    pub fn tail(self, n: usize) -> f64 {
        trigamma(n as f64 + 1.0 - self.offset()) / (PI * PI)
    }
}

/// Non-increasing eigenvalues with the operator trace and, optionally, the
/// eigenfunction means `c_k = ∫ψ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    trace: f64,
    means: Option<Vec<f64>>,
    analytic: Option<AnalyticTail>,
    /// `suffix[n] = Σ_{n < k ≤ len} λ_k`.
    suffix: Vec<f64>,
    /// Trace mass not covered by the listed eigenvalues.
    unlisted: f64,
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>, trace: f64, means: Option<Vec<f64>>) -> Result<Self> {
        if !trace.is_finite() || trace < 0.0 {
            return Err(Error::InvalidSpectrum(format!("trace {trace} must be finite and non-negative")));
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSpectrum(format!("eigenvalue {bad} must be finite and non-negative")));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpectrum("eigenvalues must be non-increasing".into()));
        }
        if let Some(m) = &means {
            if m.len() != eigenvalues.len() {
                return Err(Error::InvalidSpectrum(format!(
                    "{} means for {} eigenvalues",
                    m.len(),
                    eigenvalues.len()
                )));
            }
            if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidSpectrum(format!("mean {bad} is not finite")));
            }
        }
        let mut suffix = vec![0.0; eigenvalues.len() + 1];
        let mut acc = CompensatedSum::new();
        for (k, &v) in eigenvalues.iter().enumerate().rev() {
            acc.add(v);
            suffix[k] = acc.value();
        }
        let total = suffix[0];
        if total > trace + TRACE_SLACK * trace.max(1.0) {
            return Err(Error::InvalidSpectrum(format!(
                "listed eigenvalues sum to {total}, above the trace {trace}"
            )));
        }
        Ok(Self {
            eigenvalues,
            trace,
            means,
            analytic: None,
            suffix,
            unlisted: (trace - total).max(0.0),
        })
    }

    fn closed_form(form: AnalyticTail, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::Domain {
                name: "k_max",
                value: 0.0,
                domain: "positive integers",
            });
        }
        let eigenvalues = (1..=k_max).map(|k| form.eigenvalue(k)).collect();
        let means = (1..=k_max).map(|k| form.mean(k)).collect();
        let mut s = Self::new(eigenvalues, form.trace(), Some(means))?;
        s.analytic = Some(form);
        s.unlisted = form.tail(k_max);
        Ok(s)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn means(&self) -> Option<&[f64]> {
        self.means.as_deref()
    }

    pub fn analytic(&self) -> Option<AnalyticTail> {
        self.analytic
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Mass of the trace not covered by the listed eigenvalues.
    pub fn unlisted_mass(&self) -> f64 {
        self.unlisted
    }

    /// `k`-th eigenvalue (1-based); beyond the list only for analytic spectra.
    pub fn eigenvalue(&self, k: usize) -> Option<f64> {
        if k == 0 {
            return None;
        }
        match (self.eigenvalues.get(k - 1), self.analytic) {
            (Some(&v), _) => Some(v),
            (None, Some(form)) => Some(form.eigenvalue(k)),
            (None, None) => None,
        }
    }

    /// `Σ_{k>n} λ_k`: analytic when available, otherwise the trace minus the
    /// listed partial sum, floored at zero.
    pub fn tail(&self, n: usize) -> f64 {
        if let Some(form) = self.analytic {
            return form.tail(n);
        }
        match self.suffix.get(n) {
            Some(&listed) => self.unlisted + listed,
            None => self.unlisted,
        }
    }

    /// Whether `tail(n)` is exact rather than an upper bound.
    pub fn tail_is_exact(&self, n: usize) -> bool {
        self.analytic.is_some() || n <= self.len()
    }

    /// The listed part only, with the closed-form tail information dropped.
    pub fn listed_only(&self) -> Spectrum {
        let mut s = self.clone();
        s.analytic = None;
        s.unlisted = (s.trace - s.suffix[0]).max(0.0);
        s
    }

    /// Keeps the first `k` eigenvalues (and means).
    pub fn truncated(&self, k: usize) -> Spectrum {
        let k = k.min(self.len());
        let mut s = Spectrum::new(
            self.eigenvalues[..k].to_vec(),
            self.trace,
            self.means.as_ref().map(|m| m[..k].to_vec()),
        )
        .expect("a prefix of a valid spectrum is valid");
        if let Some(form) = self.analytic {
            s.analytic = Some(form);
            s.unlisted = form.tail(k);
        }
        s
    }
}

/// `Σ_{k>n} λ_k` of `s`.
pub fn tail_sum(s: &Spectrum, n: usize) -> f64 {
    s.tail(n)
}

/// `λ_k = 1/(π²(k − ½)²)`, trace `1/2`, means `√2/((k − ½)π)`.
pub fn wiener_spectrum(k_max: usize) -> Result<Spectrum> {
    Spectrum::closed_form(AnalyticTail::Wiener, k_max)
}

/// `λ̄_k = 1/(π²k²)`, trace `1/6`; the eigenfunctions `√2 cos(kπt)` have
/// zero mean.
pub fn centered_wiener_spectrum(k_max: usize) -> Result<Spectrum> {
    Spectrum::closed_form(AnalyticTail::CenteredWiener, k_max)
}

#[derive(Serialize, Deserialize)]
struct SpectrumRecord {
    eigenvalues: Vec<f64>,
    trace: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    means: Option<Vec<f64>>,
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SpectrumRecord {
            eigenvalues: self.eigenvalues.clone(),
            trace: self.trace,
            means: self.means.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = SpectrumRecord::deserialize(deserializer)?;
        Spectrum::new(r.eigenvalues, r.trace, r.means).map_err(serde::de::Error::custom)
    }
}

/// Nyström spectrum together with the grid eigenvectors it came from.
#[derive(Debug, Clone)]
pub struct NystromBasis {
    spectrum: Spectrum,
    grid: GridDiscretization,
    /// Unit eigenvectors of `W^{1/2} K W^{1/2}`, signed so that the means
    /// are non-negative.
    vectors: Vec<Vec<f64>>,
}

impl NystromBasis {
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn grid(&self) -> &GridDiscretization {
        &self.grid
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `ψ_k(x_i) = v_k[i]/√w_i`, normalized in the discrete `L₂` inner
    /// product of the grid.
    pub fn eigenfunction(&self, k: usize) -> Vec<f64> {
        self.vectors[k]
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v / w.sqrt())
            .collect()
    }
}

/// Top `k_max` eigenpairs of the Nyström matrix with eigenvalues clamped at
/// zero, trace `Σ w_i K(x_i, x_i)` and means `c_k = Σ √w_i v_k[i] ≥ 0`.
pub fn nystrom_basis(k: &Kernel, quad: &GridDiscretization, k_max: usize) -> Result<NystromBasis> {
    let n = quad.len();
    if k_max == 0 || k_max > n {
        return Err(Error::QuadratureTooSmall { required: k_max.max(1), got: n });
    }
    let a = nystrom_matrix(k, quad);
    let trace = quad.integrate(|s| k.eval(s, s));
    let eig: SymmetricEigen = if 4 * k_max <= n {
        symmetric_top_eigenpairs(&a, k_max)?
    } else {
        symmetric_eigensolve(&a)?
    };
    let r = quad.sqrt_weights();
    let (values, vectors) = eig.into_parts();
    let mut eigenvalues = Vec::with_capacity(k_max);
    let mut means = Vec::with_capacity(k_max);
    let mut kept = Vec::with_capacity(k_max);
    for (lambda, mut v) in values.into_iter().zip(vectors).take(k_max) {
        let mut c = compensated_sum(v.iter().zip(&r).map(|(x, ri)| x * ri));
        if c < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
            c = -c;
        }
        eigenvalues.push(lambda.max(0.0));
        means.push(c);
        kept.push(v);
    }
    let spectrum = Spectrum::new(eigenvalues, trace, Some(means))?;
    Ok(NystromBasis {
        spectrum,
        grid: quad.clone(),
        vectors: kept,
    })
}

pub fn nystrom_spectrum(k: &Kernel, quad: &GridDiscretization, k_max: usize) -> Result<Spectrum> {
    Ok(nystrom_basis(k, quad, k_max)?.spectrum)
}
