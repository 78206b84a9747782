//! Quadrature grids on `[0, 1]` and tensor indexing over `[0, 1]^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    Midpoint,
    GaussLegendre,
    Custom,
}

/// Quadrature nodes and weights on `[0, 1]`.
///
/// Nodes are strictly increasing, weights positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDiscretization {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rule: QuadratureRule,
}

impl GridDiscretization {
    /// Uniform midpoint (rectangle) rule with `n` cells.
    pub fn midpoint(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::QuadratureTooSmall { required: 1, got: 0 });
        }
        let h = 1.0 / n as f64;
        let nodes = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let weights = vec![h; n];
        Ok(Self {
            nodes,
            weights,
            rule: QuadratureRule::Midpoint,
        })
    }

    /// Gauss–Legendre rule with `n` nodes mapped to `[0, 1]`.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::QuadratureTooSmall { required: 1, got: 0 });
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // x runs from near +1 downward; map to [0, 1] ascending.
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.5;
        }
        Self::with_rule(nodes, weights, QuadratureRule::GaussLegendre)
    }

    /// Arbitrary nodes and weights, validated against the grid invariants.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::with_rule(nodes, weights, QuadratureRule::Custom)
    }

    fn with_rule(nodes: Vec<f64>, weights: Vec<f64>, rule: QuadratureRule) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::QuadratureTooSmall { required: 1, got: 0 });
        }
        if nodes.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidGrid("nodes must lie in [0, 1]".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidGrid("weights must be positive".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { nodes, weights, rule })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// `∫₀¹ f` by this rule, with compensated accumulation.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)))
    }

    /// `Σ w_i f_i` for values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        compensated_sum(values.iter().zip(&self.weights).map(|(f, w)| w * f))
    }

    /// Same rule with half as many nodes, used for discretization error
    /// estimates. Custom grids cannot be coarsened.
    pub fn coarsened(&self) -> Result<Self> {
        let n = self.len() / 2;
        match self.rule {
            QuadratureRule::Midpoint => Self::midpoint(n),
            QuadratureRule::GaussLegendre => Self::gauss_legendre(n),
            QuadratureRule::Custom => Err(Error::InvalidGrid(
                "a custom grid has no coarser companion".into(),
            )),
        }
    }

    /// Index of `t` if it is exactly one of the nodes.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        self.nodes
            .binary_search_by(|x| x.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Row-major multi-index over an `n^d` tensor grid; axis 0 varies slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorIndex {
    n: usize,
    d: usize,
}

impl TensorIndex {
    pub fn new(n: usize, d: usize) -> Self {
        Self { n, d }
    }

    pub fn axis_len(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Total number of grid points, or `None` on overflow.
    pub fn checked_len(&self) -> Option<usize> {
        (0..self.d).try_fold(1usize, |acc, _| acc.checked_mul(self.n))
    }

    pub fn len(&self) -> usize {
        self.checked_len().expect("tensor grid size overflows usize")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the per-axis indices of `flat` into `out` (length `d`).
    pub fn split(&self, mut flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.d);
        for slot in out.iter_mut().rev() {
            *slot = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        self.split(flat, &mut out);
        out
    }

    pub fn flatten(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.n + i)
    }
}
