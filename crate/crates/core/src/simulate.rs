//! Monte Carlo checks of the second-moment identities for the averaged
//! decompositions, with the summands `X_j` sampled from a truncated
//! Karhunen–Loève expansion on a quadrature grid.
//!
//! Every `‖·‖²` over `[0, 1]^d` is reduced to single-axis quadratures of the
//! sampled paths. With `I_j = ∫X_j`, `J_d = Σ I_j`, `H_j = X_j − I_j` and
//! `S = Σ_j X_j`:
//!
//! - `J̃_d − J_d = d⁻¹ Σ_l G(t_l)` with `G = Σ_j H_j`, so
//!   `‖J_d − J̃_d‖² = d⁻¹ ∫G²` (the cross terms vanish since `∫G = 0`);
//! - `Z_d − Z̃_d = J̃_d − J_d`, the same variable;
//! - `‖Y_d‖² = Σ_j ∫X_j² + J_d² − Σ_j I_j²`;
//! - `⟨J̃_d, Y_d⟩ = d⁻¹(Σ_k ∫S X_k + (d − 1)J_d²)` and
//!   `‖J̃_d‖² = d⁻¹(∫S² + (d − 1)J_d²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridDiscretization;
use crate::kernels::{kernel_constants, Kernel, KernelConstants};
use crate::special::{compensated_sum, splitmix64};
use crate::spectral::{nystrom_basis, NystromBasis};

pub const DEFAULT_GRID_SIZE: usize = 256;
pub const DEFAULT_K_TRUNC: usize = 200;
/// Paths per independently seeded batch.
pub const BATCH_SIZE: usize = 256;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    basis: NystromBasis,
    d: usize,
    k_trunc: usize,
    n_paths: usize,
    seed: u64,
    full_constants: Option<KernelConstants>,
}

impl SimulationPlan {
    pub fn new(basis: NystromBasis, d: usize, k_trunc: usize, n_paths: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidPlan("d must be positive".into()));
        }
        if k_trunc == 0 || k_trunc > basis.len() {
            return Err(Error::InvalidPlan(format!(
                "k_trunc = {k_trunc} must lie in 1..={} (available eigenvectors)",
                basis.len()
            )));
        }
        if n_paths < 2 {
            return Err(Error::InvalidPlan(format!("n_paths = {n_paths} must be at least 2")));
        }
        Ok(Self {
            basis,
            d,
            k_trunc,
            n_paths,
            seed,
            full_constants: None,
        })
    }

    /// Plan on a midpoint grid of `grid_size` cells with the kernel's own
    /// constants kept for the truncation report.
    pub fn for_kernel(
        kernel: &Kernel,
        grid_size: usize,
        d: usize,
        k_trunc: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        let grid = GridDiscretization::midpoint(grid_size)?;
        if k_trunc == 0 || k_trunc > grid_size {
            return Err(Error::InvalidPlan(format!(
                "k_trunc = {k_trunc} must lie in 1..={grid_size} (grid size)"
            )));
        }
        let basis = nystrom_basis(kernel, &grid, k_trunc)?;
        let mut plan = Self::new(basis, d, k_trunc, n_paths, seed)?;
        plan.full_constants = Some(kernel_constants(kernel, &grid)?);
        Ok(plan)
    }

    pub fn basis(&self) -> &NystromBasis {
        &self.basis
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k_trunc(&self) -> usize {
        self.k_trunc
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `λ̄₀`, `Λ`, `Λ̄` of the sampled model: `Σ λ_k c_k²`, `Σ λ_k` and
    /// `Σ λ_k (1 − c_k²)` over `k ≤ k_trunc`.
    pub fn truncated_constants(&self) -> KernelConstants {
        let s = self.basis.spectrum();
        let lambdas = &s.eigenvalues()[..self.k_trunc];
        let means = s.means().expect("Nyström spectra carry means");
        let lambda = compensated_sum(lambdas.iter().copied());
        let lambda0_bar = compensated_sum(lambdas.iter().zip(means).map(|(l, c)| l * c * c));
        KernelConstants::from_parts(lambda0_bar, lambda)
    }

    fn batches(&self) -> usize {
        self.n_paths.div_ceil(BATCH_SIZE)
    }

    fn batch_seed(&self, b: usize) -> u64 {
        splitmix64(self.seed.wrapping_add((b as u64).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// `√λ_k ψ_k(x_i)` for `k ≤ k_trunc`.
    fn scaled_modes(&self) -> Vec<Vec<f64>> {
        let lambdas = self.basis.spectrum().eigenvalues();
        (0..self.k_trunc)
            .map(|k| {
                let root = lambdas[k].sqrt();
                self.basis.eigenfunction(k).into_iter().map(|p| root * p).collect()
            })
            .collect()
    }
}

/// Grid values of `X_1, …, X_d` for one path.
pub type PathSample = Vec<Vec<f64>>;

fn fill_batch(plan: &SimulationPlan, modes: &[Vec<f64>], b: usize, mut visit: impl FnMut(&PathSample)) {
    let n = plan.basis.grid().len();
    let start = b * BATCH_SIZE;
    let count = BATCH_SIZE.min(plan.n_paths - start);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.batch_seed(b));
    let mut path: PathSample = vec![vec![0.0; n]; plan.d];
    for _ in 0..count {
        for x in path.iter_mut() {
            x.iter_mut().for_each(|v| *v = 0.0);
            for mode in modes {
                let xi: f64 = rng.sample(StandardNormal);
                for (v, m) in x.iter_mut().zip(mode) {
                    *v += xi * m;
                }
            }
        }
        visit(&path);
    }
}

/// All sampled paths, in order. Holds `n_paths · d · N` values, so it is
/// meant for small plans; the estimators stream batches instead.
pub fn sample_paths(plan: &SimulationPlan) -> Vec<PathSample> {
    let modes = plan.scaled_modes();
    let mut out = Vec::with_capacity(plan.n_paths);
    for b in 0..plan.batches() {
        fill_batch(plan, &modes, b, |p| out.push(p.clone()));
    }
    out
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }

    fn std_error(&self) -> f64 {
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchStats {
    decomposition_error: Moments,
    norm_y: Moments,
    cross_max_abs: f64,
}

impl BatchStats {
    fn merge(self, other: BatchStats) -> BatchStats {
        BatchStats {
            decomposition_error: self.decomposition_error.merge(other.decomposition_error),
            norm_y: self.norm_y.merge(other.norm_y),
            cross_max_abs: self.cross_max_abs.max(other.cross_max_abs),
        }
    }
}

struct PathFunctionals {
    decomposition_error: f64,
    norm_y: f64,
    cross: f64,
}

fn functionals(grid: &GridDiscretization, path: &PathSample) -> PathFunctionals {
    let d = path.len() as f64;
    let n = grid.len();
    let integrals: Vec<f64> = path.iter().map(|x| grid.integrate_values(x)).collect();
    let squares: Vec<f64> = path
        .iter()
        .map(|x| grid.integrate_values(&x.iter().map(|v| v * v).collect::<Vec<_>>()))
        .collect();
    let j = compensated_sum(integrals.iter().copied());
    let sum_i2 = compensated_sum(integrals.iter().map(|i| i * i));

    let mut g = vec![0.0; n];
    let mut s = vec![0.0; n];
    for (x, &i) in path.iter().zip(&integrals) {
        for k in 0..n {
            g[k] += x[k] - i;
            s[k] += x[k];
        }
    }
    let g2: Vec<f64> = g.iter().map(|v| v * v).collect();
    let s2: Vec<f64> = s.iter().map(|v| v * v).collect();
    let s_int2 = grid.integrate_values(&s2);
    let s_dot_x = compensated_sum(path.iter().map(|x| {
        let prod: Vec<f64> = s.iter().zip(x).map(|(a, b)| a * b).collect();
        grid.integrate_values(&prod)
    }));
    let with_y = (s_dot_x + (d - 1.0) * j * j) / d;
    let jtilde_norm = (s_int2 + (d - 1.0) * j * j) / d;

    PathFunctionals {
        decomposition_error: grid.integrate_values(&g2) / d,
        norm_y: compensated_sum(squares.iter().copied()) + j * j - sum_i2,
        cross: with_y - jtilde_norm,
    }
}

fn accumulate(plan: &SimulationPlan) -> BatchStats {
    let modes = plan.scaled_modes();
    let grid = plan.basis.grid();
    let per_batch: Vec<BatchStats> = (0..plan.batches())
        .into_par_iter()
        .map(|b| {
            let mut stats = BatchStats::default();
            fill_batch(plan, &modes, b, |p| {
                let f = functionals(grid, p);
                stats.decomposition_error.push(f.decomposition_error);
                stats.norm_y.push(f.norm_y);
                stats.cross_max_abs = stats.cross_max_abs.max(f.cross.abs());
            });
            stats
        })
        .collect();
    per_batch.into_iter().fold(BatchStats::default(), BatchStats::merge)
}

/// A Monte Carlo mean set against its analytic value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub statistic: String,
    pub mean: f64,
    pub std_error: f64,
    pub target: f64,
    pub z_score: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl ErrorEstimate {
    fn from_moments(statistic: &str, m: Moments, scale: f64, target: f64, plan: &SimulationPlan) -> Self {
        let mean = m.mean * scale;
        let std_error = m.std_error() * scale;
        let gap = (mean - target).abs();
        let z_score = if std_error > 0.0 {
            gap / std_error
        } else if gap <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            statistic: statistic.to_string(),
            mean,
            std_error,
            target,
            z_score,
            n_paths: plan.n_paths,
            seed: plan.seed,
        }
    }
}

/// Difference between the sampled model's `Λ̄` and the kernel's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationGap {
    pub lambda_bar_full: f64,
    pub lambda_bar_truncated: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub d: usize,
    pub k_trunc: usize,
    pub constants: KernelConstants,
    /// `E‖J_d − J̃_d‖² = E‖Z_d − Z̃_d‖²` against `Λ̄`.
    pub decomposition_error: ErrorEstimate,
    /// `E‖J_d − J̃_d‖²/E‖J_d‖²` against `(Λ̄/λ̄₀)/d`; absent when `λ̄₀ = 0`.
    pub ratio_j: Option<ErrorEstimate>,
    /// `E‖Z_d − Z̃_d‖²/E‖Z_d‖²` against `1/d`; absent when `Λ̄ = 0`.
    pub ratio_z: Option<ErrorEstimate>,
    /// `E‖Y_d‖²` against `Λ d`.
    pub norm_y: ErrorEstimate,
    /// `⟨J̃_d, Z̃_d⟩` vanishes path by path; largest magnitude seen.
    pub cross_term_max_abs: f64,
    pub truncation: Option<TruncationGap>,
}

impl SimulationReport {
    pub fn estimates(&self) -> Vec<&ErrorEstimate> {
        let mut out = vec![&self.decomposition_error];
        out.extend(self.ratio_j.as_ref());
        out.extend(self.ratio_z.as_ref());
        out.push(&self.norm_y);
        out
    }
}

fn ratios(plan: &SimulationPlan, stats: &BatchStats, c: &KernelConstants) -> (Option<ErrorEstimate>, Option<ErrorEstimate>) {
    let d = plan.d as f64;
    let m = stats.decomposition_error;
    let ratio_j = (c.lambda0_bar > 0.0).then(|| {
        ErrorEstimate::from_moments("ratio_j", m, 1.0 / (c.lambda0_bar * d), c.lambda_bar / c.lambda0_bar / d, plan)
    });
    let ratio_z =
        (c.lambda_bar > 0.0).then(|| ErrorEstimate::from_moments("ratio_z", m, 1.0 / (c.lambda_bar * d), 1.0 / d, plan));
    (ratio_j, ratio_z)
}

pub fn run_simulation(plan: &SimulationPlan) -> SimulationReport {
    let stats = accumulate(plan);
    let c = plan.truncated_constants();
    let (ratio_j, ratio_z) = ratios(plan, &stats, &c);
    SimulationReport {
        d: plan.d,
        k_trunc: plan.k_trunc,
        constants: c,
        decomposition_error: ErrorEstimate::from_moments("decomposition_error", stats.decomposition_error, 1.0, c.lambda_bar, plan),
        ratio_j,
        ratio_z,
        norm_y: ErrorEstimate::from_moments("norm_y", stats.norm_y, 1.0, c.lambda * plan.d as f64, plan),
        cross_term_max_abs: stats.cross_max_abs,
        truncation: plan.full_constants.map(|full| TruncationGap {
            lambda_bar_full: full.lambda_bar,
            lambda_bar_truncated: c.lambda_bar,
            gap: full.lambda_bar - c.lambda_bar,
        }),
    }
}

/// `E‖J_d − J̃_d‖²` against the truncated `Λ̄`.
pub fn estimate_decomposition_error(plan: &SimulationPlan) -> ErrorEstimate {
    run_simulation(plan).decomposition_error
}

/// The two relative errors; each is `None` when its denominator vanishes.
pub fn estimate_relative_errors(plan: &SimulationPlan) -> (Option<ErrorEstimate>, Option<ErrorEstimate>) {
    let r = run_simulation(plan);
    (r.ratio_j, r.ratio_z)
}
