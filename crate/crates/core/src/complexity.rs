//! Average-case complexity of additive fields: the spectral distribution
//! function, `q(ε)`, the exact formula for the centered part, the two-sided
//! bounds for the full field and its large-`d` asymptotics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConstants;
use crate::spectral::{centered_wiener_spectrum, Spectrum};

/// Relative slack (times `Λ̄·d`) absorbed in tail-versus-threshold tests.
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Formula,
    DirectTail,
    Bounds,
    Oracle,
    Asymptotic,
    Trivial,
}

/// A complexity value or bracket for `n(ε)` of a `d`-term field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityAnswer {
    pub d: usize,
    pub epsilon: f64,
    pub lower: u64,
    pub upper: u64,
    pub value: Option<u64>,
    pub method: Method,
}

impl ComplexityAnswer {
    fn exact(d: usize, epsilon: f64, value: u64, method: Method) -> Self {
        Self {
            d,
            epsilon,
            lower: value,
            upper: value,
            value: Some(value),
            method,
        }
    }

    pub fn trivial(d: usize, epsilon: f64) -> Self {
        Self::exact(d, epsilon, 1, Method::Trivial)
    }

    pub fn contains(&self, n: u64) -> bool {
        self.lower <= n && n <= self.upper
    }
}

/// The step function `F(x) = Λ̄⁻¹ Σ λ̄_k 1(λ̄_k ≥ e^{−x})` over the listed
/// eigenvalues; equal eigenvalues share one jump.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCDF {
    jump_points: Vec<f64>,
    masses: Vec<f64>,
}

impl SpectralCDF {
    /// Increasing jump locations `x_k = −ln λ̄_k`.
    pub fn jump_points(&self) -> &[f64] {
        &self.jump_points
    }

    /// Cumulative masses `p_k` at the jumps.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.jump_points.partition_point(|&p| p <= x) {
            0 => 0.0,
            k => self.masses[k - 1],
        }
    }

    /// `inf{x : F(x) ≥ y}` for `y ∈ (0, 1)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::Domain {
                name: "y",
                value: y,
                domain: "(0, 1)",
            });
        }
        let k = self.masses.partition_point(|&p| p < y);
        match self.jump_points.get(k) {
            Some(&x) => Ok(x),
            None => Err(Error::InsufficientSpectrum {
                listed: self.jump_points.len(),
                tail_mass: 1.0 - self.masses.last().copied().unwrap_or(0.0),
                threshold: 1.0 - y,
            }),
        }
    }
}

pub fn build_cdf(s: &Spectrum) -> Result<SpectralCDF> {
    let trace = s.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let mut jump_points = Vec::new();
    let mut masses = Vec::new();
    let mut cumulative = 0.0;
    let mut last = f64::NAN;
    for &lambda in s.eigenvalues().iter().filter(|&&l| l > 0.0) {
        cumulative += lambda;
        let p = (cumulative / trace).min(1.0);
        if lambda == last {
            *masses.last_mut().expect("a jump precedes any tie") = p;
        } else {
            jump_points.push(-lambda.ln());
            masses.push(p);
            last = lambda;
        }
    }
    Ok(SpectralCDF { jump_points, masses })
}

pub fn cdf_inverse(f: &SpectralCDF, y: f64) -> Result<f64> {
    f.inverse(y)
}

/// Largest `k ≥ 0` with `tail(k) ≥ threshold`, for a strictly positive
/// threshold not above `tail(0)`.
fn last_index_at_or_above(s: &Spectrum, threshold: f64) -> Result<usize> {
    let hi = if s.analytic().is_some() {
        let mut hi = 1usize;
        while s.tail(hi) >= threshold {
            hi = hi.checked_mul(2).ok_or_else(|| Error::Precision("tail index overflow".into()))?;
        }
        hi
    } else {
        let listed = s.len();
        if s.tail(listed) >= threshold {
            return Err(Error::InsufficientSpectrum {
                listed,
                tail_mass: s.tail(listed),
                threshold,
            });
        }
        listed
    };
    // tail(lo) ≥ threshold > tail(hi)
    let (mut lo, mut hi) = (0usize, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if s.tail(mid) >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `Λ̄ ∫₀^{1 − r²} exp{F⁻¹(y)} dy` with `r = ε/ε₀`, evaluated exactly on the
/// step structure: `K + (tail(K) − r²Λ̄)/λ̄_{K+1}` where `K` is the number of
/// whole steps below `1 − r²`.
pub fn q_of_eps(s: &Spectrum, eps: f64, eps0: f64) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 <= 1.0) {
        return Err(Error::Domain {
            name: "eps0",
            value: eps0,
            domain: "(0, 1]",
        });
    }
    if !(eps > 0.0 && eps < eps0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(0, eps0)",
        });
    }
    let trace = s.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let r = eps / eps0;
    let threshold = r * r * trace;
    let k = last_index_at_or_above(s, threshold)?;
    let next = s.eigenvalue(k + 1).ok_or(Error::InsufficientSpectrum {
        listed: s.len(),
        tail_mass: s.unlisted_mass(),
        threshold,
    })?;
    Ok(k as f64 + (s.tail(k) - threshold) / next)
}

/// `n^{Z_d}(ε) =₁ ⌈d Λ̄ ∫₀^{1−ε²} exp{F⁻¹(y)} dy⌉`.
pub fn n_z_formula(d: usize, eps: f64, s_centered: &Spectrum) -> Result<ComplexityAnswer> {
    check_d(d)?;
    check_epsilon(eps)?;
    let integral = q_of_eps(s_centered, eps, 1.0)?;
    let lower = (d as f64 * integral).ceil() as u64;
    Ok(ComplexityAnswer {
        d,
        epsilon: eps,
        lower,
        upper: lower + 1,
        value: None,
        method: Method::Formula,
    })
}

/// Smallest `n` whose tail over the multiset `{λ̄_k, each d times}` is at
/// most `ε² d Λ̄`. The tail after `n = m d + r` items is
/// `d·tail(m + 1) + (d − r)·λ̄_{m+1}`.
pub fn n_z_direct(d: usize, eps: f64, s_centered: &Spectrum) -> Result<ComplexityAnswer> {
    check_d(d)?;
    check_epsilon(eps)?;
    let trace = s_centered.trace();
    if !(trace > 0.0) {
        return Ok(ComplexityAnswer::exact(d, eps, 1, Method::DirectTail));
    }
    let df = d as f64;
    let budget = eps * eps * df * trace + THRESHOLD_SLACK * trace * df;
    let fits = |m: usize| df * s_centered.tail(m) <= budget;

    // Smallest m* with d·tail(m*) within budget.
    let m_star = if s_centered.analytic().is_some() {
        let mut hi = 1usize;
        while !fits(hi) {
            hi = hi.checked_mul(2).ok_or_else(|| Error::Precision("tail index overflow".into()))?;
        }
        smallest_fitting(0, hi, &fits)
    } else {
        let listed = s_centered.len();
        if !fits(listed) {
            return Err(Error::Precision(format!(
                "the {listed} listed eigenvalues leave tail mass {:e} above the threshold {:e}; \
                 a longer spectrum (k_max > {listed}) is required",
                s_centered.tail(listed),
                budget / df
            )));
        }
        smallest_fitting(0, listed, &fits)
    };
    if m_star == 0 {
        return Ok(ComplexityAnswer::exact(d, eps, 1, Method::DirectTail));
    }
    // Within the block of copies of λ̄_{m*}: the first r that fits.
    let lambda = s_centered.eigenvalue(m_star).expect("m* is a resolved index");
    let base = df * s_centered.tail(m_star);
    let remaining = |r: usize| base + (d - r) as f64 * lambda;
    let mut r = if lambda > 0.0 {
        ((df - (budget - base) / lambda).ceil().max(0.0) as usize).min(d)
    } else {
        0
    };
    while r > 0 && remaining(r - 1) <= budget {
        r -= 1;
    }
    while r < d && remaining(r) > budget {
        r += 1;
    }
    let n = ((m_star - 1) * d + r).max(1) as u64;
    Ok(ComplexityAnswer::exact(d, eps, n, Method::DirectTail))
}

/// Smallest `m` in `(lo, hi]` with `fits(m)`, assuming `fits(hi)` and
/// monotonicity; returns `lo` itself when `fits(lo)`.
fn smallest_fitting(lo: usize, hi: usize, fits: &impl Fn(usize) -> bool) -> usize {
    if fits(lo) {
        return lo;
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `1` whenever `Λ̄ = 0` or `ε ≥ ε₀`; `None` when the complexity is not
/// trivial and bounds are needed.
pub fn n_y_point(d: usize, eps: f64, consts: &KernelConstants) -> Option<ComplexityAnswer> {
    if consts.degenerate || eps >= consts.eps0 {
        Some(ComplexityAnswer::trivial(d, eps))
    } else {
        None
    }
}

/// `n^{Z_d}(ε/ε₀ + d^{−1/2}) − 1 ≤ n^{Y_d}(ε) ≤ n^{Z_d}(ε/ε₀) + 1`, with the
/// lower bound replaced by `1` when its argument leaves `(0, 1)`.
pub fn n_y_bounds(
    d: usize,
    eps: f64,
    consts: &KernelConstants,
    s_centered: &Spectrum,
) -> Result<ComplexityAnswer> {
    check_d(d)?;
    check_epsilon(eps)?;
    if let Some(trivial) = n_y_point(d, eps, consts) {
        return Ok(trivial);
    }
    let r = eps / consts.eps0;
    let upper = n_z_value(d, r, s_centered)? + 1;
    let shifted = r + 1.0 / (d as f64).sqrt();
    let lower = if shifted < 1.0 {
        n_z_value(d, shifted, s_centered)?.saturating_sub(1).max(1)
    } else {
        1
    };
    Ok(ComplexityAnswer {
        d,
        epsilon: eps,
        lower,
        upper,
        value: None,
        method: Method::Bounds,
    })
}

fn n_z_value(d: usize, eps: f64, s: &Spectrum) -> Result<u64> {
    Ok(n_z_direct(d, eps, s)?.value.expect("direct answers carry a value"))
}

/// `d·q(ε)`, the leading term of `n^{Y_d}(ε)` as `d → ∞`.
pub fn n_y_asymptotic(d: usize, eps: f64, s_centered: &Spectrum, consts: &KernelConstants) -> Result<f64> {
    check_d(d)?;
    Ok(d as f64 * q_of_eps(s_centered, eps, consts.eps0)?)
}

/// `⌈q(ε)⌉ ≤ n^{X−I}(ε/ε₀) ≤ ⌈q(ε)⌉ + 1`.
pub fn q_identity_check(eps: f64, s_centered: &Spectrum, consts: &KernelConstants) -> Result<bool> {
    let q = q_of_eps(s_centered, eps, consts.eps0)?;
    let n = n_z_value(1, eps / consts.eps0, s_centered)?;
    let c = q.ceil() as u64;
    Ok(c <= n && n <= c + 1)
}

/// `q(ε)·π²ε²/2` for the Wiener field, which tends to one as `ε → 0`.
pub fn wiener_q_smalleps(eps: f64) -> Result<f64> {
    let eps0 = 3f64.powf(-0.5);
    let s = centered_wiener_spectrum(1)?;
    let q = q_of_eps(&s, eps, eps0)?;
    Ok(q * std::f64::consts::PI.powi(2) * eps * eps / 2.0)
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::Domain {
            name: "d",
            value: 0.0,
            domain: "positive integers",
        });
    }
    Ok(())
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(0, 1)",
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ClosedForm, KernelConstants};
    use crate::spectral::wiener_spectrum;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn centered() -> Spectrum {
        centered_wiener_spectrum(10_000).unwrap()
    }

    fn wiener_consts() -> KernelConstants {
        ClosedForm::Wiener.constants()
    }

    #[test]
    fn cdf_first_jump() {
        let f = build_cdf(&centered()).unwrap();
        assert!((f.jump_points()[0] - (PI * PI).ln()).abs() < 1e-14);
        assert!((f.masses()[0] - 6.0 / (PI * PI)).abs() < 1e-14);
        assert!((f.masses()[0] - 0.607_927_1).abs() < 1e-7);
        assert_eq!(f.eval(f.jump_points()[0] - 1e-9), 0.0);
    }

    #[test]
    fn single_atom_cdf() {
        let s = Spectrum::new(vec![0.25], 0.25, None).unwrap();
        let f = build_cdf(&s).unwrap();
        let x = -(0.25f64).ln();
        assert_eq!(f.eval(x - 1e-12), 0.0);
        assert_eq!(f.eval(x), 1.0);
        assert_eq!(f.eval(x + 5.0), 1.0);
    }

    #[test]
    fn ties_merge_into_one_jump() {
        let s = Spectrum::new(vec![0.3, 0.2, 0.2, 0.1], 1.0, None).unwrap();
        let f = build_cdf(&s).unwrap();
        assert_eq!(f.jump_points().len(), 3);
        assert!((f.masses()[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_trace_is_degenerate() {
        let s = Spectrum::new(vec![], 0.0, None).unwrap();
        assert!(matches!(build_cdf(&s), Err(Error::DegenerateSpectrum)));
    }

    #[test]
    fn cdf_inverse_examples() {
        let f = build_cdf(&centered()).unwrap();
        assert!((cdf_inverse(&f, 0.5).unwrap() - (PI * PI).ln()).abs() < 1e-14);
        assert!((cdf_inverse(&f, 0.7).unwrap() - (4.0 * PI * PI).ln()).abs() < 1e-14);
        let p1 = f.masses()[0];
        assert_eq!(cdf_inverse(&f, p1).unwrap(), f.jump_points()[0]);
        assert!(cdf_inverse(&f, 0.0).is_err());
        assert!(cdf_inverse(&f, 1.0).is_err());
    }

    #[test]
    fn q_at_point_three() {
        let eps0 = 3f64.powf(-0.5);
        let q = q_of_eps(&centered(), 0.3, eps0).unwrap();
        let p1 = 6.0 / (PI * PI);
        let expect = 1.0 + (1.0 / 6.0) * (0.73 - p1) / (1.0 / (4.0 * PI * PI));
        assert!((q - expect).abs() < 1e-12, "{q} vs {expect}");
        assert!((q - 1.8032).abs() < 1e-3);
    }

    #[test]
    fn q_below_first_mass_is_a_single_partial_step() {
        let s = centered();
        // T = 1 − r² = 0.5 < p₁.
        let q = q_of_eps(&s, 0.5f64.sqrt(), 1.0).unwrap();
        assert!((q - (1.0 / 6.0) * 0.5 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn q_vanishes_near_eps0() {
        let eps0 = 3f64.powf(-0.5);
        let q = q_of_eps(&centered(), eps0 * (1.0 - 1e-9), eps0).unwrap();
        assert!(q < 1e-6);
        assert!(q_of_eps(&centered(), eps0, eps0).is_err());
    }

    #[test]
    fn q_needs_a_long_enough_listed_spectrum() {
        let s = centered().truncated(3).listed_only();
        let err = q_of_eps(&s, 0.01, 1.0).unwrap_err();
        assert!(matches!(err, Error::InsufficientSpectrum { listed: 3, .. }));
        assert!(err.is_precision());
    }

    #[test]
    fn formula_examples() {
        let s = centered();
        let a = n_z_formula(2, 0.5, &s).unwrap();
        assert_eq!((a.lower, a.upper), (4, 5));
        assert_eq!(a.method, Method::Formula);
        let a = n_z_formula(1, 0.5, &s).unwrap();
        assert_eq!((a.lower, a.upper), (2, 3));
        let i = q_of_eps(&s, 0.5, 1.0).unwrap();
        assert!((i - 1.93481).abs() < 1e-4);
    }

    #[test]
    fn direct_examples() {
        let s = centered();
        assert_eq!(n_z_direct(1, 0.5, &s).unwrap().value, Some(2));
        assert_eq!(n_z_direct(2, 0.5, &s).unwrap().value, Some(4));
        assert_eq!(n_z_direct(7, 0.99, &s).unwrap().value, Some(1));
    }

    #[test]
    fn direct_on_listed_spectrum_matches_analytic() {
        let s = centered();
        let listed = s.listed_only();
        for d in [1, 3, 10] {
            for eps in [0.05, 0.2, 0.5, 0.9] {
                assert_eq!(n_z_direct(d, eps, &s).unwrap(), n_z_direct(d, eps, &listed).unwrap());
            }
        }
    }

    #[test]
    fn direct_reports_precision_error_for_short_lists() {
        let s = centered().truncated(5).listed_only();
        let err = n_z_direct(1, 0.01, &s).unwrap_err();
        assert!(err.is_precision());
        assert!(err.to_string().contains("k_max"));
    }

    #[test]
    fn direct_matches_materialized_multiset() {
        let s = centered();
        for d in 1..=6 {
            let mut items: Vec<f64> = Vec::new();
            for k in 1..=400 {
                for _ in 0..d {
                    items.push(s.eigenvalue(k).unwrap());
                }
            }
            for eps in [0.15, 0.3, 0.45, 0.6, 0.8] {
                let budget = eps * eps * d as f64 * s.trace();
                let total_tail = d as f64 * s.tail(400);
                let mut tail = total_tail + items.iter().sum::<f64>();
                let mut n = 0;
                while tail > budget {
                    tail -= items[n];
                    n += 1;
                }
                let got = n_z_direct(d, eps, &s).unwrap().value.unwrap();
                assert_eq!(got, (n as u64).max(1), "d={d}, eps={eps}");
            }
        }
    }

    #[test]
    fn formula_sandwich_on_a_grid() {
        let s = centered();
        for d in 1..=50 {
            for i in 0..50 {
                let eps = 0.05 + 0.9 * i as f64 / 49.0;
                let direct = n_z_direct(d, eps, &s).unwrap().value.unwrap();
                let formula = n_z_formula(d, eps, &s).unwrap();
                assert!(formula.contains(direct), "d={d} eps={eps}: {direct} vs {formula:?}");
            }
        }
    }

    #[test]
    fn direct_is_monotone() {
        let s = centered();
        for d in [1, 2, 5, 13] {
            let mut prev = u64::MAX;
            for i in 1..60 {
                let eps = i as f64 / 60.0;
                let n = n_z_direct(d, eps, &s).unwrap().value.unwrap();
                assert!(n <= prev);
                prev = n;
            }
        }
        for i in 1..20 {
            let eps = i as f64 / 20.0;
            let mut prev = 0;
            for d in 1..40 {
                let n = n_z_direct(d, eps, &s).unwrap().value.unwrap();
                assert!(n >= prev);
                prev = n;
            }
        }
    }

    #[test]
    fn point_answers() {
        let c = wiener_consts();
        assert_eq!(n_y_point(3, 0.6, &c).unwrap().value, Some(1));
        assert!(n_y_point(3, 0.3, &c).is_none());
        let flat = KernelConstants::from_parts(2.0, 2.0);
        assert_eq!(n_y_point(5, 0.01, &flat).unwrap().method, Method::Trivial);
    }

    #[test]
    fn bounds_for_wiener() {
        let s = centered();
        let c = wiener_consts();
        let b = n_y_bounds(100, 0.3, &c, &s).unwrap();
        let r = 0.3 / c.eps0;
        assert_eq!(b.upper, n_z_direct(100, r, &s).unwrap().value.unwrap() + 1);
        assert_eq!(b.lower, n_z_direct(100, r + 0.1, &s).unwrap().value.unwrap() - 1);
        let dq = n_y_asymptotic(100, 0.3, &s, &c).unwrap();
        assert!((dq - 180.3).abs() < 0.1);
        assert!(b.lower as f64 <= dq + 2.0 && dq - 2.0 <= b.upper as f64);
        assert!(b.lower <= b.upper);
        let one = n_y_bounds(1, 0.3, &c, &s).unwrap();
        assert_eq!(one.lower, 1);
        assert_eq!(n_y_bounds(4, 0.7, &c, &s).unwrap().method, Method::Trivial);
    }

    #[test]
    fn asymptotic_is_linear_in_d() {
        let s = centered();
        let c = wiener_consts();
        let one = n_y_asymptotic(1, 0.3, &s, &c).unwrap();
        let big = n_y_asymptotic(1_000_000, 0.3, &s, &c).unwrap();
        assert!((big / 1e6 - one).abs() < 1e-12);
        assert!((big - 1.8032e6).abs() < 1e3);
    }

    #[test]
    fn formula_over_asymptotic_tends_to_one() {
        let s = centered();
        let c = wiener_consts();
        let mut prev = f64::INFINITY;
        for d in [10, 100, 1000, 10_000] {
            let a = n_z_formula(d, 0.3 / c.eps0, &s).unwrap();
            let dq = n_y_asymptotic(d, 0.3, &s, &c).unwrap();
            let gap = (a.lower as f64 / dq - 1.0).abs();
            assert!(gap <= 1.0 / dq + 1e-12);
            assert!(gap <= prev + 1e-12);
            prev = gap;
        }
    }

    #[test]
    fn q_identity_examples() {
        let s = centered();
        let c = wiener_consts();
        assert!(q_identity_check(0.3, &s, &c).unwrap());
        let n = n_z_direct(1, 0.3 / c.eps0, &s).unwrap().value.unwrap();
        assert!(n == 2 || n == 3);
        assert!(q_identity_check(c.eps0 * 0.999_999, &s, &c).unwrap());
    }

    #[test]
    fn small_eps_law() {
        let r1 = wiener_q_smalleps(1e-1).unwrap();
        let r2 = wiener_q_smalleps(1e-2).unwrap();
        let r3 = wiener_q_smalleps(1e-3).unwrap();
        assert!((r2 - 1.0).abs() <= 0.05);
        assert!((r3 - 1.0).abs() <= 0.005);
        assert!((r1 - 1.0).abs() > (r2 - 1.0).abs() && (r2 - 1.0).abs() > (r3 - 1.0).abs());
        assert!(wiener_q_smalleps(0.6).is_err());
    }

    #[test]
    fn answers_serialize_with_stable_keys() {
        let a = n_z_direct(2, 0.5, &centered()).unwrap();
        let v: serde_json::Value = serde_json::to_value(a).unwrap();
        for key in ["d", "epsilon", "lower", "upper", "value", "method"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["method"], "direct_tail");
        let back: ComplexityAnswer = serde_json::from_value(v).unwrap();
        assert_eq!(back, a);
    }

    /// Adaptive Simpson on `exp{F⁻¹(y)}`, split at the jumps of `F` so each
    /// panel integrates a constant.
    fn quadrature_q(s: &Spectrum, t: f64) -> f64 {
        let f = build_cdf(s).unwrap();
        fn simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = (m - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + m)) + g(m));
            let right = (b - m) / 6.0 * (g(m) + 4.0 * g(0.5 * (m + b)) + g(b));
            if depth == 0 || (left + right - whole).abs() <= 1e-15 * whole.abs() {
                left + right
            } else {
                simpson(g, a, m, left, depth - 1) + simpson(g, m, b, right, depth - 1)
            }
        }
        let g = |y: f64| f.inverse(y).unwrap().exp();
        let mut edges = vec![0.0];
        edges.extend(f.masses().iter().copied().filter(|&p| p < t));
        edges.push(t);
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            // Nudge inside the panel so the left-closed jump is not sampled.
            let (a, b) = (a + (b - a) * 1e-12, b - (b - a) * 1e-12);
            let whole = (b - a) * g(0.5 * (a + b));
            total += simpson(&g, a, b, whole, 30) / (1.0 - 2e-12);
        }
        s.trace() * total
    }

    #[test]
    fn step_sum_matches_numeric_quadrature() {
        let s = centered().truncated(2000).listed_only();
        for eps in [0.2, 0.35, 0.5, 0.7, 0.9] {
            let exact = q_of_eps(&s, eps, 1.0).unwrap();
            let numeric = quadrature_q(&s, 1.0 - eps * eps);
            assert!(((exact - numeric) / exact).abs() < 1e-9, "eps={eps}: {exact} vs {numeric}");
        }
    }

    fn synthetic_spectrum() -> impl Strategy<Value = Spectrum> {
        (prop::collection::vec(0.01f64..1.0, 1..40), 0.0f64..0.5, 1usize..4).prop_map(
            |(raw, tail_share, repeat)| {
                let mut values: Vec<f64> = raw.iter().flat_map(|&v| std::iter::repeat_n(v, repeat)).collect();
                values.sort_by(|a, b| b.total_cmp(a));
                let listed: f64 = values.iter().sum();
                // Leave a little unlisted mass, always below the smallest
                // listed eigenvalue.
                let min = values.last().copied().unwrap();
                let trace = listed + tail_share * min;
                Spectrum::new(values, trace, None).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn q_identity_on_synthetic_spectra(s in synthetic_spectrum(), u in 0.05f64..0.95) {
            let eps0 = 1.0;
            let eps = u.max(s.unlisted_mass().sqrt() / s.trace().sqrt() * 1.01 + 1e-9).min(0.99);
            let consts = KernelConstants { lambda0_bar: 0.0, lambda: s.trace(), lambda_bar: s.trace(), eps0, degenerate: false };
            match q_identity_check(eps, &s, &consts) {
                Ok(ok) => prop_assert!(ok),
                Err(e) => prop_assert!(e.is_precision()),
            }
        }

        #[test]
        fn galois_inequalities(s in synthetic_spectrum(), y in 0.001f64..0.999) {
            let f = build_cdf(&s).unwrap();
            if let Ok(x) = f.inverse(y) {
                prop_assert!(f.eval(x) >= y);
            }
            for &x in f.jump_points() {
                let p = f.eval(x);
                if p < 1.0 {
                    prop_assert!(f.inverse(p).unwrap() <= x);
                }
            }
        }

        #[test]
        fn formula_sandwich_on_synthetic_spectra(s in synthetic_spectrum(), d in 1usize..30, eps in 0.05f64..0.95) {
            if let (Ok(direct), Ok(formula)) = (n_z_direct(d, eps, &s), n_z_formula(d, eps, &s)) {
                prop_assert!(formula.contains(direct.value.unwrap()), "{:?} {:?}", direct, formula);
            }
        }

        #[test]
        fn bounds_are_ordered(d in 1usize..200, u in 0.01f64..0.99) {
            let s = centered();
            let c = wiener_consts();
            let eps = u * c.eps0;
            let b = n_y_bounds(d, eps, &c, &s).unwrap();
            prop_assert!(b.lower <= b.upper);
        }
    }

    #[test]
    fn wiener_spectrum_is_not_centered() {
        // The uncentered spectrum has a different q; guards against mixing
        // the two up.
        let q_w = q_of_eps(&wiener_spectrum(10).unwrap(), 0.3, 3f64.powf(-0.5)).unwrap();
        let q_c = q_of_eps(&centered(), 0.3, 3f64.powf(-0.5)).unwrap();
        assert!((q_w - q_c).abs() > 0.1);
    }
}
