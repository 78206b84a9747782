use std::f64::consts::PI;

use proptest::prelude::*;

use additive_complexity::complexity::{n_y_bounds, n_z_direct, n_z_formula};
use additive_complexity::grid::GridDiscretization;
use additive_complexity::kernels::{kernel_constants, wiener_kernel, Kernel};
use additive_complexity::oracle::{
    additive_spectrum, jtilde_spectrum, verify_orthogonality, verify_union, ztilde_spectrum, AdditiveFieldSpec,
    DEFAULT_SIGNIFICANCE,
};
use additive_complexity::simulate::{run_simulation, SimulationPlan};
use additive_complexity::spectral::{nystrom_spectrum, Spectrum};

fn midpoint(n: usize) -> GridDiscretization {
    GridDiscretization::midpoint(n).unwrap()
}

/// `a·min(t,s) + b·exp(−|t−s|/ℓ) + c`, positive semidefinite for
/// non-negative coefficients.
fn mixture(a: f64, b: f64, ell: f64, c: f64) -> Kernel {
    Kernel::from_fn("mixture", move |t, s| a * t.min(s) + b * (-(t - s).abs() / ell).exp() + c)
}

#[test]
fn nystrom_top_nine_settle_between_one_and_two_thousand_nodes() {
    let coarse = nystrom_spectrum(&wiener_kernel(), &midpoint(1000), 10).unwrap();
    let fine = nystrom_spectrum(&wiener_kernel(), &midpoint(2000), 10).unwrap();
    for k in 0..10 {
        let exact = 1.0 / (PI * PI * (k as f64 + 0.5).powi(2));
        let change = ((coarse.eigenvalues()[k] - fine.eigenvalues()[k]) / fine.eigenvalues()[k]).abs();
        if k < 9 {
            assert!(change < 5e-5, "k={}: {change:e}", k + 1);
        }
        // Midpoint error scales as h², so halving h removes three quarters
        // of the coarse error.
        let coarse_err = (coarse.eigenvalues()[k] - exact) / exact;
        assert!((change / (0.75 * coarse_err) - 1.0).abs() < 0.01, "k={}", k + 1);
    }
}

#[test]
fn ratio_of_remainder_error_scales_as_inverse_d() {
    let ds = [5usize, 10, 20];
    let points: Vec<(f64, f64)> = ds
        .iter()
        .map(|&d| {
            let plan = SimulationPlan::for_kernel(&wiener_kernel(), 128, d, 100, 3000, 17).unwrap();
            let r = run_simulation(&plan);
            ((d as f64).ln(), r.ratio_j.unwrap().mean.ln())
        })
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope + 1.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn doubling_paths_shrinks_standard_error_by_root_two() {
    let se = |paths| {
        let plan = SimulationPlan::for_kernel(&wiener_kernel(), 64, 4, 40, paths, 3).unwrap();
        run_simulation(&plan).decomposition_error.std_error
    };
    let ratio = se(4000) / se(8000);
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn simulation_moments_are_consistent() {
    let plan = SimulationPlan::for_kernel(&wiener_kernel(), 128, 3, 100, 5000, 8).unwrap();
    let r = run_simulation(&plan);
    assert!(r.norm_y.z_score <= 4.0, "{:?}", r.norm_y);
    assert!(r.cross_term_max_abs < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectra_split_for_mixed_kernels(
        a in 0.0f64..1.0, b in 0.0f64..1.0, ell in 0.05f64..2.0, c in 0.0f64..0.5, d in 1usize..=3,
    ) {
        prop_assume!(a + b > 0.05);
        let n = [40, 20, 9][d - 1];
        let spec = AdditiveFieldSpec::new(mixture(a, b, ell, c), d, midpoint(n)).unwrap();
        let report = verify_union(&spec, DEFAULT_SIGNIFICANCE).unwrap();
        prop_assert!(report.passed, "defect {}", report.union_defect);
        let sum = |v: Vec<f64>| v.iter().sum::<f64>();
        let y = sum(additive_spectrum(&spec).unwrap());
        let jz = sum(jtilde_spectrum(&spec).unwrap()) + sum(ztilde_spectrum(&spec).unwrap());
        prop_assert!((y - jz).abs() <= 1e-10 * y.max(1.0));
        prop_assert!((y - spec.trace()).abs() <= 1e-10 * y.max(1.0));
        let orth = verify_orthogonality(&spec).unwrap();
        prop_assert!(orth.passed, "{:?}", orth);
    }

    #[test]
    fn cauchy_schwarz_for_mixed_kernels(a in 0.0f64..1.0, b in 0.0f64..1.0, ell in 0.05f64..2.0, c in 0.0f64..0.5) {
        prop_assume!(a + b + c > 0.01);
        let consts = kernel_constants(&mixture(a, b, ell, c), &midpoint(200)).unwrap();
        prop_assert!(consts.lambda0_bar.abs() <= consts.lambda * (1.0 + 1e-12));
        prop_assert!((consts.eps0 * consts.eps0 * consts.lambda - consts.lambda_bar).abs() <= 1e-12 * consts.lambda);
    }

    #[test]
    fn remainder_formula_and_direct_tail_agree_within_one(
        decay in 1.1f64..4.0, k_max in 30usize..300, d in 1usize..40, eps in 0.05f64..0.95,
    ) {
        // λ̄_k = k^{−decay}, listed fully, so the spectrum carries no tail.
        let eigenvalues: Vec<f64> = (1..=k_max).map(|k| (k as f64).powf(-decay)).collect();
        let trace: f64 = eigenvalues.iter().sum();
        let s = Spectrum::new(eigenvalues, trace, None).unwrap();
        let f = n_z_formula(d, eps, &s).unwrap();
        let v = n_z_direct(d, eps, &s).unwrap().value.unwrap();
        prop_assert!(f.lower <= v && v <= f.upper, "{v} vs {f:?}");
    }

    #[test]
    fn bounds_are_ordered(d in 1usize..500, eps in 0.01f64..0.99) {
        let consts = additive_complexity::kernels::ClosedForm::Wiener.constants();
        let s = additive_complexity::spectral::centered_wiener_spectrum(10_000).unwrap();
        let b = n_y_bounds(d, eps, &consts, &s).unwrap();
        prop_assert!(1 <= b.lower && b.lower <= b.upper);
    }
}
