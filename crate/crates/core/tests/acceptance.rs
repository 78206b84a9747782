//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use additive_complexity::complexity::{
    n_y_bounds, n_y_point, n_z_direct, n_z_formula, q_of_eps, wiener_q_smalleps,
};
use additive_complexity::grid::GridDiscretization;
use additive_complexity::kernels::{
    centered_wiener_kernel, kernel_constants, quadrature_constants, wiener_kernel, ClosedForm, Kernel,
};
use additive_complexity::oracle::{
    jtilde_grid_spectrum, jtilde_secular_spectrum, oracle_complexity, richardson, verify_orthogonality,
    verify_union, AdditiveFieldSpec, DEFAULT_SIGNIFICANCE,
};
use additive_complexity::simulate::{run_simulation, SimulationPlan, DEFAULT_GRID_SIZE};
use additive_complexity::spectral::{centered_wiener_spectrum, nystrom_spectrum, wiener_spectrum};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn midpoint(n: usize) -> GridDiscretization {
    GridDiscretization::midpoint(n).expect("valid grid")
}

fn ac1_constants() -> Outcome {
    let closed = ClosedForm::Wiener.constants();
    let quad = quadrature_constants(&wiener_kernel(), &midpoint(2000)).unwrap();
    let expect = [0.5, 1.0 / 6.0, 1.0 / 3f64.sqrt()];
    let got_closed = [closed.lambda, closed.lambda_bar, closed.eps0];
    let got_quad = [quad.lambda, quad.lambda_bar, quad.eps0];
    let err = |g: &[f64; 3]| g.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (ec, eq) = (err(&got_closed), err(&got_quad));
    outcome(
        ec <= 1e-10 && eq <= 1e-6,
        format!("closed-form max error {ec:.2e} (≤ 1e-10), quadrature N=2000 max error {eq:.2e} (≤ 1e-6)"),
    )
}

fn ac2_nystrom() -> Outcome {
    let grid = midpoint(2000);
    let mut worst: f64 = 0.0;
    let wiener = |k: f64| 1.0 / (PI * PI * (k - 0.5).powi(2));
    let centered = |k: f64| 1.0 / (PI * PI * k * k);
    for (kernel, exact) in [
        (wiener_kernel(), &wiener as &dyn Fn(f64) -> f64),
        (centered_wiener_kernel(), &centered),
    ] {
        let s = nystrom_spectrum(&kernel, &grid, 10).unwrap();
        for (k, a) in s.eigenvalues().iter().enumerate() {
            let b = exact(k as f64 + 1.0);
            worst = worst.max(((a - b) / b).abs());
        }
    }
    outcome(worst <= 1e-4, format!("top-10 max relative error {worst:.2e} at N=2000 (≤ 1e-4)"))
}

fn ac3_within_one() -> Outcome {
    let s = centered_wiener_spectrum(10_000).unwrap();
    let mut failures = 0;
    let mut checked = 0;
    for d in 1..=50 {
        for i in 0..50 {
            let eps = 0.05 + 0.9 * (i as f64 + 0.5) / 50.0;
            let f = n_z_formula(d, eps, &s).unwrap();
            let v = n_z_direct(d, eps, &s).unwrap().value.unwrap();
            checked += 1;
            if !(f.lower <= v && v <= f.upper) {
                failures += 1;
            }
        }
    }
    outcome(failures == 0, format!("{checked} (d, ε) points, {failures} outside the formula bracket"))
}

fn ac4_sandwich() -> Outcome {
    let consts = ClosedForm::Wiener.constants();
    let centered = centered_wiener_spectrum(10_000).unwrap();
    let mut violations = Vec::new();
    let mut cells = Vec::new();
    for (d, n) in [(1usize, 1000usize), (2, 170), (3, 31)] {
        let spec = AdditiveFieldSpec::new(wiener_kernel(), d, midpoint(n)).unwrap();
        for eps in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let oracle = oracle_complexity(&spec, eps).unwrap();
            let bounds = n_y_bounds(d, eps, &consts, &centered).unwrap();
            let meets = oracle.lower <= bounds.upper && bounds.lower <= oracle.upper;
            cells.push(format!("d{d}/ε{eps}: oracle [{},{}] bounds [{},{}]", oracle.lower, oracle.upper, bounds.lower, bounds.upper));
            if !meets {
                violations.push(cells.last().cloned().unwrap());
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{} violations of 15; {}", violations.len(), if violations.is_empty() { cells.join(" ") } else { violations.join(" ") }),
    )
}

fn oracle_specs() -> Vec<AdditiveFieldSpec> {
    vec![
        AdditiveFieldSpec::new(wiener_kernel(), 2, midpoint(60)).unwrap(),
        AdditiveFieldSpec::new(wiener_kernel(), 3, midpoint(25)).unwrap(),
    ]
}

fn ac5_union() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for spec in oracle_specs() {
        let r = verify_union(&spec, DEFAULT_SIGNIFICANCE).unwrap();
        let rel = r.union_defect / r.trace;
        ok &= rel <= 1e-6;
        parts.push(format!("d={} N={}: defect/trace {rel:.2e}", spec.d(), spec.grid().len()));
    }
    outcome(ok, format!("{} (≤ 1e-6)", parts.join(", ")))
}

fn ac6_orthogonality() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for spec in oracle_specs() {
        let r = verify_orthogonality(&spec).unwrap();
        ok &= r.cross_covariance <= 1e-9 && r.row_sum <= 1e-9;
        parts.push(format!(
            "d={} N={}: cross {:.2e}, row sum {:.2e}",
            spec.d(),
            spec.grid().len(),
            r.cross_covariance,
            r.row_sum
        ));
    }
    outcome(ok, format!("{} (≤ 1e-9)", parts.join(", ")))
}

fn ac7_monte_carlo() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [5, 10] {
        let plan = SimulationPlan::for_kernel(&wiener_kernel(), DEFAULT_GRID_SIZE, d, 200, 10_000, 1).unwrap();
        let r = run_simulation(&plan);
        let checked = [Some(&r.decomposition_error), r.ratio_j.as_ref(), r.ratio_z.as_ref()];
        for e in checked {
            match e {
                Some(e) => {
                    ok &= e.z_score <= 3.0;
                    parts.push(format!("d={d} {} z={:.2}", e.statistic, e.z_score));
                }
                None => ok = false,
            }
        }
    }
    outcome(ok, format!("{} (≤ 3)", parts.join(", ")))
}

fn ac8_small_eps() -> Outcome {
    let r2 = wiener_q_smalleps(1e-2).unwrap();
    let r3 = wiener_q_smalleps(1e-3).unwrap();
    outcome(
        (0.95..=1.05).contains(&r2) && (0.995..=1.005).contains(&r3),
        format!("ratio {r2:.6} at 1e-2 (within 5%), {r3:.6} at 1e-3 (within 0.5%)"),
    )
}

fn ac9_asymptotic_ratio() -> Outcome {
    let consts = ClosedForm::Wiener.constants();
    let centered = centered_wiener_spectrum(10_000).unwrap();
    let eps = 0.3;
    let q = q_of_eps(&centered, eps, consts.eps0).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [100usize, 1000, 10_000] {
        let f = n_z_formula(d, eps / consts.eps0, &centered).unwrap();
        let dq = d as f64 * q;
        let ratio = 0.5 * (f.lower + f.upper) as f64 / dq;
        ok &= (ratio - 1.0).abs() <= 2.0 / dq;
        parts.push(format!("d={d}: {ratio:.6} (±{:.1e})", 2.0 / dq));
    }
    outcome(ok, parts.join(", "))
}

fn ac10_trivial() -> Outcome {
    let consts = ClosedForm::Wiener.constants();
    let eps0 = consts.eps0;
    let wiener_ok = (0..20)
        .map(|i| eps0 + (1.0 - eps0) * i as f64 / 20.0)
        .all(|e| n_y_point(7, e, &consts).and_then(|a| a.value) == Some(1));
    let flat = kernel_constants(&Kernel::constant(1.0), &midpoint(50)).unwrap();
    let flat_ok = flat.degenerate
        && [0.01, 0.3, 0.9].iter().all(|&e| n_y_point(4, e, &flat).and_then(|a| a.value) == Some(1));
    outcome(
        wiener_ok && flat_ok,
        format!("Wiener 20-point grid on [3^-1/2, 1): {wiener_ok}; constant kernel with Λ̄ = 0: {flat_ok}"),
    )
}

fn ac11_secular() -> Outcome {
    let s = wiener_spectrum(10_000).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [1usize, 2] {
        let secular = jtilde_secular_spectrum(&s, d, 5).unwrap();
        let fine = jtilde_grid_spectrum(&wiener_kernel(), &midpoint(2000), d).unwrap();
        let coarse = jtilde_grid_spectrum(&wiener_kernel(), &midpoint(1000), d).unwrap();
        let extrapolated = richardson(&fine[..5], &coarse[..5]);
        let rel = |g: &[f64]| {
            secular
                .iter()
                .zip(g)
                .map(|(a, b)| ((a - b) / b).abs())
                .fold(0.0, f64::max)
        };
        let (raw, rich) = (rel(&fine[..5]), rel(&extrapolated));
        ok &= raw <= 1e-4;
        parts.push(format!("d={d}: {raw:.2e} vs N=2000 grid, {rich:.2e} vs extrapolated"));
    }
    outcome(ok, format!("{} (≤ 1e-4)", parts.join(", ")))
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 11] = [
        ("Wiener constants", ac1_constants),
        ("Nyström spectrum golden values", ac2_nystrom),
        ("within-one formula for the remainder field", ac3_within_one),
        ("two-sided bounds contain the grid oracle", ac4_sandwich),
        ("spectrum union of the averaged split", ac5_union),
        ("orthogonality residuals", ac6_orthogonality),
        ("Monte Carlo decomposition errors", ac7_monte_carlo),
        ("small-ε law for q", ac8_small_eps),
        ("asymptotic ratio in d", ac9_asymptotic_ratio),
        ("trivial regimes", ac10_trivial),
        ("secular versus grid spectra", ac11_secular),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("AC{:<2} {status} {name} [{secs:.2}s]: {}", i + 1, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
