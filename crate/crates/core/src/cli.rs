//! The `addcx` command line.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or the run
//! hits an unexpected error, 2 for an invalid configuration, 3 when the
//! listed spectrum is too short to decide a complexity.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::complexity::{
    n_y_asymptotic, n_y_bounds, n_y_point, n_z_direct, n_z_formula, wiener_q_smalleps, ComplexityAnswer,
};
use crate::error::Error;
use crate::grid::GridDiscretization;
use crate::kernels::{
    center_kernel, centered_wiener_kernel, kernel_constants, quadrature_constants, wiener_kernel, Kernel,
    KernelConstants,
};
use crate::oracle::{verify_orthogonality, verify_union, AdditiveFieldSpec, DEFAULT_SIGNIFICANCE};
use crate::simulate::{run_simulation, ErrorEstimate, SimulationPlan, DEFAULT_GRID_SIZE, DEFAULT_K_TRUNC};
use crate::spectral::{nystrom_spectrum, Spectrum, DEFAULT_CLOSED_FORM_K_MAX};

/// Directory used for output files when `--output` is not given.
pub const OUTPUT_DIR_ENV: &str = "ADDCX_OUTPUT_DIR";

const DEFAULT_GRID_FILE_N: usize = 1000;
const DEFAULT_SPECTRUM_K_MAX: usize = 20;
const Z_SCORE_LIMIT: f64 = 3.0;
const CROSS_TERM_LIMIT: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "addcx", version, about = "Approximation complexity of additive random fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Marginal eigenvalues and eigenfunction means.
    #[command(after_help = "Example:\n  addcx spectrum --kernel wiener --k-max 5\n  (λ₁ = 4/π² ≈ 0.4053)")]
    Spectrum(RunArgs),
    /// Bracket and leading term `d·q(ε)` of the complexity over a (d, ε) grid.
    #[command(after_help = "Example:\n  addcx complexity --kernel wiener --d 1 --epsilon 0.7\n  (ε ≥ 3^(-1/2): complexity 1, method trivial)")]
    Complexity(RunArgs),
    /// Two-sided bounds from the remainder-field complexity, with their ingredients.
    #[command(after_help = "Example:\n  addcx bounds --kernel wiener --d 100 --epsilon 0.3\n  (bracket around d·q(ε) ≈ 180.3)")]
    Bounds(RunArgs),
    /// Grid checks of the spectrum split and the orthogonality of the averaged decomposition.
    #[command(after_help = "Example:\n  addcx oracle-verify --kernel wiener --d 2 --N 60\n  (union defect ≤ 1e-6, exit 0)")]
    OracleVerify(RunArgs),
    /// Monte Carlo estimates of the decomposition errors.
    #[command(after_help = "Example:\n  addcx simulate --kernel wiener --d 5 --n-paths 10000 --seed 1\n  (mean error ≈ Λ̄ = 1/6)")]
    Simulate(RunArgs),
    /// Constants, small-ε behaviour of q and the trivial regime for the Wiener kernel.
    #[command(after_help = "Example:\n  addcx wiener-report\n  (Λ = 0.5, Λ̄ = 1/6, ε₀ = 3^(-1/2) ≈ 0.57735)")]
    WienerReport(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    Wiener,
    CenteredWiener,
    GridFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value = "wiener")]
    pub kernel: KernelChoice,
    /// Grid kernel file: `N` followed by `N²` row-major values at nodes `i/(N−1)`.
    #[arg(long)]
    pub kernel_path: Option<PathBuf>,
    /// Number of summands, `N` or an inclusive range `A:B`.
    #[arg(long, default_value = "1")]
    pub d: String,
    /// Error threshold in (0, 1), `x` or an inclusive grid `start:stop:count`.
    #[arg(long, default_value = "0.1")]
    pub epsilon: String,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Quadrature grid size per axis.
    #[arg(long = "N")]
    pub n_grid: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_K_TRUNC)]
    pub k_trunc: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug)]
pub enum Failure {
    Config { field: &'static str, message: String },
    Precision(String),
    Check(String),
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Check(_) | Failure::Other(_) => 1,
            Failure::Config { .. } => 2,
            Failure::Precision(_) => 3,
        }
    }

    fn config(field: &'static str, message: impl Into<String>) -> Self {
        Failure::Config {
            field,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config { field, message } => write!(f, "invalid --{field}: {message}"),
            Failure::Precision(m) => write!(f, "{m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_precision() {
            return Failure::Precision(e.to_string());
        }
        match e {
            Error::Domain { name: "epsilon", .. } => Failure::config("epsilon", e.to_string()),
            Error::Domain { name: "d", .. } => Failure::config("d", e.to_string()),
            Error::InvalidPlan(_) => Failure::config("n-paths", e.to_string()),
            Error::QuadratureTooSmall { .. } => Failure::config("N", e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

/// Parses `N` or `A:B` (inclusive) into a non-empty list of positive `d`.
pub fn parse_d_range(text: &str) -> Result<Vec<usize>, Failure> {
    let parse = |s: &str| -> Result<usize, Failure> {
        match s.trim().parse::<usize>() {
            Ok(0) => Err(Failure::config("d", "d must be positive")),
            Ok(v) => Ok(v),
            Err(_) => Err(Failure::config("d", format!("{s:?} is not a positive integer"))),
        }
    };
    match text.split_once(':') {
        None => Ok(vec![parse(text)?]),
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(Failure::config("d", format!("empty range {a}:{b}")));
            }
            Ok((a..=b).collect())
        }
    }
}

/// Parses `x` or `start:stop:count` (inclusive, evenly spaced); every value
/// must lie in (0, 1).
pub fn parse_epsilon_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let real = |s: &str| -> Result<f64, Failure> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::config("epsilon", format!("{s:?} is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [x] => vec![real(x)?],
        [start, stop, count] => {
            let (start, stop) = (real(start)?, real(stop)?);
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| Failure::config("epsilon", format!("grid count {count:?} is not an integer")))?;
            match count {
                0 => return Err(Failure::config("epsilon", "grid count must be positive")),
                1 => vec![start],
                _ => (0..count)
                    .map(|i| {
                        let t = i as f64 / (count - 1) as f64;
                        start * (1.0 - t) + stop * t
                    })
                    .collect(),
            }
        }
        _ => return Err(Failure::config("epsilon", format!("{text:?} is neither x nor start:stop:count"))),
    };
    if let Some(bad) = values.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(Failure::config("epsilon", format!("{bad} is outside (0, 1)")));
    }
    Ok(values)
}

/// Marginal kernel with the constants and centered spectrum the complexity
/// formulas need.
struct Marginal {
    kernel: Kernel,
    consts: KernelConstants,
    centered: Spectrum,
}

fn load_kernel(args: &RunArgs) -> Result<Kernel, Failure> {
    match args.kernel {
        KernelChoice::Wiener => Ok(wiener_kernel()),
        KernelChoice::CenteredWiener => Ok(centered_wiener_kernel()),
        KernelChoice::GridFile => {
            let path = args
                .kernel_path
                .as_ref()
                .ok_or_else(|| Failure::config("kernel-path", "required with --kernel grid-file"))?;
            Kernel::from_grid_file(path).map_err(|e| Failure::config("kernel-path", e.to_string()))
        }
    }
}

fn grid_size(args: &RunArgs, default: usize) -> Result<usize, Failure> {
    match args.n_grid {
        Some(0) => Err(Failure::config("N", "grid size must be positive")),
        Some(n) => Ok(n),
        None => Ok(default),
    }
}

fn marginal(args: &RunArgs) -> Result<Marginal, Failure> {
    let kernel = load_kernel(args)?;
    let k_max = args.k_max.unwrap_or(DEFAULT_CLOSED_FORM_K_MAX);
    if k_max == 0 {
        return Err(Failure::config("k-max", "must be positive"));
    }
    if let Some(closed) = kernel.closed_form() {
        let centered = closed.centered().spectrum(k_max)?;
        return Ok(Marginal {
            consts: closed.constants(),
            centered,
            kernel,
        });
    }
    let n = grid_size(args, DEFAULT_GRID_FILE_N)?;
    let grid = GridDiscretization::midpoint(n)?;
    let consts = quadrature_constants(&kernel, &grid).map_err(|e| Failure::config("kernel-path", e.to_string()))?;
    let centered_kernel = center_kernel(&kernel, &grid)?;
    let centered = nystrom_spectrum(&centered_kernel, &grid, k_max.min(n))?;
    Ok(Marginal {
        kernel,
        consts,
        centered,
    })
}

/// Output of one command: CSV text and the equivalent JSON document.
struct Output {
    csv: String,
    json: serde_json::Value,
    passed: bool,
    failures: Vec<String>,
}

impl Output {
    fn ok(csv: String, json: serde_json::Value) -> Self {
        Self {
            csv,
            json,
            passed: true,
            failures: Vec::new(),
        }
    }
}

/// Reals with 17 significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn method_name(a: &ComplexityAnswer) -> String {
    serde_json::to_value(a.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn grid_points(args: &RunArgs) -> Result<Vec<(usize, f64)>, Failure> {
    let ds = parse_d_range(&args.d)?;
    let eps = parse_epsilon_grid(&args.epsilon)?;
    Ok(ds.iter().flat_map(|&d| eps.iter().map(move |&e| (d, e))).collect())
}

fn sort_rows<T>(rows: &mut [(usize, f64, T)]) {
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
}

fn cmd_spectrum(args: &RunArgs) -> Result<Output, Failure> {
    let kernel = load_kernel(args)?;
    let k_max = args.k_max.unwrap_or(DEFAULT_SPECTRUM_K_MAX);
    if k_max == 0 {
        return Err(Failure::config("k-max", "must be positive"));
    }
    let (spectrum, consts) = match kernel.closed_form_spectrum(k_max) {
        Some(s) => (s?, kernel.closed_form().map(|c| c.constants())),
        None => {
            let n = grid_size(args, DEFAULT_GRID_FILE_N)?;
            if k_max > n {
                return Err(Failure::config("k-max", format!("{k_max} exceeds the grid size {n}")));
            }
            let grid = GridDiscretization::midpoint(n)?;
            let consts = kernel_constants(&kernel, &grid).ok();
            (nystrom_spectrum(&kernel, &grid, k_max)?, consts)
        }
    };
    let mut csv = String::from("k,eigenvalue,mean\n");
    for (k, &l) in spectrum.eigenvalues().iter().enumerate() {
        let mean = spectrum.means().map(|m| real(m[k]));
        let _ = writeln!(csv, "{},{},{}", k + 1, real(l), opt(mean));
    }
    let json = json!({ "kernel": kernel.name(), "spectrum": spectrum, "constants": consts });
    Ok(Output::ok(csv, json))
}

#[derive(Serialize)]
struct ComplexityRow {
    #[serde(flatten)]
    answer: ComplexityAnswer,
    d_q: Option<f64>,
}

fn cmd_complexity(args: &RunArgs) -> Result<Output, Failure> {
    let m = marginal(args)?;
    let points = grid_points(args)?;
    let mut rows: Vec<(usize, f64, ComplexityRow)> = points
        .par_iter()
        .map(|&(d, eps)| -> Result<_, Failure> {
            let row = match n_y_point(d, eps, &m.consts) {
                Some(answer) => ComplexityRow { answer, d_q: None },
                None => ComplexityRow {
                    answer: n_y_bounds(d, eps, &m.consts, &m.centered)?,
                    d_q: Some(n_y_asymptotic(d, eps, &m.centered, &m.consts)?),
                },
            };
            Ok((d, eps, row))
        })
        .collect::<Result<_, _>>()?;
    sort_rows(&mut rows);
    let mut csv = String::from("d,epsilon,lower,upper,value,method,d_q\n");
    for (_, _, r) in &rows {
        let a = &r.answer;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            a.d,
            real(a.epsilon),
            a.lower,
            a.upper,
            opt(a.value),
            method_name(a),
            opt(r.d_q.map(real))
        );
    }
    let records: Vec<&ComplexityRow> = rows.iter().map(|r| &r.2).collect();
    let json = json!({ "kernel": m.kernel.name(), "constants": m.consts, "rows": records });
    Ok(Output::ok(csv, json))
}

#[derive(Serialize)]
struct BoundsRow {
    d: usize,
    epsilon: f64,
    /// `ε/ε₀`, the argument of the upper bound.
    ratio: f64,
    /// `ε/ε₀ + d^{−1/2}`, the argument of the lower bound.
    shifted: f64,
    n_z_upper_arg: Option<u64>,
    n_z_lower_arg: Option<u64>,
    formula_lower: Option<u64>,
    lower: u64,
    upper: u64,
    d_q: Option<f64>,
    trivial: bool,
}

fn cmd_bounds(args: &RunArgs) -> Result<Output, Failure> {
    let m = marginal(args)?;
    let points = grid_points(args)?;
    let mut rows: Vec<(usize, f64, BoundsRow)> = points
        .par_iter()
        .map(|&(d, eps)| -> Result<_, Failure> {
            let ratio = if m.consts.eps0 > 0.0 { eps / m.consts.eps0 } else { f64::INFINITY };
            let shifted = ratio + 1.0 / (d as f64).sqrt();
            let bracket = n_y_bounds(d, eps, &m.consts, &m.centered)?;
            let trivial = n_y_point(d, eps, &m.consts).is_some();
            let (upper_arg, lower_arg, formula_lower, d_q) = if trivial {
                (None, None, None, None)
            } else {
                let lower_arg = if shifted < 1.0 {
                    n_z_direct(d, shifted, &m.centered)?.value
                } else {
                    None
                };
                (
                    n_z_direct(d, ratio, &m.centered)?.value,
                    lower_arg,
                    Some(n_z_formula(d, ratio, &m.centered)?.lower),
                    Some(n_y_asymptotic(d, eps, &m.centered, &m.consts)?),
                )
            };
            Ok((
                d,
                eps,
                BoundsRow {
                    d,
                    epsilon: eps,
                    ratio,
                    shifted,
                    n_z_upper_arg: upper_arg,
                    n_z_lower_arg: lower_arg,
                    formula_lower,
                    lower: bracket.lower,
                    upper: bracket.upper,
                    d_q,
                    trivial,
                },
            ))
        })
        .collect::<Result<_, _>>()?;
    sort_rows(&mut rows);
    let mut csv =
        String::from("d,epsilon,ratio,shifted,n_z_upper_arg,n_z_lower_arg,formula_lower,lower,upper,d_q,trivial\n");
    for (_, _, r) in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.d,
            real(r.epsilon),
            real(r.ratio),
            real(r.shifted),
            opt(r.n_z_upper_arg),
            opt(r.n_z_lower_arg),
            opt(r.formula_lower),
            r.lower,
            r.upper,
            opt(r.d_q.map(real)),
            r.trivial
        );
    }
    let records: Vec<&BoundsRow> = rows.iter().map(|r| &r.2).collect();
    let json = json!({ "kernel": m.kernel.name(), "constants": m.consts, "rows": records });
    Ok(Output::ok(csv, json))
}

fn default_oracle_n(d: usize) -> usize {
    if d >= 3 {
        25
    } else {
        60
    }
}

fn cmd_oracle_verify(args: &RunArgs) -> Result<Output, Failure> {
    let kernel = load_kernel(args)?;
    let ds = parse_d_range(&args.d)?;
    let mut csv = String::from("d,N,union_defect,trace,tolerance,cross_covariance,row_sum,passed\n");
    let mut records = Vec::new();
    let mut out_failures = Vec::new();
    for d in ds {
        let n = grid_size(args, default_oracle_n(d))?;
        let grid = GridDiscretization::midpoint(n)?;
        let spec = AdditiveFieldSpec::new(kernel.clone(), d, grid).map_err(|e| {
            let field = if d > crate::oracle::MAX_D { "d" } else { "N" };
            Failure::config(field, e.to_string())
        })?;
        let union = verify_union(&spec, DEFAULT_SIGNIFICANCE)?;
        let orth = verify_orthogonality(&spec)?;
        let passed = union.passed && orth.passed;
        if !passed {
            out_failures.push(format!(
                "d = {d}, N = {n}: union defect {:e}, cross covariance {:e}, row sum {:e}",
                union.union_defect, orth.cross_covariance, orth.row_sum
            ));
        }
        let _ = writeln!(
            csv,
            "{d},{n},{},{},{},{},{},{passed}",
            real(union.union_defect),
            real(union.trace),
            real(union.tolerance),
            real(orth.cross_covariance),
            real(orth.row_sum)
        );
        records.push(json!({ "d": d, "N": n, "eigen": union, "orthogonality": orth, "passed": passed }));
    }
    let json = json!({ "kernel": kernel.name(), "records": records });
    Ok(Output {
        passed: out_failures.is_empty(),
        failures: out_failures,
        csv,
        json,
    })
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    d: usize,
    #[serde(flatten)]
    estimate: &'a ErrorEstimate,
}

fn cmd_simulate(args: &RunArgs) -> Result<Output, Failure> {
    let kernel = load_kernel(args)?;
    let ds = parse_d_range(&args.d)?;
    let n = grid_size(args, DEFAULT_GRID_SIZE)?;
    if args.k_trunc == 0 || args.k_trunc > n {
        return Err(Failure::config("k-trunc", format!("must lie in 1..={n}")));
    }
    let mut csv = String::from("d,statistic,mean,std_error,target,z_score,n_paths,seed\n");
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for d in ds {
        let plan = SimulationPlan::for_kernel(&kernel, n, d, args.k_trunc, args.n_paths, args.seed)?;
        let report = run_simulation(&plan);
        for e in report.estimates() {
            if e.z_score > Z_SCORE_LIMIT {
                failures.push(format!("d = {d}: {} has z = {:.3}", e.statistic, e.z_score));
            }
            let _ = writeln!(
                csv,
                "{d},{},{},{},{},{},{},{}",
                e.statistic,
                real(e.mean),
                real(e.std_error),
                real(e.target),
                real(e.z_score),
                e.n_paths,
                e.seed
            );
        }
        if report.cross_term_max_abs > CROSS_TERM_LIMIT {
            failures.push(format!("d = {d}: cross term reaches {:e}", report.cross_term_max_abs));
        }
        records.push(json!({
            "d": d,
            "estimates": report.estimates().into_iter().map(|e| EstimateRecord { d, estimate: e }).collect::<Vec<_>>(),
            "cross_term_max_abs": report.cross_term_max_abs,
            "constants": report.constants,
            "truncation": report.truncation,
        }));
    }
    let json = json!({ "kernel": kernel.name(), "records": records });
    Ok(Output {
        passed: failures.is_empty(),
        failures,
        csv,
        json,
    })
}

struct Line {
    quantity: String,
    value: f64,
    expected: f64,
    tolerance: f64,
}

impl Line {
    fn passed(&self) -> bool {
        (self.value - self.expected).abs() <= self.tolerance
    }
}

fn cmd_wiener_report(args: &RunArgs) -> Result<(Output, String), Failure> {
    let closed = kernel_constants(&wiener_kernel(), &GridDiscretization::midpoint(2)?)?;
    let quad = quadrature_constants(&wiener_kernel(), &GridDiscretization::midpoint(2000)?)?;
    let mut lines = vec![
        Line { quantity: "Lambda".into(), value: closed.lambda, expected: 0.5, tolerance: 1e-10 },
        Line { quantity: "lambda0_bar".into(), value: closed.lambda0_bar, expected: 1.0 / 3.0, tolerance: 1e-10 },
        Line { quantity: "Lambda_bar".into(), value: closed.lambda_bar, expected: 1.0 / 6.0, tolerance: 1e-10 },
        Line { quantity: "eps0".into(), value: closed.eps0, expected: 3f64.sqrt().recip(), tolerance: 1e-10 },
        Line { quantity: "Lambda (quadrature N=2000)".into(), value: quad.lambda, expected: 0.5, tolerance: 1e-6 },
        Line { quantity: "lambda0_bar (quadrature N=2000)".into(), value: quad.lambda0_bar, expected: 1.0 / 3.0, tolerance: 1e-6 },
    ];
    for (eps, tol) in [(1e-1, f64::INFINITY), (1e-2, 0.05), (1e-3, 0.005)] {
        lines.push(Line {
            quantity: format!("q ratio at eps={eps:e}"),
            value: wiener_q_smalleps(eps)?,
            expected: 1.0,
            tolerance: tol,
        });
    }
    let eps0 = closed.eps0;
    let trivial_ok = (0..20)
        .map(|i| eps0 + (1.0 - eps0) * i as f64 / 20.0)
        .chain(parse_epsilon_grid(&args.epsilon).unwrap_or_default().into_iter().filter(|&e| e >= eps0))
        .all(|e| n_y_point(1, e, &closed).and_then(|a| a.value) == Some(1));
    lines.push(Line {
        quantity: "trivial regime n=1 on [eps0, 1)".into(),
        value: if trivial_ok { 1.0 } else { 0.0 },
        expected: 1.0,
        tolerance: 0.0,
    });

    let mut table = String::new();
    let _ = writeln!(table, "{:<34} {:>22} {:>22}  status", "quantity", "value", "expected");
    let mut csv = String::from("quantity,value,expected,tolerance,passed\n");
    let mut failures = Vec::new();
    for l in &lines {
        let status = if l.passed() { "ok" } else { "FAIL" };
        let _ = writeln!(table, "{:<34} {:>22.12} {:>22.12}  {status}", l.quantity, l.value, l.expected);
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            l.quantity,
            real(l.value),
            real(l.expected),
            real(l.tolerance),
            l.passed()
        );
        if !l.passed() {
            failures.push(l.quantity.clone());
        }
    }
    let json = json!({
        "constants": closed,
        "quadrature_constants": quad,
        "lines": lines.iter().map(|l| json!({
            "quantity": l.quantity, "value": l.value, "expected": l.expected,
            "tolerance": if l.tolerance.is_finite() { Some(l.tolerance) } else { None },
            "passed": l.passed(),
        })).collect::<Vec<_>>(),
    });
    Ok((
        Output {
            passed: failures.is_empty(),
            failures,
            csv,
            json,
        },
        table,
    ))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum(_) => "spectrum",
        Command::Complexity(_) => "complexity",
        Command::Bounds(_) => "bounds",
        Command::OracleVerify(_) => "oracle-verify",
        Command::Simulate(_) => "simulate",
        Command::WienerReport(_) => "wiener-report",
    }
}

fn destination(args: &RunArgs, name: &str) -> Option<PathBuf> {
    if let Some(p) = &args.output {
        return Some(p.clone());
    }
    let dir = std::env::var_os(OUTPUT_DIR_ENV)?;
    let ext = match args.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    Some(Path::new(&dir).join(format!("{name}.{ext}")))
}

fn render(out: &Output, format: Format) -> String {
    match format {
        Format::Csv => out.csv.clone(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.json).expect("JSON values serialize");
            s.push('\n');
            s
        }
    }
}

fn emit(text: &str, dest: Option<&Path>) -> Result<(), Failure> {
    match dest {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Failure::config("output", e.to_string()))?;
            }
            std::fs::write(path, text).map_err(|e| Failure::config("output", format!("{}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Other(e.to_string())),
    }
}

/// Runs one command and returns its exit code; diagnostics go to stderr.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("addcx {}: {f}", command_name(&cli.command));
            f.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let name = command_name(&cli.command);
    let (args, out) = match &cli.command {
        Command::Spectrum(a) => (a, cmd_spectrum(a)?),
        Command::Complexity(a) => (a, cmd_complexity(a)?),
        Command::Bounds(a) => (a, cmd_bounds(a)?),
        Command::OracleVerify(a) => (a, cmd_oracle_verify(a)?),
        Command::Simulate(a) => (a, cmd_simulate(a)?),
        Command::WienerReport(a) => {
            let (out, table) = cmd_wiener_report(a)?;
            print!("{table}");
            if let Some(dest) = destination(a, name) {
                emit(&render(&out, a.format), Some(&dest))?;
            }
            return finish(out);
        }
    };
    emit(&render(&out, args.format), destination(args, name).as_deref())?;
    finish(out)
}

fn finish(out: Output) -> Result<(), Failure> {
    if out.passed {
        Ok(())
    } else {
        Err(Failure::Check(out.failures.join("; ")))
    }
}
