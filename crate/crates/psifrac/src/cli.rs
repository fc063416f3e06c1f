//! Command-line interface.
//!
//! One entry point, seven subcommands: `ml`, `oracle`, `integrate`,
//! `differentiate`, `gronwall`, `solve` and `stability {uh,uhr}`. Grids and
//! problems come from JSON configs (see [`crate::config`]); results go to
//! `--out` or stdout as CSV `(x, y, value)` rows with 17 significant digits
//! or as JSON. Exit codes: 0 success, 1 certificate failure, 2 config or
//! validation error, 3 numerical failure (non-convergence and runtime
//! evaluation errors). Batch stability draws run on up to `PSIFRAC_THREADS`
//! workers (0 or unset = number of available cores); reports are ordered by
//! draw index, so output bytes do not depend on the worker count.

use crate::config::{ConfigError, ProblemConfig, StabilitySection};
use crate::darboux::{self, SolveError};
use crate::exprdsl;
use crate::fracops::{self, Axis, FracOrder, SpecialCase};
use crate::grid::{graded_nodes, GridFn};
use crate::gronwall;
use crate::oracle;
use crate::psi::{Builtin, PsiFunction};
use crate::specfun::{self, MlParams};
use crate::stability::{
    self, PerturbMode, Perturbation, RassiasWeight, StabilityError, StabilityReport,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;

const EXIT_OK: i32 = 0;
const EXIT_CERT_FAIL: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "psifrac",
    version,
    about = "Weighted fractional calculus: integrals, derivatives, Darboux solves and stability certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the one-parameter Mittag-Leffler function E_alpha(z).
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        z: f64,
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Print closed-form reference values for power-profile integrals.
    Oracle {
        #[command(subcommand)]
        which: OracleKind,
    },
    /// Apply fractional integrals to an expression sampled on the config grid.
    Integrate(IntegrateArgs),
    /// Apply the mixed fractional derivative to an expression on the config grid.
    Differentiate(DifferentiateArgs),
    /// Evaluate and optionally verify the fractional Gronwall bound on a 1D grid.
    Gronwall(GronwallArgs),
    /// Solve the Darboux problem by Picard iteration.
    Solve(SolveArgs),
    /// Stability certificates.
    Stability {
        #[command(subcommand)]
        which: StabilityKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PsiFlag {
    Identity,
    Log,
    Power,
    Bounded,
}

fn psi_from_flags(which: PsiFlag, rho: Option<f64>) -> Result<PsiFunction, String> {
    let builtin = match which {
        PsiFlag::Identity => Builtin::Identity,
        PsiFlag::Log => Builtin::Log,
        PsiFlag::Bounded => Builtin::Bounded,
        PsiFlag::Power => Builtin::Power(rho.ok_or("--rho is required for --psi power")?),
    };
    PsiFunction::builtin(builtin).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum OracleKind {
    /// Γ(δ)/Γ(α+δ)·(ψ(x)-ψ(a))^(α+δ-1).
    Power1d {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value = "identity")]
        psi: PsiFlag,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        base: f64,
        #[arg(long)]
        x: f64,
    },
    /// Product closed form over both axes.
    Power2d {
        #[arg(long)]
        alpha1: f64,
        #[arg(long)]
        alpha2: f64,
        #[arg(long)]
        delta1: f64,
        #[arg(long)]
        delta2: f64,
        #[arg(long, value_enum, default_value = "identity")]
        psi: PsiFlag,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        base: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
    /// The unit-integrand identity (ψ(y)-ψ(0))^α₂(ψ(x)-ψ(0))^α₁/(Γ(α₁+1)Γ(α₂+1)).
    Unit2d {
        #[arg(long)]
        alpha1: f64,
        #[arg(long)]
        alpha2: f64,
        #[arg(long, value_enum, default_value = "identity")]
        psi: PsiFlag,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        base: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegralOp {
    /// Tensor-product integral over both axes.
    Both,
    /// Single-axis integral along x.
    Axis1,
    /// Single-axis integral along y.
    Axis2,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Integrand u(x, y).
    #[arg(long, default_value = "1")]
    expr: String,
    #[arg(long, value_enum, default_value = "both")]
    op: IntegralOp,
    /// Grid override as NXxNY, e.g. 256x256.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecialFlag {
    Rl,
    Caputo,
    Classical,
}

#[derive(Args)]
struct DifferentiateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Field u(x, y) to differentiate.
    #[arg(long, default_value = "x*y")]
    expr: String,
    /// Use a named special case instead of the config's (β, α, ψ).
    #[arg(long, value_enum)]
    special: Option<SpecialFlag>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct GronwallArgs {
    #[arg(long)]
    alpha: f64,
    /// Constant v(t) of the bound.
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    /// Constant h(t) of the bound.
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// Right endpoint of the 1D grid.
    #[arg(long, default_value_t = 1.0)]
    t1: f64,
    #[arg(long, default_value_t = 0.0)]
    base: f64,
    #[arg(long, default_value_t = 257)]
    nodes: usize,
    /// Sampled function u(t) to verify against the hypothesis and bound.
    #[arg(long)]
    u_expr: Option<String>,
    #[arg(long, value_enum, default_value = "identity")]
    psi: PsiFlag,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Component {
    U,
    U1,
    U2,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Grid override as NXxNY.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value = "u")]
    component: Component,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the iteration log (iteration, distance, ratio) as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct StabilityCommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StabilityKind {
    /// Ulam-Hyers certificate: |g| ≤ ε draws, sup-norm gaps vs ε·Cⁱ.
    Uh {
        #[command(flatten)]
        common: StabilityCommonArgs,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Generalized Ulam-Hyers-Rassias certificate: |g| ≤ φ_w draws,
    /// pointwise gaps vs C_{f,φ}ⁱ·φ_w.
    Uhr {
        #[command(flatten)]
        common: StabilityCommonArgs,
        /// Rassias weight φ_w(x, y).
        #[arg(long)]
        weight_expr: Option<String>,
        /// Finite supremum of ψ (defaults to a known one, e.g. 1 for the
        /// bounded builtin).
        #[arg(long)]
        psi_sup: Option<f64>,
        /// Switch to the |g| ≤ ε·φ_w mode.
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

/// Runs the CLI; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version through this path
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Ml { alpha, z, rel_tol } => run_ml(alpha, z, rel_tol),
        Command::Oracle { which } => run_oracle(which),
        Command::Integrate(args) => run_integrate(args),
        Command::Differentiate(args) => run_differentiate(args),
        Command::Gronwall(args) => run_gronwall(args),
        Command::Solve(args) => run_solve(args),
        Command::Stability { which } => run_stability(which),
    }
}

fn fail(code: i32, kind: &str, msg: impl Display) -> i32 {
    let msg = msg.to_string().replace('\n', " ");
    eprintln!("error: kind={kind} msg={msg}");
    code
}

fn config_code(e: &ConfigError) -> i32 {
    let _ = e;
    EXIT_CONFIG
}

fn solve_code(e: &SolveError) -> i32 {
    match e {
        SolveError::NotContraction(_) | SolveError::InvalidProblem(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn stability_code(e: &StabilityError) -> i32 {
    match e {
        StabilityError::Solve(inner) => solve_code(inner),
        StabilityError::BoundViolated { .. }
        | StabilityError::NonpositiveWeight { .. }
        | StabilityError::NonIncreasingWeight { .. }
        | StabilityError::LambdaCapExceeded { .. }
        | StabilityError::UnboundedPsi(_)
        | StabilityError::UncertifiedWeight
        | StabilityError::ModeMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn run_ml(alpha: f64, z: f64, rel_tol: Option<f64>) -> i32 {
    let params = match MlParams::new(alpha, z) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, "domain", e),
    };
    let params = match rel_tol {
        Some(t) => match params.with_rel_tol(t) {
            Ok(p) => p,
            Err(e) => return fail(EXIT_CONFIG, "domain", e),
        },
        None => params,
    };
    match specfun::mittag_leffler(&params) {
        Ok(v) => {
            println!("{v}");
            EXIT_OK
        }
        Err(e) => fail(EXIT_NUMERICAL, "specfun", e),
    }
}

fn run_oracle(which: OracleKind) -> i32 {
    let result = match which {
        OracleKind::Power1d {
            alpha,
            delta,
            psi,
            rho,
            base,
            x,
        } => psi_from_flags(psi, rho)
            .map_err(|e| e.to_string())
            .and_then(|psi| {
                oracle::power_integral_1d(alpha, delta, &psi, base, x).map_err(|e| e.to_string())
            }),
        OracleKind::Power2d {
            alpha1,
            alpha2,
            delta1,
            delta2,
            psi,
            rho,
            base,
            x,
            y,
        } => psi_from_flags(psi, rho)
            .map_err(|e| e.to_string())
            .and_then(|psi| {
                oracle::power_integral_nd(
                    &[alpha1, alpha2],
                    &[delta1, delta2],
                    &psi,
                    &[base, base],
                    &[x, y],
                )
                .map_err(|e| e.to_string())
            }),
        OracleKind::Unit2d {
            alpha1,
            alpha2,
            psi,
            rho,
            base,
            x,
            y,
        } => psi_from_flags(psi, rho)
            .map_err(|e| e.to_string())
            .and_then(|psi| {
                FracOrder::new(alpha1, alpha2, 0.0)
                    .map_err(|e| e.to_string())
                    .and_then(|ord| {
                        oracle::unit_integral_2d(&ord, &psi, (base, base), (x, y))
                            .map_err(|e| e.to_string())
                    })
            }),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            EXIT_OK
        }
        Err(e) => fail(EXIT_CONFIG, "oracle", e),
    }
}

fn parse_grid_spec(spec: &str) -> Result<(usize, usize), String> {
    let (nx, ny) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid spec `{spec}` is not of the form NXxNY"))?;
    let nx = nx
        .trim()
        .parse()
        .map_err(|_| format!("bad node count `{nx}`"))?;
    let ny = ny
        .trim()
        .parse()
        .map_err(|_| format!("bad node count `{ny}`"))?;
    Ok((nx, ny))
}

/// Loads a config, applying a NXxNY grid override.
fn load_built(
    config: &PathBuf,
    grid_override: Option<&str>,
) -> Result<crate::config::BuiltProblem, (i32, String)> {
    let mut cfg = ProblemConfig::load(config)
        .map_err(|e| (config_code(&e), e.to_string()))?;
    if let Some(spec) = grid_override {
        let (nx, ny) = parse_grid_spec(spec).map_err(|e| (EXIT_CONFIG, e))?;
        cfg.grid.nx = nx;
        cfg.grid.ny = ny;
    }
    cfg.build().map_err(|e| (config_code(&e), e.to_string()))
}

fn write_output(path: Option<&PathBuf>, contents: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| format!("cannot write `{}`: {e}", p.display())),
        None => {
            print!("{contents}");
            std::io::stdout().flush().map_err(|e| e.to_string())
        }
    }
}

/// CSV rows (x, y, value) rendered with 17 significant digits, which
/// round-trips f64 exactly.
fn grid_to_csv(g: &GridFn) -> String {
    let grid = g.grid();
    let mut out = String::with_capacity(grid.nx() * grid.ny() * 64);
    out.push_str("x,y,value\n");
    for (i, &x) in grid.xs().iter().enumerate() {
        for (j, &y) in grid.ys().iter().enumerate() {
            out.push_str(&format!("{x:.16e},{y:.16e},{:.16e}\n", g.at(i, j)));
        }
    }
    out
}

#[derive(Serialize)]
struct GridJson<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    /// Row-major in x: values[i][j] = value at (xs[i], ys[j]).
    values: Vec<&'a [f64]>,
}

fn grid_to_json(g: &GridFn) -> String {
    let grid = g.grid();
    let values: Vec<&[f64]> = g.values().chunks(grid.ny()).collect();
    let doc = GridJson {
        xs: grid.xs(),
        ys: grid.ys(),
        values,
    };
    serde_json::to_string_pretty(&doc).expect("grid serialization cannot fail")
}

fn emit_grid(g: &GridFn, format: OutputFormat, out: Option<&PathBuf>) -> Result<(), String> {
    let text = match format {
        OutputFormat::Csv => grid_to_csv(g),
        OutputFormat::Json => grid_to_json(g),
    };
    write_output(out, &text)
}

fn run_integrate(args: IntegrateArgs) -> i32 {
    let built = match load_built(&args.config, args.grid.as_deref()) {
        Ok(b) => b,
        Err((code, msg)) => return fail(code, "config", msg),
    };
    let expr = match exprdsl::parse(&args.expr, &["x", "y"]) {
        Ok(e) => e,
        Err(e) => return fail(EXIT_CONFIG, "expr", e),
    };
    let sampled = match GridFn::try_from_fn(&built.grid, |x, y| expr.eval(&[x, y])) {
        Ok(Ok(g)) => g,
        Ok(Err(e)) => return fail(EXIT_NUMERICAL, "sampling", e),
        Err(e) => return fail(EXIT_NUMERICAL, "eval", e),
    };
    let ord = built.problem.ord;
    let psi = &built.problem.psi;
    let result = match args.op {
        IntegralOp::Both => fracops::frac_integral_2d(&sampled, psi, &ord),
        IntegralOp::Axis1 => fracops::frac_integral_axis(&sampled, psi, ord.alpha1(), Axis::X),
        IntegralOp::Axis2 => fracops::frac_integral_axis(&sampled, psi, ord.alpha2(), Axis::Y),
    };
    match result {
        Ok(g) => match emit_grid(&g, args.format, args.out.as_ref()) {
            Ok(()) => EXIT_OK,
            Err(e) => fail(EXIT_NUMERICAL, "io", e),
        },
        Err(e) => fail(EXIT_NUMERICAL, "integrate", e),
    }
}

fn run_differentiate(args: DifferentiateArgs) -> i32 {
    let built = match load_built(&args.config, args.grid.as_deref()) {
        Ok(b) => b,
        Err((code, msg)) => return fail(code, "config", msg),
    };
    let expr = match exprdsl::parse(&args.expr, &["x", "y"]) {
        Ok(e) => e,
        Err(e) => return fail(EXIT_CONFIG, "expr", e),
    };
    let sampled = match GridFn::try_from_fn(&built.grid, |x, y| expr.eval(&[x, y])) {
        Ok(Ok(g)) => g,
        Ok(Err(e)) => return fail(EXIT_NUMERICAL, "sampling", e),
        Err(e) => return fail(EXIT_NUMERICAL, "eval", e),
    };
    let op = match args.special {
        Some(flag) => fracops::reduce_special_case(
            match flag {
                SpecialFlag::Rl => SpecialCase::RlPartial,
                SpecialFlag::Caputo => SpecialCase::CaputoPartial,
                SpecialFlag::Classical => SpecialCase::Classical,
            },
            &built.problem.ord,
            &built.problem.psi,
        ),
        None => fracops::HilferPartialOp {
            ord: built.problem.ord,
            psi: built.problem.psi.clone(),
        },
    };
    match op.apply(&sampled) {
        Ok(g) => match emit_grid(&g, args.format, args.out.as_ref()) {
            Ok(()) => EXIT_OK,
            Err(e) => fail(EXIT_NUMERICAL, "io", e),
        },
        Err(e) => fail(EXIT_NUMERICAL, "differentiate", e),
    }
}

fn run_gronwall(args: GronwallArgs) -> i32 {
    let psi = match psi_from_flags(args.psi, args.rho) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, "psi", e),
    };
    let nodes = match graded_nodes(args.base, args.t1, args.nodes.max(17), 1.0) {
        Ok(n) => n,
        Err(e) => return fail(EXIT_CONFIG, "grid", e),
    };
    let mut out = String::new();
    match &args.u_expr {
        None => {
            out.push_str("t,bound\n");
            for &t in &nodes {
                match gronwall::gronwall_bound(args.v, args.h, args.alpha, &psi, args.base, t) {
                    Ok(b) => out.push_str(&format!("{t:.16e},{b:.16e}\n")),
                    Err(e) => return fail(EXIT_NUMERICAL, "gronwall", e),
                }
            }
        }
        Some(src) => {
            let u_expr = match exprdsl::parse(src, &["t"]) {
                Ok(e) => e,
                Err(e) => return fail(EXIT_CONFIG, "u-expr", e),
            };
            let mut u = Vec::with_capacity(nodes.len());
            for &t in &nodes {
                match u_expr.eval(&[t]) {
                    Ok(v) => u.push(v),
                    Err(e) => return fail(EXIT_NUMERICAL, "u-expr", e),
                }
            }
            let v = vec![args.v; nodes.len()];
            let h = vec![args.h; nodes.len()];
            let report = match gronwall::verify_gronwall(&u, &v, &h, args.alpha, &psi, &nodes) {
                Ok(r) => r,
                Err(e) => return fail(EXIT_NUMERICAL, "gronwall", e),
            };
            out.push_str("t,u,hypothesis_rhs,hypothesis_margin,bound,conclusion_margin\n");
            for row in &report.rows {
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    row.t,
                    row.u,
                    row.hypothesis_rhs,
                    row.hypothesis_margin,
                    row.bound,
                    row.conclusion_margin
                ));
            }
            eprintln!(
                "gronwall: hypothesis_all_hold={} conclusion_all_hold={} slack={:.3e}",
                report.hypothesis_all_hold, report.conclusion_all_hold, report.slack
            );
        }
    }
    match write_output(args.out.as_ref(), &out) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(EXIT_NUMERICAL, "io", e),
    }
}

#[derive(Serialize)]
struct SolveLogJson<'a> {
    converged: bool,
    tol: f64,
    final_distance: f64,
    boundary_extrapolated: bool,
    steps: &'a [darboux::IterationStep],
}

fn run_solve(args: SolveArgs) -> i32 {
    let built = match load_built(&args.config, args.grid.as_deref()) {
        Ok(b) => b,
        Err((code, msg)) => return fail(code, "config", msg),
    };
    let tol = args.tol.unwrap_or(built.tol);
    let max_iter = args.max_iter.unwrap_or(built.max_iter);
    let (sol, log) = match darboux::picard_solve(&built.problem, &built.grid, tol, max_iter) {
        Ok(r) => r,
        Err(e) => return fail(solve_code(&e), "solve", e),
    };
    let field = match args.component {
        Component::U => &sol.u,
        Component::U1 => &sol.u1,
        Component::U2 => &sol.u2,
    };
    if let Err(e) = emit_grid(field, args.format, args.out.as_ref()) {
        return fail(EXIT_NUMERICAL, "io", e);
    }
    if let Some(log_path) = &args.log {
        let doc = SolveLogJson {
            converged: log.converged,
            tol: log.tol,
            final_distance: log.final_distance,
            boundary_extrapolated: log.boundary_extrapolated,
            steps: &log.steps,
        };
        let text = serde_json::to_string_pretty(&doc).expect("log serialization cannot fail");
        if let Err(e) = std::fs::write(log_path, text) {
            return fail(EXIT_NUMERICAL, "io", e);
        }
    }
    if !log.converged {
        return fail(
            EXIT_NUMERICAL,
            "non-convergence",
            format!(
                "picard iteration stopped after {} sweeps at distance {:.3e} (tol {tol:.3e})",
                log.steps.len(),
                log.final_distance
            ),
        );
    }
    EXIT_OK
}

fn resolve_threads() -> usize {
    let auto = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var("PSIFRAC_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => auto,
            Ok(n) => n,
        },
        Err(_) => auto,
    }
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// The report document a stability run writes. `timestamp` is the only
/// field expected to differ between identical runs.
#[derive(Serialize)]
struct BatchReport {
    schema: &'static str,
    timestamp: u64,
    mode: String,
    epsilon: Option<f64>,
    draws: usize,
    base_seed: u64,
    all_pass: bool,
    all_converged: bool,
    config: ProblemConfig,
    runs: Vec<StabilityReport>,
}

fn emit_report(report: &BatchReport, out: Option<&PathBuf>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    write_output(out, &text)
}

fn verdict_code(all_converged: bool, all_pass: bool) -> i32 {
    if !all_converged {
        EXIT_NUMERICAL
    } else if !all_pass {
        EXIT_CERT_FAIL
    } else {
        EXIT_OK
    }
}

fn report_exit(report: &BatchReport) -> i32 {
    match verdict_code(report.all_converged, report.all_pass) {
        EXIT_NUMERICAL => fail(
            EXIT_NUMERICAL,
            "non-convergence",
            "one or more solves did not converge within max_iter",
        ),
        EXIT_CERT_FAIL => fail(EXIT_CERT_FAIL, "certificate", "stability certificate failed"),
        code => code,
    }
}

fn run_stability(which: StabilityKind) -> i32 {
    match which {
        StabilityKind::Uh { common, epsilon } => run_stability_uh(common, epsilon),
        StabilityKind::Uhr {
            common,
            weight_expr,
            psi_sup,
            epsilon,
        } => run_stability_uhr(common, weight_expr, psi_sup, epsilon),
    }
}

fn run_stability_uh(common: StabilityCommonArgs, epsilon: Option<f64>) -> i32 {
    let built = match load_built(&common.config, common.grid.as_deref()) {
        Ok(b) => b,
        Err((code, msg)) => return fail(code, "config", msg),
    };
    let section = built.resolved.stability.clone().unwrap_or_default();
    let Some(epsilon) = epsilon.or(section.epsilon) else {
        return fail(
            EXIT_CONFIG,
            "config",
            "--epsilon (or a stability.epsilon config field) is required for uh",
        );
    };
    if !(epsilon > 0.0) {
        return fail(EXIT_CONFIG, "config", format!("epsilon must be positive, got {epsilon}"));
    }
    let draws = common.draws.or(section.draws).unwrap_or(20);
    let base_seed = common.seed.unwrap_or(built.seed);
    let tol = common.tol.unwrap_or(built.tol);
    let max_iter = common.max_iter.unwrap_or(built.max_iter);
    let threads = resolve_threads();
    let runs = match stability::uh_certify_batch(
        &built.problem,
        epsilon,
        draws,
        base_seed,
        &built.grid,
        tol,
        max_iter,
        built.ml_order,
        threads,
    ) {
        Ok(r) => r,
        Err(e) => return fail(stability_code(&e), "stability", e),
    };
    let mut config = built.resolved.clone();
    config.seed = Some(base_seed);
    config.tol = Some(tol);
    config.max_iter = Some(max_iter);
    config.stability = Some(StabilitySection {
        epsilon: Some(epsilon),
        draws: Some(draws),
        weight: None,
        psi_sup: None,
        uhr_indices: section.uhr_indices,
    });
    let report = BatchReport {
        schema: "psifrac-stability-report/1",
        timestamp: unix_timestamp(),
        mode: "uh".into(),
        epsilon: Some(epsilon),
        draws,
        base_seed,
        all_pass: runs.iter().all(|r| r.pass),
        all_converged: runs.iter().all(|r| r.v_converged && r.u_converged),
        config,
        runs,
    };
    if let Err(e) = emit_report(&report, common.out.as_ref()) {
        return fail(EXIT_NUMERICAL, "io", e);
    }
    report_exit(&report)
}

fn run_stability_uhr(
    common: StabilityCommonArgs,
    weight_expr: Option<String>,
    psi_sup: Option<f64>,
    epsilon: Option<f64>,
) -> i32 {
    let built = match load_built(&common.config, common.grid.as_deref()) {
        Ok(b) => b,
        Err((code, msg)) => return fail(code, "config", msg),
    };
    let section = built.resolved.stability.clone().unwrap_or_default();
    let Some(weight_src) = weight_expr.or(section.weight.clone()) else {
        return fail(
            EXIT_CONFIG,
            "config",
            "--weight-expr (or a stability.weight config field) is required for uhr",
        );
    };
    let weight = match exprdsl::parse(&weight_src, &["x", "y"]) {
        Ok(w) => w,
        Err(e) => return fail(EXIT_CONFIG, "weight-expr", e),
    };
    let psi_sup = psi_sup.or(section.psi_sup);
    let draws = common.draws.or(section.draws).unwrap_or(5);
    let base_seed = common.seed.unwrap_or(built.seed);
    let tol = common.tol.unwrap_or(built.tol);
    let max_iter = common.max_iter.unwrap_or(built.max_iter);
    let lambdas = match stability::uhr_lambda_certify(
        &weight,
        &built.problem.psi,
        &built.problem.ord,
        &built.grid,
        stability::DEFAULT_LAMBDA_CAP,
    ) {
        Ok(l) => l,
        Err(e) => return fail(stability_code(&e), "lambda", e),
    };
    let rassias = RassiasWeight {
        phi_w: weight.clone(),
        lambdas: Some(lambdas),
    };
    let mode = match epsilon.or(section.epsilon) {
        Some(eps) => PerturbMode::UhrEps { epsilon: eps },
        None => PerturbMode::Uhr,
    };
    let mut runs = Vec::with_capacity(draws);
    for k in 0..draws {
        let seed = base_seed + k as u64;
        let pert = match Perturbation::random_trig(mode, &built.grid, 6, seed, Some(&weight), 4)
        {
            Ok(p) => p,
            Err(e) => return fail(stability_code(&e), "perturbation", e),
        };
        match stability::uhr_certify(
            &built.problem,
            &rassias,
            &pert,
            &built.grid,
            tol,
            max_iter,
            psi_sup,
            built.ml_order,
            section.uhr_indices,
            Some(seed),
        ) {
            Ok(r) => runs.push(r),
            Err(e) => return fail(stability_code(&e), "stability", e),
        }
    }
    let mut config = built.resolved.clone();
    config.seed = Some(base_seed);
    config.tol = Some(tol);
    config.max_iter = Some(max_iter);
    config.stability = Some(StabilitySection {
        epsilon: mode.epsilon(),
        draws: Some(draws),
        weight: Some(weight_src),
        psi_sup,
        uhr_indices: section.uhr_indices,
    });
    let report = BatchReport {
        schema: "psifrac-stability-report/1",
        timestamp: unix_timestamp(),
        mode: mode.name().into(),
        epsilon: mode.epsilon(),
        draws,
        base_seed,
        all_pass: runs.iter().all(|r| r.pass),
        all_converged: runs.iter().all(|r| r.v_converged && r.u_converged),
        config,
        runs,
    };
    if let Err(e) = emit_report(&report, common.out.as_ref()) {
        return fail(EXIT_NUMERICAL, "io", e);
    }
    report_exit(&report)
}
