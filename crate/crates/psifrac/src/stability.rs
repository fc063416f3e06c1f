//! Perturbed solves, stability constants and certificates.
//!
//! A perturbed problem replaces the right-hand side f by f + g. Depending on
//! the mode, |g| is bounded by a constant ε (Ulam-Hyers), by a positive
//! increasing weight φ_w(x, y) (Ulam-Hyers-Rassias), or by ε·φ_w. The
//! certificate pipeline:
//!
//! 1. solve the g-augmented system for v = (v, v₁, v₂);
//! 2. solve the unperturbed system for u with traces matched to v, i.e. the
//!    trace data of u's fixed-point rows are v's sampled boundary rows;
//! 3. measure the gaps (sup-norm for UH, pointwise/φ_w for UHR) and compare
//!    against the explicit constants built from the Mittag-Leffler function.
//!
//! The theorems guarantee the inequalities, not tightness, so a certificate
//! fails only when a gap exceeds its bound beyond the reported numerical
//! slack (10× the solver tolerance plus the estimated quadrature error).
//!
//! The Mittag-Leffler order entering the constants is written with a vector
//! α = (α₁, α₂) in the usual statements without a scalar reading; the
//! [`MlOrder`] switch pins it and every report records the choice. `Axis`
//! (default) uses min(α₁, α₂) for the u-row constant — the conservative
//! choice — and the row's own integration axis for the derivative rows.
//! The Γ/exponent index pairing of the UHR derivative-row constants is
//! likewise switchable ([`UhrIndices`]) and reports carry both pairings.

use crate::darboux::{
    self, expr_rhs, DarbouxProblem, GridTriple, InitialIterate, IterationLog, SolveError,
    TraceData,
};
use crate::exprdsl::{parse, EvalError, Expr};
use crate::fracops::{self, Axis, FracError, FracOrder, GammaRule};
use crate::grid::{Grid2D, GridFn};
use crate::oracle::{self, OracleError};
use crate::psi::PsiFunction;
use crate::specfun::{self, MlParams, SpecFunError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("perturbation bound violated at ({x}, {y}): |g| = {got} exceeds {allowed}")]
    BoundViolated {
        x: f64,
        y: f64,
        got: f64,
        allowed: f64,
    },
    #[error("Rassias weight must be positive: phi_w({x}, {y}) = {value}")]
    NonpositiveWeight { x: f64, y: f64, value: f64 },
    #[error("Rassias weight must be increasing in each coordinate; decrease found at ({x}, {y})")]
    NonIncreasingWeight { x: f64, y: f64 },
    #[error("lambda ratio for {which} looks unbounded: {ratio} exceeds cap {cap}")]
    LambdaCapExceeded {
        which: &'static str,
        ratio: f64,
        cap: f64,
    },
    #[error("Rassias certificates need a bounded psi: {0}")]
    UnboundedPsi(String),
    #[error("Rassias weight is not lambda-certified; run the lambda certification first")]
    UncertifiedWeight,
    #[error("perturbation mode {got} does not match the requested certificate {want}")]
    ModeMismatch {
        got: &'static str,
        want: &'static str,
    },
}

// --- Mittag-Leffler order policy ------------------------------------------

/// Scalar order used inside E_α when a constant involves both axis orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MlOrder {
    /// min(α₁, α₂) for the u-row constant; each derivative row uses its own
    /// integration axis order.
    #[default]
    Axis,
    /// min(α₁, α₂) everywhere (the largest, most conservative bounds).
    Min,
    /// max(α₁, α₂) everywhere.
    Max,
}

impl MlOrder {
    fn c1(self, ord: &FracOrder) -> f64 {
        match self {
            MlOrder::Axis | MlOrder::Min => ord.alpha1().min(ord.alpha2()),
            MlOrder::Max => ord.alpha1().max(ord.alpha2()),
        }
    }

    fn c2(self, ord: &FracOrder) -> f64 {
        match self {
            MlOrder::Axis => ord.alpha2(),
            MlOrder::Min => ord.alpha1().min(ord.alpha2()),
            MlOrder::Max => ord.alpha1().max(ord.alpha2()),
        }
    }

    fn c3(self, ord: &FracOrder) -> f64 {
        match self {
            MlOrder::Axis => ord.alpha1(),
            MlOrder::Min => ord.alpha1().min(ord.alpha2()),
            MlOrder::Max => ord.alpha1().max(ord.alpha2()),
        }
    }
}

/// Index pairing for the UHR derivative-row constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UhrIndices {
    /// Printed pairing: the v₁-row constant carries Γ(α₁) and (ψ∞-ψ0)^α₁
    /// even though that row integrates along axis 2 (and vice versa).
    #[default]
    Paper,
    /// Each derivative row paired with its own integration axis.
    Swapped,
}

// --- Ulam-Hyers constants ---------------------------------------------------

fn ml(order: f64, z: f64) -> Result<f64, SpecFunError> {
    specfun::mittag_leffler(&MlParams::new(order, z)?)
}

/// The three Ulam-Hyers constants
///
/// ```text
/// C¹ = P_a·P_b/(Γ(α₁+1)Γ(α₂+1)) · E[L_f·Γ(α₁)·Γ(α₂)·P_a·P_b]
/// C² = P_b/Γ(α₂+1) · E[L_f·Γ(α₂)·P_b]
/// C³ = P_a/Γ(α₁+1) · E[L_f·Γ(α₁)·P_a]
/// ```
///
/// with P_a = (ψ(a)-ψ(0))^α₁ and P_b = (ψ(b)-ψ(0))^α₂. At α₁ = α₂ = 1 and
/// ψ = identity these reduce to (ab·e^{L_f·ab}, b·e^{L_f·b}, a·e^{L_f·a}).
pub fn uh_constants(
    lf: f64,
    psi: &PsiFunction,
    ord: &FracOrder,
    a: f64,
    b: f64,
    ml_order: MlOrder,
) -> Result<(f64, f64, f64), StabilityError> {
    let psi0 = psi.value(0.0);
    let pa = (psi.value(a) - psi0).powf(ord.alpha1());
    let pb = (psi.value(b) - psi0).powf(ord.alpha2());
    let g1 = specfun::gamma(ord.alpha1())?;
    let g2 = specfun::gamma(ord.alpha2())?;
    let g1p = specfun::gamma(ord.alpha1() + 1.0)?;
    let g2p = specfun::gamma(ord.alpha2() + 1.0)?;
    let c1 = pa * pb / (g1p * g2p) * ml(ml_order.c1(ord), lf * g1 * g2 * pa * pb)?;
    let c2 = pb / g2p * ml(ml_order.c2(ord), lf * g2 * pb)?;
    let c3 = pa / g1p * ml(ml_order.c3(ord), lf * g1 * pa)?;
    Ok((c1, c2, c3))
}

// --- perturbations -----------------------------------------------------------

/// Bound mode for the perturbation g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbMode {
    /// |g| ≤ ε.
    Uh { epsilon: f64 },
    /// |g| ≤ φ_w(x, y).
    Uhr,
    /// |g| ≤ ε·φ_w(x, y).
    UhrEps { epsilon: f64 },
}

impl PerturbMode {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbMode::Uh { .. } => "uh",
            PerturbMode::Uhr => "uhr",
            PerturbMode::UhrEps { .. } => "uhr_eps",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            PerturbMode::Uh { epsilon } | PerturbMode::UhrEps { epsilon } => Some(*epsilon),
            PerturbMode::Uhr => None,
        }
    }
}

/// A perturbation g(x, y) with its bound mode. The bound is checked on
/// sampled grids, never assumed.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub g: Expr,
    pub mode: PerturbMode,
}

impl Perturbation {
    fn allowed_at(&self, x: f64, y: f64, weight: Option<&Expr>) -> Result<f64, StabilityError> {
        Ok(match self.mode {
            PerturbMode::Uh { epsilon } => epsilon,
            PerturbMode::Uhr => weight
                .ok_or(StabilityError::UncertifiedWeight)?
                .eval(&[x, y])?,
            PerturbMode::UhrEps { epsilon } => {
                epsilon
                    * weight
                        .ok_or(StabilityError::UncertifiedWeight)?
                        .eval(&[x, y])?
            }
        })
    }

    /// Checks the mode bound at every node of the grid. `weight` supplies
    /// φ_w for the Rassias modes.
    pub fn verify_bound(
        &self,
        grid: &Arc<Grid2D>,
        weight: Option<&Expr>,
    ) -> Result<(), StabilityError> {
        for &x in grid.xs() {
            for &y in grid.ys() {
                let gv = self.g.eval(&[x, y])?.abs();
                let allowed = self.allowed_at(x, y, weight)?;
                // one-ulp headroom so an exactly scaled draw passes
                if gv > allowed * (1.0 + 1e-12) {
                    return Err(StabilityError::BoundViolated {
                        x,
                        y,
                        got: gv,
                        allowed,
                    });
                }
            }
        }
        Ok(())
    }

    /// Draws a random trigonometric polynomial and scales its coefficients
    /// so the mode bound is attained (with a 1e-9 safety factor) on a check
    /// set consisting of the operating grid's nodes plus a finer uniform
    /// refinement. The draw is fully determined by the seed.
    pub fn random_trig(
        mode: PerturbMode,
        grid: &Arc<Grid2D>,
        terms: usize,
        seed: u64,
        weight: Option<&Expr>,
        refine: usize,
    ) -> Result<Perturbation, StabilityError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = terms.max(1);
        let mut params = Vec::with_capacity(terms);
        for _ in 0..terms {
            let c: f64 = rng.random_range(-1.0..=1.0);
            let wx: f64 = rng.random_range(0.5..8.0);
            let wy: f64 = rng.random_range(0.5..8.0);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            params.push((c, wx, wy, phase));
        }
        let render = |params: &[(f64, f64, f64, f64)]| -> String {
            params
                .iter()
                .map(|(c, wx, wy, ph)| {
                    format!("({c:e}) * sin(({wx:e})*x + ({wy:e})*y + ({ph:e}))")
                })
                .collect::<Vec<_>>()
                .join(" + ")
        };
        let raw = parse(&render(&params), &["x", "y"]).expect("generated source is well-formed");
        let probe = Perturbation { g: raw, mode };
        let (a, b) = (grid.x_extent(), grid.y_extent());
        let n = (refine.max(2) * grid.nx().max(grid.ny())).max(64);
        let mut xs: Vec<f64> = (0..n).map(|i| a * i as f64 / (n - 1) as f64).collect();
        let mut ys: Vec<f64> = (0..n).map(|j| b * j as f64 / (n - 1) as f64).collect();
        xs.extend_from_slice(grid.xs());
        ys.extend_from_slice(grid.ys());
        let mut worst = 0.0f64;
        for &x in &xs {
            for &y in &ys {
                let allowed = probe.allowed_at(x, y, weight)?;
                if !(allowed > 0.0) {
                    return Err(StabilityError::NonpositiveWeight {
                        x,
                        y,
                        value: allowed,
                    });
                }
                worst = worst.max(probe.g.eval(&[x, y])?.abs() / allowed);
            }
        }
        let scale = if worst > 0.0 { (1.0 - 1e-9) / worst } else { 1.0 };
        for p in &mut params {
            p.0 *= scale;
        }
        let g = parse(&render(&params), &["x", "y"]).expect("generated source is well-formed");
        Ok(Perturbation { g, mode })
    }
}

/// Solves the g-augmented system (f replaced by f + g) with the problem's
/// own traces. With g ≡ 0 this coincides with [`darboux::picard_solve`].
pub fn build_perturbed(
    p: &DarbouxProblem,
    pert: &Perturbation,
    grid: &Arc<Grid2D>,
    tol: f64,
    max_iter: usize,
    weight: Option<&Expr>,
) -> Result<(GridTriple, IterationLog), StabilityError> {
    pert.verify_bound(grid, weight)?;
    p.validate().map_err(StabilityError::Solve)?;
    let traces = darboux::sample_traces(p, grid)?;
    let f = &p.f;
    let g = &pert.g;
    let rhs = move |x: f64, y: f64, u: f64, p_: f64, q: f64| -> Result<f64, EvalError> {
        Ok(f.eval(&[x, y, u, p_, q])? + g.eval(&[x, y])?)
    };
    let out = darboux::solve_system(
        &rhs,
        &traces,
        &p.ord,
        &p.psi,
        grid,
        p.tau,
        tol,
        max_iter,
        InitialIterate::TraceOnly,
    )?;
    Ok(out)
}

// --- integral-inequality residuals -----------------------------------------

/// Worst-node margins (rhs - lhs) of the three integral inequalities a
/// perturbed solution must satisfy; margins at or above -slack mean the
/// inequality holds at every node.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct TeResiduals {
    pub row_u: f64,
    pub row_u1: f64,
    pub row_u2: f64,
}

fn sample_f_at(
    p: &DarbouxProblem,
    v: &GridTriple,
    with_g: Option<&Expr>,
) -> Result<GridFn, StabilityError> {
    let grid = v.u.grid();
    let mut values = Vec::with_capacity(grid.nx() * grid.ny());
    for (i, &x) in grid.xs().iter().enumerate() {
        for (j, &y) in grid.ys().iter().enumerate() {
            let mut fv = p.f.eval(&[x, y, v.u.at(i, j), v.u1.at(i, j), v.u2.at(i, j)])?;
            if let Some(g) = with_g {
                fv += g.eval(&[x, y])?;
            }
            values.push(fv);
        }
    }
    Ok(GridFn::from_values(grid, values).map_err(FracError::Grid)?)
}

/// Evaluates the left sides of the three integral inequalities at every
/// node against the mode's right sides and returns the worst margins.
pub fn te_residuals(
    v: &GridTriple,
    p: &DarbouxProblem,
    pert: &Perturbation,
    weight: Option<&Expr>,
) -> Result<TeResiduals, StabilityError> {
    let grid = v.u.grid().clone();
    let gamma = p.ord.gamma();
    let wx = darboux::gamma_weights(&p.psi, grid.xs(), gamma)?;
    let wy = darboux::gamma_weights(&p.psi, grid.ys(), gamma)?;
    let f_grid = sample_f_at(p, v, None)?;
    let i2 = fracops::frac_integral_2d(&f_grid, &p.psi, &p.ord)?;
    let iy = fracops::frac_integral_axis(&f_grid, &p.psi, p.ord.alpha2(), Axis::Y)?;
    let ix = fracops::frac_integral_axis(&f_grid, &p.psi, p.ord.alpha1(), Axis::X)?;
    let (rhs_2d, rhs_y, rhs_x) = match pert.mode {
        PerturbMode::Uh { epsilon } => {
            let r2 = GridFn::try_from_fn(&grid, |x, y| {
                oracle::unit_integral_2d(&p.ord, &p.psi, (0.0, 0.0), (x, y)).map(|v| epsilon * v)
            })?
            .map_err(FracError::Grid)?;
            let ry = GridFn::try_from_fn(&grid, |_, y| {
                oracle::power_integral_1d(p.ord.alpha2(), 1.0, &p.psi, 0.0, y)
                    .map(|v| epsilon * v)
            })?
            .map_err(FracError::Grid)?;
            let rx = GridFn::try_from_fn(&grid, |x, _| {
                oracle::power_integral_1d(p.ord.alpha1(), 1.0, &p.psi, 0.0, x)
                    .map(|v| epsilon * v)
            })?
            .map_err(FracError::Grid)?;
            (r2, ry, rx)
        }
        PerturbMode::Uhr | PerturbMode::UhrEps { .. } => {
            let w_expr = weight.ok_or(StabilityError::UncertifiedWeight)?;
            let w_grid =
                GridFn::try_from_fn(&grid, |x, y| w_expr.eval(&[x, y]))?.map_err(FracError::Grid)?;
            let scale = pert.mode.epsilon().unwrap_or(1.0);
            let mut r2 = fracops::frac_integral_2d(&w_grid, &p.psi, &p.ord)?;
            let mut ry = fracops::frac_integral_axis(&w_grid, &p.psi, p.ord.alpha2(), Axis::Y)?;
            let mut rx = fracops::frac_integral_axis(&w_grid, &p.psi, p.ord.alpha1(), Axis::X)?;
            for v in r2
                .values_mut()
                .iter_mut()
                .chain(ry.values_mut())
                .chain(rx.values_mut())
            {
                *v *= scale;
            }
            (r2, ry, rx)
        }
    };
    let mut m_u = f64::INFINITY;
    let mut m_u1 = f64::INFINITY;
    let mut m_u2 = f64::INFINITY;
    for (i, &wxi) in wx.iter().enumerate() {
        for (j, &wyj) in wy.iter().enumerate() {
            let lhs_u = (v.u.at(i, j) - wyj * v.u.at(i, 0) - wxi * v.u.at(0, j)
                + v.u.at(0, 0)
                - i2.at(i, j))
            .abs();
            let lhs_u1 = (v.u1.at(i, j) - wyj * v.u1.at(i, 0) - iy.at(i, j)).abs();
            let lhs_u2 = (v.u2.at(i, j) - wxi * v.u2.at(0, j) - ix.at(i, j)).abs();
            m_u = m_u.min(rhs_2d.at(i, j) - lhs_u);
            m_u1 = m_u1.min(rhs_y.at(i, j) - lhs_u1);
            m_u2 = m_u2.min(rhs_x.at(i, j) - lhs_u2);
        }
    }
    Ok(TeResiduals {
        row_u: m_u,
        row_u1: m_u1,
        row_u2: m_u2,
    })
}

// --- quadrature error estimate ----------------------------------------------

/// Richardson-style estimate: the 2D and axis rules on every other node
/// against the fine rule, sup over shared nodes, worst of the three
/// operators.
pub(crate) fn quad_error_estimate(
    f_grid: &GridFn,
    psi: &PsiFunction,
    ord: &FracOrder,
) -> Result<f64, StabilityError> {
    let grid = f_grid.grid();
    let coarse_xs: Vec<f64> = grid.xs().iter().copied().step_by(2).collect();
    let coarse_ys: Vec<f64> = grid.ys().iter().copied().step_by(2).collect();
    if coarse_xs.len() < 2 || coarse_ys.len() < 2 {
        return Ok(0.0);
    }
    let coarse_grid = Grid2D::from_nodes(coarse_xs, coarse_ys).map_err(FracError::Grid)?;
    let mut coarse_vals = Vec::with_capacity(coarse_grid.nx() * coarse_grid.ny());
    for ic in 0..coarse_grid.nx() {
        for jc in 0..coarse_grid.ny() {
            coarse_vals.push(f_grid.at(2 * ic, 2 * jc));
        }
    }
    let coarse_f = GridFn::from_values(&coarse_grid, coarse_vals).map_err(FracError::Grid)?;
    let pairs: [(GridFn, GridFn); 3] = [
        (
            fracops::frac_integral_2d(f_grid, psi, ord)?,
            fracops::frac_integral_2d(&coarse_f, psi, ord)?,
        ),
        (
            fracops::frac_integral_axis(f_grid, psi, ord.alpha2(), Axis::Y)?,
            fracops::frac_integral_axis(&coarse_f, psi, ord.alpha2(), Axis::Y)?,
        ),
        (
            fracops::frac_integral_axis(f_grid, psi, ord.alpha1(), Axis::X)?,
            fracops::frac_integral_axis(&coarse_f, psi, ord.alpha1(), Axis::X)?,
        ),
    ];
    let mut worst = 0.0f64;
    for (fine, coarse) in &pairs {
        for ic in 0..coarse_grid.nx() {
            for jc in 0..coarse_grid.ny() {
                worst = worst.max((fine.at(2 * ic, 2 * jc) - coarse.at(ic, jc)).abs());
            }
        }
    }
    Ok(worst)
}

// --- certificates -------------------------------------------------------------

/// Everything a certificate run measured and concluded.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub mode: String,
    pub epsilon: Option<f64>,
    pub constants: [f64; 3],
    /// UHR only: the derivative-row constants under the other index pairing.
    pub constants_other_indices: Option<[f64; 2]>,
    pub uhr_indices: Option<UhrIndices>,
    pub lambdas: Option<[f64; 3]>,
    /// sup |v - u|, sup |v₁ - u₁|, sup |v₂ - u₂|.
    pub sup_gaps: [f64; 3],
    /// UH: ε·Cⁱ. UHR: min over nodes of Cⁱ·φ_w (the tightest pointwise cap).
    pub caps: [f64; 3],
    /// UHR only: min over nodes of Cⁱ·φ_w + slack - |gap|; nonnegative means
    /// the pointwise inequality holds everywhere.
    pub pointwise_margins: Option<[f64; 3]>,
    pub per_inequality_pass: [bool; 3],
    pub pass: bool,
    /// Worst-node margins of the integral-inequality system for v.
    pub te_margins: TeResiduals,
    /// Additive certificate slack: 10·(solver tol + quadrature estimate).
    pub slack: f64,
    pub quad_error_estimate: f64,
    pub gamma_rule: GammaRule,
    pub gamma: f64,
    pub ml_order: MlOrder,
    pub boundary_extrapolated: bool,
    pub v_converged: bool,
    pub v_iterations: usize,
    pub u_converged: bool,
    pub u_iterations: usize,
    pub solver_tol: f64,
    pub bielecki_tau: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub g_source: String,
    pub seed: Option<u64>,
    /// Far-corner value of the first step of the Gronwall chain (the
    /// integral-inequality bound) and of its Mittag-Leffler majorant.
    pub te_bound_far_corner: f64,
    pub gronwall_majorant: f64,
}

/// Matched traces for the comparison solution: u's trace data are v's
/// sampled boundary rows, so the trace terms cancel in the gap.
fn matched_traces(v: &GridTriple) -> TraceData {
    let grid = v.u.grid();
    TraceData {
        phi: (0..grid.nx()).map(|i| v.u.at(i, 0)).collect(),
        xi: (0..grid.ny()).map(|j| v.u.at(0, j)).collect(),
        phi1: (0..grid.nx()).map(|i| v.u1.at(i, 0)).collect(),
        xi2: (0..grid.ny()).map(|j| v.u2.at(0, j)).collect(),
        corner: v.u.at(0, 0),
    }
}

fn solve_matched(
    p: &DarbouxProblem,
    v: &GridTriple,
    grid: &Arc<Grid2D>,
    tol: f64,
    max_iter: usize,
) -> Result<(GridTriple, IterationLog), StabilityError> {
    let traces = matched_traces(v);
    let rhs = expr_rhs(&p.f);
    let out = darboux::solve_system(
        &rhs,
        &traces,
        &p.ord,
        &p.psi,
        grid,
        p.tau,
        tol,
        max_iter,
        InitialIterate::TraceOnly,
    )?;
    Ok(out)
}

/// Runs the full Ulam-Hyers certificate for one perturbation.
pub fn uh_certify(
    p: &DarbouxProblem,
    pert: &Perturbation,
    grid: &Arc<Grid2D>,
    tol: f64,
    max_iter: usize,
    ml_order: MlOrder,
    seed: Option<u64>,
) -> Result<StabilityReport, StabilityError> {
    let PerturbMode::Uh { epsilon } = pert.mode else {
        return Err(StabilityError::ModeMismatch {
            got: pert.mode.name(),
            want: "uh",
        });
    };
    let (v, v_log) = build_perturbed(p, pert, grid, tol, max_iter, None)?;
    let (u, u_log) = solve_matched(p, &v, grid, tol, max_iter)?;
    let gaps = [
        v.u.sup_diff(&u.u),
        v.u1.sup_diff(&u.u1),
        v.u2.sup_diff(&u.u2),
    ];
    let (c1, c2, c3) = uh_constants(p.lf, &p.psi, &p.ord, p.a, p.b, ml_order)?;
    let quad_est = quad_error_estimate(&sample_f_at(p, &v, Some(&pert.g))?, &p.psi, &p.ord)?;
    let slack = 10.0 * (tol + quad_est);
    let caps = [epsilon * c1, epsilon * c2, epsilon * c3];
    let per_inequality_pass = [
        gaps[0] <= caps[0] + slack,
        gaps[1] <= caps[1] + slack,
        gaps[2] <= caps[2] + slack,
    ];
    let te_margins = te_residuals(&v, p, pert, None)?;
    let te_bound_far_corner =
        epsilon * oracle::unit_integral_2d(&p.ord, &p.psi, (0.0, 0.0), (p.a, p.b))?;
    Ok(StabilityReport {
        mode: "uh".into(),
        epsilon: Some(epsilon),
        constants: [c1, c2, c3],
        constants_other_indices: None,
        uhr_indices: None,
        lambdas: None,
        sup_gaps: gaps,
        caps,
        pointwise_margins: None,
        per_inequality_pass,
        pass: per_inequality_pass.iter().all(|b| *b) && v_log.converged && u_log.converged,
        te_margins,
        slack,
        quad_error_estimate: quad_est,
        gamma_rule: p.ord.gamma_rule(),
        gamma: p.ord.gamma(),
        ml_order,
        boundary_extrapolated: p.ord.gamma() < 1.0,
        v_converged: v_log.converged,
        v_iterations: v_log.steps.len(),
        u_converged: u_log.converged,
        u_iterations: u_log.steps.len(),
        solver_tol: tol,
        bielecki_tau: p.tau,
        grid_nx: grid.nx(),
        grid_ny: grid.ny(),
        g_source: pert.g.render(),
        seed,
        te_bound_far_corner,
        gronwall_majorant: caps[0],
    })
}

/// Certifies the Rassias-weight hypothesis: the λⁱ are the grid maxima of
/// the weighted-integral-to-weight ratios. Fails when the weight is
/// nonpositive or decreasing at a node, or a ratio exceeds the cap.
pub fn uhr_lambda_certify(
    phi_w: &Expr,
    psi: &PsiFunction,
    ord: &FracOrder,
    grid: &Arc<Grid2D>,
    cap: f64,
) -> Result<(f64, f64, f64), StabilityError> {
    let mut values = Vec::with_capacity(grid.nx() * grid.ny());
    for &x in grid.xs() {
        for &y in grid.ys() {
            let v = phi_w.eval(&[x, y])?;
            if !(v > 0.0) {
                return Err(StabilityError::NonpositiveWeight { x, y, value: v });
            }
            values.push(v);
        }
    }
    let w_grid = GridFn::from_values(grid, values).map_err(FracError::Grid)?;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            if i + 1 < grid.nx() && w_grid.at(i + 1, j) < w_grid.at(i, j) {
                return Err(StabilityError::NonIncreasingWeight {
                    x: grid.xs()[i + 1],
                    y: grid.ys()[j],
                });
            }
            if j + 1 < grid.ny() && w_grid.at(i, j + 1) < w_grid.at(i, j) {
                return Err(StabilityError::NonIncreasingWeight {
                    x: grid.xs()[i],
                    y: grid.ys()[j + 1],
                });
            }
        }
    }
    let i2 = fracops::frac_integral_2d(&w_grid, psi, ord)?;
    let iy = fracops::frac_integral_axis(&w_grid, psi, ord.alpha2(), Axis::Y)?;
    let ix = fracops::frac_integral_axis(&w_grid, psi, ord.alpha1(), Axis::X)?;
    let mut l = [0.0f64; 3];
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let w = w_grid.at(i, j);
            l[0] = l[0].max(i2.at(i, j) / w);
            l[1] = l[1].max(iy.at(i, j) / w);
            l[2] = l[2].max(ix.at(i, j) / w);
        }
    }
    for (which, lv) in [("lambda1", l[0]), ("lambda2", l[1]), ("lambda3", l[2])] {
        if !lv.is_finite() || lv > cap {
            return Err(StabilityError::LambdaCapExceeded {
                which,
                ratio: lv,
                cap,
            });
        }
    }
    Ok((l[0], l[1], l[2]))
}

/// A positive, coordinate-wise increasing Rassias weight with (optionally)
/// certified λ ratios.
#[derive(Debug, Clone)]
pub struct RassiasWeight {
    pub phi_w: Expr,
    pub lambdas: Option<(f64, f64, f64)>,
}

pub const DEFAULT_LAMBDA_CAP: f64 = 1e6;

/// Runs the generalized Ulam-Hyers-Rassias certificate. The weight must be
/// λ-certified beforehand and ψ must come with a finite supremum (supplied,
/// or known a priori as for the bounded builtin).
#[allow(clippy::too_many_arguments)]
pub fn uhr_certify(
    p: &DarbouxProblem,
    w: &RassiasWeight,
    pert: &Perturbation,
    grid: &Arc<Grid2D>,
    tol: f64,
    max_iter: usize,
    psi_sup: Option<f64>,
    ml_order: MlOrder,
    indices: UhrIndices,
    seed: Option<u64>,
) -> Result<StabilityReport, StabilityError> {
    if !matches!(pert.mode, PerturbMode::Uhr | PerturbMode::UhrEps { .. }) {
        return Err(StabilityError::ModeMismatch {
            got: pert.mode.name(),
            want: "uhr",
        });
    }
    let Some((l1, l2, l3)) = w.lambdas else {
        return Err(StabilityError::UncertifiedWeight);
    };
    let sup = match psi_sup.or_else(|| p.psi.known_sup()) {
        Some(s) if s.is_finite() => s,
        Some(s) => {
            return Err(StabilityError::UnboundedPsi(format!(
                "supplied psi_sup = {s} is not finite"
            )))
        }
        None => {
            return Err(StabilityError::UnboundedPsi(format!(
                "psi `{}` has no known finite supremum and none was supplied",
                p.psi.label()
            )))
        }
    };
    let far = p.psi.value(p.a.max(p.b));
    if far > sup * (1.0 + 1e-12) {
        return Err(StabilityError::UnboundedPsi(format!(
            "psi reaches {far} on the grid, above the supplied supremum {sup}"
        )));
    }
    let (v, v_log) = build_perturbed(p, pert, grid, tol, max_iter, Some(&w.phi_w))?;
    let (u, u_log) = solve_matched(p, &v, grid, tol, max_iter)?;
    let span = sup - p.psi.value(0.0);
    let g1 = specfun::gamma(p.ord.alpha1())?;
    let g2 = specfun::gamma(p.ord.alpha2())?;
    let s1 = span.powf(p.ord.alpha1());
    let s2 = span.powf(p.ord.alpha2());
    let c1 = l1 * ml(ml_order.c1(&p.ord), p.lf * g1 * g2 * s1 * s2)?;
    // printed pairing carries the axis-1 factors in the u₁-row constant
    let c2_paper = l2 * ml(ml_order.c2(&p.ord), p.lf * g1 * s1)?;
    let c3_paper = l3 * ml(ml_order.c3(&p.ord), p.lf * g2 * s2)?;
    let c2_swapped = l2 * ml(ml_order.c2(&p.ord), p.lf * g2 * s2)?;
    let c3_swapped = l3 * ml(ml_order.c3(&p.ord), p.lf * g1 * s1)?;
    let (c2, c3, other) = match indices {
        UhrIndices::Paper => (c2_paper, c3_paper, [c2_swapped, c3_swapped]),
        UhrIndices::Swapped => (c2_swapped, c3_swapped, [c2_paper, c3_paper]),
    };
    let quad_est =
        quad_error_estimate(&sample_f_at(p, &v, Some(&pert.g))?, &p.psi, &p.ord)?;
    let slack = 10.0 * (tol + quad_est);
    let consts = [c1, c2, c3];
    let mut margins = [f64::INFINITY; 3];
    let mut caps = [f64::INFINITY; 3];
    for (i, &x) in grid.xs().iter().enumerate() {
        for (j, &y) in grid.ys().iter().enumerate() {
            let wv = w.phi_w.eval(&[x, y])?;
            let gap = [
                (v.u.at(i, j) - u.u.at(i, j)).abs(),
                (v.u1.at(i, j) - u.u1.at(i, j)).abs(),
                (v.u2.at(i, j) - u.u2.at(i, j)).abs(),
            ];
            for k in 0..3 {
                margins[k] = margins[k].min(consts[k] * wv + slack - gap[k]);
                caps[k] = caps[k].min(consts[k] * wv);
            }
        }
    }
    let per_inequality_pass = [margins[0] >= 0.0, margins[1] >= 0.0, margins[2] >= 0.0];
    let te_margins = te_residuals(&v, p, pert, Some(&w.phi_w))?;
    let far_w = w.phi_w.eval(&[p.a, p.b])?;
    Ok(StabilityReport {
        mode: pert.mode.name().into(),
        epsilon: pert.mode.epsilon(),
        constants: consts,
        constants_other_indices: Some(other),
        uhr_indices: Some(indices),
        lambdas: Some([l1, l2, l3]),
        sup_gaps: [
            v.u.sup_diff(&u.u),
            v.u1.sup_diff(&u.u1),
            v.u2.sup_diff(&u.u2),
        ],
        caps,
        pointwise_margins: Some(margins),
        per_inequality_pass,
        pass: per_inequality_pass.iter().all(|b| *b) && v_log.converged && u_log.converged,
        te_margins,
        slack,
        quad_error_estimate: quad_est,
        gamma_rule: p.ord.gamma_rule(),
        gamma: p.ord.gamma(),
        ml_order,
        boundary_extrapolated: p.ord.gamma() < 1.0,
        v_converged: v_log.converged,
        v_iterations: v_log.steps.len(),
        u_converged: u_log.converged,
        u_iterations: u_log.steps.len(),
        solver_tol: tol,
        bielecki_tau: p.tau,
        grid_nx: grid.nx(),
        grid_ny: grid.ny(),
        g_source: pert.g.render(),
        seed,
        te_bound_far_corner: l1 * far_w,
        gronwall_majorant: c1 * far_w,
    })
}

// --- batch driver --------------------------------------------------------------

/// Runs `draws` seeded UH certificates (seeds seed, seed+1, …) on up to
/// `threads` workers. Reports come back in draw order regardless of the
/// worker count, so batch output is deterministic.
#[allow(clippy::too_many_arguments)]
pub fn uh_certify_batch(
    p: &DarbouxProblem,
    epsilon: f64,
    draws: usize,
    base_seed: u64,
    grid: &Arc<Grid2D>,
    tol: f64,
    max_iter: usize,
    ml_order: MlOrder,
    threads: usize,
) -> Result<Vec<StabilityReport>, StabilityError> {
    let threads = threads.max(1);
    let chunk_size = draws.div_ceil(threads).max(1);
    let mut results: Vec<Option<Result<StabilityReport, StabilityError>>> =
        (0..draws).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (chunk_idx, chunk) in results.chunks_mut(chunk_size).enumerate() {
            let first = chunk_idx * chunk_size;
            scope.spawn(move || {
                for (off, slot) in chunk.iter_mut().enumerate() {
                    let seed = base_seed + (first + off) as u64;
                    let run = Perturbation::random_trig(
                        PerturbMode::Uh { epsilon },
                        grid,
                        6,
                        seed,
                        None,
                        4,
                    )
                    .and_then(|pert| {
                        uh_certify(p, &pert, grid, tol, max_iter, ml_order, Some(seed))
                    });
                    *slot = Some(run);
                }
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every slot filled by a worker"))
        .collect()
}
