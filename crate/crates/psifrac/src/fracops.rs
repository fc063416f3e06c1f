//! ψ-Riemann-Liouville fractional integrals and ψ-Hilfer fractional
//! derivatives (1D, per-axis, and 2D tensor-product).
//!
//! # Quadrature
//!
//! The left-sided integral
//!
//! ```text
//! I^{α;ψ}_{a+} f(x) = (1/Γ(α)) ∫_a^x ψ'(s) (ψ(x) - ψ(s))^(α-1) f(s) ds
//! ```
//!
//! is computed by product integration in the transformed variable w = ψ(s):
//! the regular factor f is interpolated piecewise-linearly in w between the
//! nodes, and the weakly singular kernel (ψ(x) - w)^(α-1) dw is integrated
//! in closed form against each linear piece. The endpoint singularity is
//! therefore handled analytically, all quadrature weights are nonnegative by
//! construction, and the rule is exact whenever f is piecewise linear in w —
//! in particular for constants, which makes the 2D unit-integral identity
//! hold to roundoff.
//!
//! # Derivatives
//!
//! The ψ-Hilfer derivative of order α and type β follows its definition
//! literally: fractional integral of order (1-β)(1-α), then the weighted
//! derivative (1/ψ') d/dt (finite differences: 3-point central in the
//! interior, 3-point one-sided at the endpoints), then a fractional integral
//! of order β(1-α). Order-0 integrals are the identity. The finite-difference
//! middle stage is the accuracy bottleneck, which is why derivative
//! tolerances are looser than integral ones.

use crate::grid::{Grid2D, GridFn, GridError};
use crate::psi::PsiFunction;
use crate::specfun;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("{what} must lie in {range}, got {value}")]
    InvalidOrder {
        what: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("grid too coarse: {got} nodes per axis, need at least {min}")]
    GridTooCoarse { got: usize, min: usize },
    #[error("non-finite sample at t={t} while {context}")]
    NonFiniteSample { t: f64, context: &'static str },
    #[error("evaluation nodes must be strictly increasing and start at or after the base point")]
    BadNodes,
    #[error("sample array length {got} does not match node count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Rule used to derive the trace exponent γ from (α, β).
///
/// `Standard` is γ = ᾱ + β(1-ᾱ) with ᾱ = min(α₁, α₂); `Paper` is
/// γ = ᾱ + β(ᾱ-1). Both are exposed because printed sources disagree;
/// every report records which rule was active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GammaRule {
    #[default]
    Standard,
    Paper,
}

/// Per-axis fractional orders α₁, α₂ ∈ (0,1], type β ∈ [0,1] and the
/// derived trace exponent γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracOrder {
    alpha1: f64,
    alpha2: f64,
    beta: f64,
    #[serde(default)]
    gamma_rule: GammaRule,
}

impl FracOrder {
    pub fn new(alpha1: f64, alpha2: f64, beta: f64) -> Result<FracOrder, FracError> {
        for (what, v) in [("alpha1", alpha1), ("alpha2", alpha2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(FracError::InvalidOrder {
                    what,
                    range: "(0, 1]",
                    value: v,
                });
            }
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(FracError::InvalidOrder {
                what: "beta",
                range: "[0, 1]",
                value: beta,
            });
        }
        Ok(FracOrder {
            alpha1,
            alpha2,
            beta,
            gamma_rule: GammaRule::Standard,
        })
    }

    pub fn isotropic(alpha: f64, beta: f64) -> Result<FracOrder, FracError> {
        Self::new(alpha, alpha, beta)
    }

    pub fn with_gamma_rule(mut self, rule: GammaRule) -> FracOrder {
        self.gamma_rule = rule;
        self
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma_rule(&self) -> GammaRule {
        self.gamma_rule
    }

    /// Derived trace exponent. When α₁ ≠ α₂ the scalar α in the rule is
    /// taken as min(α₁, α₂).
    pub fn gamma(&self) -> f64 {
        let a = self.alpha1.min(self.alpha2);
        match self.gamma_rule {
            GammaRule::Standard => a + self.beta * (1.0 - a),
            GammaRule::Paper => a + self.beta * (a - 1.0),
        }
    }

    fn inner_orders(&self) -> (f64, f64) {
        (
            (1.0 - self.beta) * (1.0 - self.alpha1),
            (1.0 - self.beta) * (1.0 - self.alpha2),
        )
    }

    fn outer_orders(&self) -> (f64, f64) {
        (
            self.beta * (1.0 - self.alpha1),
            self.beta * (1.0 - self.alpha2),
        )
    }
}

/// Axis selector for the single-axis partial integrals (axis 1 holds the
/// first coordinate, axis 2 the second).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

pub const MIN_DERIVATIVE_NODES: usize = 32;

// --- product-integration weights ---------------------------------------

/// Lower-triangular quadrature weights in the transformed variable.
///
/// Row j holds weights over sources 0..=j such that
/// `I^{α}f(x_j) ≈ Σ_i rows[j][i]·f(x_i)`, including the 1/Γ(α) prefactor.
/// Exact for f piecewise linear in w = ψ(s); every weight is nonnegative.
fn product_weight_rows(w: &[f64], alpha: f64) -> Vec<Vec<f64>> {
    let n = w.len();
    let inv_gamma = 1.0 / specfun::gamma(alpha).expect("alpha validated positive");
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        rows.push(product_weight_row(w, j, alpha, inv_gamma));
    }
    rows
}

fn product_weight_row(w: &[f64], j: usize, alpha: f64, inv_gamma: f64) -> Vec<f64> {
    let target = w[j];
    let mut row = vec![0.0; j + 1];
    for i in 0..j {
        let u0 = target - w[i]; // > u1 >= 0
        let u1 = target - w[i + 1];
        let du = w[i + 1] - w[i];
        let p0 = u0.powf(alpha) - u1.powf(alpha);
        let m0 = p0 / alpha;
        let m1 = u0 * m0 - (u0.powf(alpha + 1.0) - u1.powf(alpha + 1.0)) / (alpha + 1.0);
        let right = m1 / du;
        row[i] += inv_gamma * (m0 - right);
        row[i + 1] += inv_gamma * right;
    }
    row
}

fn check_increasing(nodes: &[f64]) -> Result<(), FracError> {
    if nodes.len() < 2 || nodes.windows(2).any(|p| p[1] <= p[0]) {
        return Err(FracError::BadNodes);
    }
    Ok(())
}

fn psi_values(psi: &PsiFunction, nodes: &[f64]) -> Result<Vec<f64>, FracError> {
    let mut out = Vec::with_capacity(nodes.len());
    for &t in nodes {
        let v = psi.value(t);
        if !v.is_finite() {
            return Err(FracError::NonFiniteSample {
                t,
                context: "evaluating psi",
            });
        }
        out.push(v);
    }
    check_increasing(&out).map_err(|_| FracError::BadNodes)?;
    Ok(out)
}

fn validate_integral_order(alpha: f64) -> Result<(), FracError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(FracError::InvalidOrder {
            what: "alpha",
            range: "(0, 1]",
            value: alpha,
        });
    }
    Ok(())
}

// --- 1D integrals -------------------------------------------------------

/// I^{α;ψ}_{a+} f evaluated at every node of `xs`.
///
/// `xs` must be strictly increasing with `xs[0] >= a`; when `xs[0] > a` the
/// base point is prepended internally as an extra quadrature node.
pub fn frac_integral_1d(
    f: impl Fn(f64) -> f64,
    psi: &PsiFunction,
    alpha: f64,
    a: f64,
    xs: &[f64],
) -> Result<Vec<f64>, FracError> {
    validate_integral_order(alpha)?;
    if xs.is_empty() || xs[0] < a {
        return Err(FracError::BadNodes);
    }
    let mut nodes: Vec<f64> = Vec::with_capacity(xs.len() + 1);
    let offset = if xs[0] > a {
        nodes.push(a);
        1
    } else {
        0
    };
    nodes.extend_from_slice(xs);
    check_increasing(&nodes)?;
    let mut fvals = Vec::with_capacity(nodes.len());
    for &t in &nodes {
        let v = f(t);
        if !v.is_finite() {
            return Err(FracError::NonFiniteSample {
                t,
                context: "sampling the integrand",
            });
        }
        fvals.push(v);
    }
    let all = frac_integral_1d_samples(&fvals, psi, alpha, &nodes)?;
    Ok(all[offset..].to_vec())
}

/// Sampled-data variant: `nodes[0]` is the base point and the result holds
/// the integral at every node (zero at the base point).
pub fn frac_integral_1d_samples(
    fvals: &[f64],
    psi: &PsiFunction,
    alpha: f64,
    nodes: &[f64],
) -> Result<Vec<f64>, FracError> {
    validate_integral_order(alpha)?;
    check_increasing(nodes)?;
    if fvals.len() != nodes.len() {
        return Err(FracError::LengthMismatch {
            expected: nodes.len(),
            got: fvals.len(),
        });
    }
    let w = psi_values(psi, nodes)?;
    let rows = product_weight_rows(&w, alpha);
    Ok(rows
        .iter()
        .map(|row| row.iter().zip(fvals).map(|(w, f)| w * f).sum())
        .collect())
}

// --- axis operators on grid functions ------------------------------------

enum AxisOp {
    Identity,
    Weights(Vec<Vec<f64>>),
}

fn build_axis_op(psi: &PsiFunction, nodes: &[f64], alpha: f64) -> Result<AxisOp, FracError> {
    if alpha == 0.0 {
        return Ok(AxisOp::Identity);
    }
    let w = psi_values(psi, nodes)?;
    Ok(AxisOp::Weights(product_weight_rows(&w, alpha)))
}

/// Triangular weight rows for one axis, prefactor included; row j holds the
/// quadrature weights for the target at node j. Shared with the Darboux
/// solver, which reuses one weight build across all Picard sweeps.
pub(crate) fn axis_weight_rows(
    psi: &PsiFunction,
    nodes: &[f64],
    alpha: f64,
) -> Result<Vec<Vec<f64>>, FracError> {
    validate_integral_order(alpha)?;
    let w = psi_values(psi, nodes)?;
    Ok(product_weight_rows(&w, alpha))
}

pub(crate) fn apply_axis_weights(rows: &[Vec<f64>], u: &GridFn, axis: Axis) -> GridFn {
    let grid = u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = GridFn::zeros(grid);
    match axis {
        Axis::Y => {
            for i in 0..nx {
                for (j, row) in rows.iter().enumerate().take(ny) {
                    let mut s = 0.0;
                    for (k, wk) in row.iter().enumerate() {
                        s += wk * u.at(i, k);
                    }
                    out.set(i, j, s);
                }
            }
        }
        Axis::X => {
            for (i, row) in rows.iter().enumerate().take(nx) {
                for (k, wk) in row.iter().enumerate() {
                    if *wk == 0.0 {
                        continue;
                    }
                    for j in 0..ny {
                        let v = out.at(i, j) + wk * u.at(k, j);
                        out.set(i, j, v);
                    }
                }
            }
        }
    }
    out
}

fn apply_axis(op: &AxisOp, u: &GridFn, axis: Axis) -> GridFn {
    match op {
        AxisOp::Identity => u.clone(),
        AxisOp::Weights(rows) => apply_axis_weights(rows, u, axis),
    }
}

/// Single-axis partial integral `I^{α;ψ}` along one coordinate, holding the
/// other fixed, evaluated at every grid node. The base point is the first
/// node of the axis.
pub fn frac_integral_axis(
    u: &GridFn,
    psi: &PsiFunction,
    alpha: f64,
    axis: Axis,
) -> Result<GridFn, FracError> {
    validate_integral_order(alpha)?;
    let nodes = match axis {
        Axis::X => u.grid().xs(),
        Axis::Y => u.grid().ys(),
    };
    let op = build_axis_op(psi, nodes, alpha)?;
    Ok(apply_axis(&op, u, axis))
}

/// Tensor-product partial integral `I^{(α₁,α₂);ψ}` with base point at the
/// grid's lower-left corner, evaluated at every grid node.
pub fn frac_integral_2d(
    u: &GridFn,
    psi: &PsiFunction,
    ord: &FracOrder,
) -> Result<GridFn, FracError> {
    let inner = frac_integral_axis(u, psi, ord.alpha2(), Axis::Y)?;
    frac_integral_axis(&inner, psi, ord.alpha1(), Axis::X)
}

/// Point evaluation of the 2D integral for a callable integrand: builds a
/// graded mesh on [base.0, x]×[base.1, y] and applies the grid rule.
pub fn frac_integral_2d_at(
    f: impl Fn(f64, f64) -> f64,
    psi: &PsiFunction,
    ord: &FracOrder,
    base: (f64, f64),
    at: (f64, f64),
    nodes_per_axis: usize,
    grading: f64,
) -> Result<f64, FracError> {
    let grid = Grid2D::graded_on(
        (base.0, at.0),
        (base.1, at.1),
        nodes_per_axis,
        nodes_per_axis,
        grading,
    )?;
    let u = GridFn::from_fn(&grid, f)?;
    let full = frac_integral_2d(&u, psi, ord)?;
    Ok(full.at(grid.nx() - 1, grid.ny() - 1))
}

// --- finite differences ---------------------------------------------------

/// First derivative on a non-uniform grid: 3-point central stencils in the
/// interior, 3-point one-sided at both endpoints (exact for quadratics).
pub(crate) fn derivative_nodes(vals: &[f64], ts: &[f64]) -> Vec<f64> {
    let n = ts.len();
    assert!(n >= 3, "need at least 3 nodes for differencing");
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = ts[i] - ts[i - 1];
        let h1 = ts[i + 1] - ts[i];
        out[i] = -h1 / (h0 * (h0 + h1)) * vals[i - 1]
            + (h1 - h0) / (h0 * h1) * vals[i]
            + h0 / (h1 * (h0 + h1)) * vals[i + 1];
    }
    {
        let h0 = ts[1] - ts[0];
        let h1 = ts[2] - ts[1];
        out[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * vals[0]
            + (h0 + h1) / (h0 * h1) * vals[1]
            - h0 / (h1 * (h0 + h1)) * vals[2];
    }
    {
        let h0 = ts[n - 2] - ts[n - 3];
        let h1 = ts[n - 1] - ts[n - 2];
        out[n - 1] = h1 / (h0 * (h0 + h1)) * vals[n - 3]
            - (h0 + h1) / (h0 * h1) * vals[n - 2]
            + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * vals[n - 1];
    }
    out
}

fn weighted_derivative_1d(
    vals: &[f64],
    psi: &PsiFunction,
    ts: &[f64],
) -> Result<Vec<f64>, FracError> {
    let diff = derivative_nodes(vals, ts);
    let mut out = Vec::with_capacity(ts.len());
    for (i, &t) in ts.iter().enumerate() {
        let v = diff[i] / psi.derivative(t);
        if !v.is_finite() {
            return Err(FracError::NonFiniteSample {
                t,
                context: "applying the weighted derivative (1/psi') d/dt",
            });
        }
        out.push(v);
    }
    Ok(out)
}

// --- Hilfer derivatives ----------------------------------------------------

/// 1D ψ-Hilfer derivative of order α ∈ (0,1] and type β ∈ [0,1]:
/// `I^{β(1-α)} ∘ (1/ψ') d/dt ∘ I^{(1-β)(1-α)}` on sampled data.
/// `nodes[0]` is the base point; at least 32 nodes are required.
pub fn hilfer_derivative_1d(
    fvals: &[f64],
    psi: &PsiFunction,
    alpha: f64,
    beta: f64,
    nodes: &[f64],
) -> Result<Vec<f64>, FracError> {
    validate_integral_order(alpha)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(FracError::InvalidOrder {
            what: "beta",
            range: "[0, 1]",
            value: beta,
        });
    }
    if nodes.len() < MIN_DERIVATIVE_NODES {
        return Err(FracError::GridTooCoarse {
            got: nodes.len(),
            min: MIN_DERIVATIVE_NODES,
        });
    }
    if fvals.len() != nodes.len() {
        return Err(FracError::LengthMismatch {
            expected: nodes.len(),
            got: fvals.len(),
        });
    }
    let inner_order = (1.0 - beta) * (1.0 - alpha);
    let outer_order = beta * (1.0 - alpha);
    let inner = if inner_order == 0.0 {
        fvals.to_vec()
    } else {
        frac_integral_1d_samples(fvals, psi, inner_order, nodes)?
    };
    let mid = weighted_derivative_1d(&inner, psi, nodes)?;
    if outer_order == 0.0 {
        Ok(mid)
    } else {
        frac_integral_1d_samples(&mid, psi, outer_order, nodes)
    }
}

fn mixed_weighted_derivative(
    u: &GridFn,
    psi: &PsiFunction,
    x_first: bool,
) -> Result<GridFn, FracError> {
    let grid = u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let first = |u: &GridFn, axis: Axis| -> GridFn {
        let mut out = GridFn::zeros(u.grid());
        match axis {
            Axis::Y => {
                for i in 0..nx {
                    let row: Vec<f64> = (0..ny).map(|j| u.at(i, j)).collect();
                    let d = derivative_nodes(&row, grid.ys());
                    for (j, v) in d.into_iter().enumerate() {
                        out.set(i, j, v);
                    }
                }
            }
            Axis::X => {
                for j in 0..ny {
                    let col: Vec<f64> = (0..nx).map(|i| u.at(i, j)).collect();
                    let d = derivative_nodes(&col, grid.xs());
                    for (i, v) in d.into_iter().enumerate() {
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    };
    let cross = if x_first {
        first(&first(u, Axis::X), Axis::Y)
    } else {
        first(&first(u, Axis::Y), Axis::X)
    };
    let mut out = GridFn::zeros(grid);
    for (i, &x) in grid.xs().iter().enumerate() {
        let dx = psi.derivative(x);
        for (j, &y) in grid.ys().iter().enumerate() {
            let v = cross.at(i, j) / (dx * psi.derivative(y));
            if !v.is_finite() {
                return Err(FracError::NonFiniteSample {
                    t: x,
                    context: "applying the mixed weighted derivative",
                });
            }
            out.set(i, j, v);
        }
    }
    Ok(out)
}

fn check_derivative_grid(grid: &Arc<Grid2D>) -> Result<(), FracError> {
    let got = grid.nx().min(grid.ny());
    if got < MIN_DERIVATIVE_NODES {
        return Err(FracError::GridTooCoarse {
            got,
            min: MIN_DERIVATIVE_NODES,
        });
    }
    Ok(())
}

/// Mixed 2D ψ-Hilfer partial derivative
/// `I^{β(1-α);ψ} ∘ (1/(ψ'ψ')) ∂²/∂x∂y ∘ I^{(1-β)(1-α);ψ}` on a grid
/// function. Requires at least 32 nodes per axis.
pub fn hilfer_partial_2d(
    u: &GridFn,
    psi: &PsiFunction,
    ord: &FracOrder,
) -> Result<GridFn, FracError> {
    check_derivative_grid(u.grid())?;
    let (in1, in2) = ord.inner_orders();
    let (out1, out2) = ord.outer_orders();
    let grid = u.grid();
    let y_in = build_axis_op(psi, grid.ys(), in2)?;
    let x_in = build_axis_op(psi, grid.xs(), in1)?;
    let inner = apply_axis(&x_in, &apply_axis(&y_in, u, Axis::Y), Axis::X);
    let mid = mixed_weighted_derivative(&inner, psi, false)?;
    let y_out = build_axis_op(psi, grid.ys(), out2)?;
    let x_out = build_axis_op(psi, grid.xs(), out1)?;
    Ok(apply_axis(&x_out, &apply_axis(&y_out, &mid, Axis::Y), Axis::X))
}

/// The β = 0 (ψ-Riemann-Liouville) partial derivative written out directly:
/// `(1/(ψ'ψ')) ∂²/∂x∂y I^{(1-α₁,1-α₂);ψ} u`, with the axis integrals and the
/// cross differences applied in the opposite order from
/// [`hilfer_partial_2d`]. Used to check the tensor-product reduction
/// independently.
pub fn rl_partial_2d_explicit(
    u: &GridFn,
    psi: &PsiFunction,
    ord: &FracOrder,
) -> Result<GridFn, FracError> {
    check_derivative_grid(u.grid())?;
    let grid = u.grid();
    let x_in = build_axis_op(psi, grid.xs(), 1.0 - ord.alpha1())?;
    let y_in = build_axis_op(psi, grid.ys(), 1.0 - ord.alpha2())?;
    let inner = apply_axis(&y_in, &apply_axis(&x_in, u, Axis::X), Axis::Y);
    mixed_weighted_derivative(&inner, psi, true)
}

/// Named special cases of the mixed partial derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialCase {
    /// β = 0: ψ-Riemann-Liouville partial derivative.
    RlPartial,
    /// β = 1: ψ-Caputo partial derivative.
    CaputoPartial,
    /// β = 1, α = 1, ψ = identity: the classical mixed derivative ∂²/∂x∂y.
    Classical,
}

/// A preconfigured mixed partial derivative operator.
#[derive(Debug, Clone)]
pub struct HilferPartialOp {
    pub ord: FracOrder,
    pub psi: PsiFunction,
}

impl HilferPartialOp {
    pub fn apply(&self, u: &GridFn) -> Result<GridFn, FracError> {
        hilfer_partial_2d(u, &self.psi, &self.ord)
    }
}

/// Returns [`hilfer_partial_2d`] preconfigured at the named special case.
pub fn reduce_special_case(
    case: SpecialCase,
    ord: &FracOrder,
    psi: &PsiFunction,
) -> HilferPartialOp {
    match case {
        SpecialCase::RlPartial => HilferPartialOp {
            ord: FracOrder::new(ord.alpha1(), ord.alpha2(), 0.0)
                .expect("orders already validated")
                .with_gamma_rule(ord.gamma_rule()),
            psi: psi.clone(),
        },
        SpecialCase::CaputoPartial => HilferPartialOp {
            ord: FracOrder::new(ord.alpha1(), ord.alpha2(), 1.0)
                .expect("orders already validated")
                .with_gamma_rule(ord.gamma_rule()),
            psi: psi.clone(),
        },
        SpecialCase::Classical => HilferPartialOp {
            ord: FracOrder::new(1.0, 1.0, 1.0).expect("classical orders are valid"),
            psi: PsiFunction::identity(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::graded_nodes;
    use crate::oracle;
    use crate::psi::Builtin;

    fn rel_err(got: f64, want: f64) -> f64 {
        (got - want).abs() / want.abs().max(1e-300)
    }

    #[test]
    fn integral_of_one_classical() {
        // α=1, ψ=identity: plain ∫_0^x ds = x.
        let psi = PsiFunction::identity();
        let xs = graded_nodes(0.0, 0.7, 65, 2.0).unwrap();
        let vals = frac_integral_1d(|_| 1.0, &psi, 1.0, 0.0, &xs).unwrap();
        assert!((vals.last().unwrap() - 0.7).abs() < 1e-9);
    }

    #[test]
    #[allow(clippy::approx_constant)] // frozen reference value, not a named constant
    fn integral_of_one_half_order_is_exact() {
        // constants are reproduced exactly by the product rule
        let psi = PsiFunction::identity();
        let xs = graded_nodes(0.0, 1.0, 33, 2.0).unwrap();
        let vals = frac_integral_1d(|_| 1.0, &psi, 0.5, 0.0, &xs).unwrap();
        let want = 1.1283791670955125_f64; // 1/Γ(1.5)
        assert!(rel_err(*vals.last().unwrap(), want) < 1e-12);
    }

    #[test]
    fn integral_power_profile_against_closed_form() {
        let psi = PsiFunction::identity();
        let xs = graded_nodes(0.0, 1.0, 513, 2.0).unwrap();
        let vals = frac_integral_1d(|s: f64| s.powf(1.5), &psi, 0.5, 0.0, &xs).unwrap();
        let want = 0.6646701940895685_f64; // Γ(2.5)/Γ(3)
        assert!(
            rel_err(*vals.last().unwrap(), want) < 1e-4,
            "got {}, want {want}",
            vals.last().unwrap()
        );
    }

    #[test]
    fn integral_rejects_bad_input() {
        let psi = PsiFunction::identity();
        assert!(frac_integral_1d(|_| 1.0, &psi, 1.5, 0.0, &[0.0, 1.0]).is_err());
        assert!(frac_integral_1d(|_| 1.0, &psi, 0.5, 0.5, &[0.0, 1.0]).is_err());
        assert!(frac_integral_1d(|t| 1.0 / t, &psi, 0.5, 0.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn weights_are_nonnegative() {
        for alpha in [0.25, 0.5, 0.75, 1.0] {
            let w = graded_nodes(0.0, 2.0, 40, 2.0).unwrap();
            for row in product_weight_rows(&w, alpha) {
                assert!(row.iter().all(|v| *v >= 0.0), "negative weight at alpha={alpha}");
            }
        }
    }

    #[test]
    fn positivity_of_integrals() {
        let psi = PsiFunction::builtin(Builtin::Power(2.0)).unwrap();
        let xs = graded_nodes(0.0, 1.5, 65, 2.0).unwrap();
        let vals = frac_integral_1d(|s: f64| s.sin().abs(), &psi, 0.7, 0.0, &xs).unwrap();
        assert!(vals.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn linearity_to_roundoff() {
        let psi = PsiFunction::identity();
        let nodes = graded_nodes(0.0, 1.0, 65, 2.0).unwrap();
        let f1: Vec<f64> = nodes.iter().map(|t| t.sin()).collect();
        let f2: Vec<f64> = nodes.iter().map(|t| (1.0 + t).ln()).collect();
        let (c1, c2) = (2.5, -0.75);
        let combo: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| c1 * a + c2 * b).collect();
        let i1 = frac_integral_1d_samples(&f1, &psi, 0.6, &nodes).unwrap();
        let i2 = frac_integral_1d_samples(&f2, &psi, 0.6, &nodes).unwrap();
        let ic = frac_integral_1d_samples(&combo, &psi, 0.6, &nodes).unwrap();
        for k in 0..nodes.len() {
            let want = c1 * i1[k] + c2 * i2[k];
            let scale = want.abs().max(1.0);
            assert!((ic[k] - want).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn axis_integral_constant_in_axis() {
        // axis X at α=1: integrand u(s₁, y) = y, so the result is x·y; at
        // (x, y) = (1, 0.3) that is 0.3.
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 0.6, 33, 5, 1.0).unwrap();
        let u = GridFn::from_fn(&grid, |_, y| y).unwrap();
        let out = frac_integral_axis(&u, &psi, 1.0, Axis::X).unwrap();
        let j = grid.ys().iter().position(|y| (*y - 0.3).abs() < 1e-12).unwrap();
        assert!((out.at(grid.nx() - 1, j) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn axis_integral_of_one_matches_lemma() {
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 1.0, 17, 17, 2.0).unwrap();
        let u = GridFn::from_fn(&grid, |_, _| 1.0).unwrap();
        let alpha = 0.8;
        let out = frac_integral_axis(&u, &psi, alpha, Axis::Y).unwrap();
        for (j, &y) in grid.ys().iter().enumerate() {
            let want = oracle::power_integral_1d(alpha, 1.0, &psi, 0.0, y).unwrap();
            assert!((out.at(5, j) - want).abs() < 1e-12, "node {j}");
        }
    }

    #[test]
    fn unit_integral_2d_identity_exact() {
        // u ≡ 1 is reproduced exactly for any orders and weights.
        let grid = Grid2D::graded(0.5, 0.4, 33, 29, 2.0).unwrap();
        let u = GridFn::from_fn(&grid, |_, _| 1.0).unwrap();
        for (psi, a1, a2) in [
            (PsiFunction::identity(), 1.0, 1.0),
            (PsiFunction::identity(), 0.6, 0.9),
            (PsiFunction::builtin(Builtin::Power(2.0)).unwrap(), 0.75, 0.55),
            (PsiFunction::builtin(Builtin::Bounded).unwrap(), 0.51, 1.0),
        ] {
            let ord = FracOrder::new(a1, a2, 0.5).unwrap();
            let out = frac_integral_2d(&u, &psi, &ord).unwrap();
            let want = oracle::unit_integral_2d(&ord, &psi, (0.0, 0.0), (0.5, 0.4)).unwrap();
            let got = out.at(grid.nx() - 1, grid.ny() - 1);
            assert!(
                rel_err(got, want) < 1e-12,
                "psi={}, got {got}, want {want}",
                psi.label()
            );
            if a1 == 1.0 && a2 == 1.0 {
                assert!((got - 0.2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn product_profile_2d_against_oracle() {
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 1.0, 257, 257, 2.0).unwrap();
        let (d1, d2) = (2.0, 1.5);
        let u = GridFn::from_fn(&grid, |x, y| {
            x.powf(d1 - 1.0) * y.powf(d2 - 1.0)
        })
        .unwrap();
        let ord = FracOrder::new(0.75, 0.6, 0.0).unwrap();
        let out = frac_integral_2d(&u, &psi, &ord).unwrap();
        let want = oracle::power_integral_nd(
            &[0.75, 0.6],
            &[d1, d2],
            &psi,
            &[0.0, 0.0],
            &[1.0, 1.0],
        )
        .unwrap();
        assert!(rel_err(out.at(256, 256), want) < 2e-3);
    }

    #[test]
    fn fubini_symmetry() {
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 1.0, 49, 41, 2.0).unwrap();
        let u = GridFn::from_fn(&grid, |x, y| (3.0 * x).sin() * (2.0 + y).ln()).unwrap();
        let ord = FracOrder::new(0.7, 0.85, 0.0).unwrap();
        let yx = frac_integral_2d(&u, &psi, &ord).unwrap();
        // opposite sweep order
        let inner = frac_integral_axis(&u, &psi, ord.alpha1(), Axis::X).unwrap();
        let xy = frac_integral_axis(&inner, &psi, ord.alpha2(), Axis::Y).unwrap();
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let (a, b) = (yx.at(i, j), xy.at(i, j));
                let scale = a.abs().max(b.abs()).max(1e-30);
                assert!((a - b).abs() / scale < 1e-10, "asymmetry at ({i},{j})");
            }
        }
    }

    #[test]
    fn point_evaluation_matches_grid() {
        let psi = PsiFunction::identity();
        let ord = FracOrder::new(0.9, 0.7, 0.0).unwrap();
        let got = frac_integral_2d_at(|_, _| 1.0, &psi, &ord, (0.0, 0.0), (0.5, 0.4), 64, 2.0)
            .unwrap();
        let want = oracle::unit_integral_2d(&ord, &psi, (0.0, 0.0), (0.5, 0.4)).unwrap();
        assert!(rel_err(got, want) < 1e-12);
    }

    #[test]
    fn hilfer_1d_classical_limit() {
        // α = 1, β = 1, ψ = identity: the pipeline is the plain derivative.
        let psi = PsiFunction::identity();
        let ts = graded_nodes(0.0, 1.0, 65, 1.0).unwrap();
        let fv: Vec<f64> = ts.iter().map(|t| t * t).collect();
        let d = hilfer_derivative_1d(&fv, &psi, 1.0, 1.0, &ts).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            assert!((d[i] - 2.0 * t).abs() < 1e-3, "at t={t}: {}", d[i]);
        }
    }

    #[test]
    fn hilfer_1d_caputo_of_constant_is_zero() {
        let psi = PsiFunction::identity();
        let ts = graded_nodes(0.0, 1.0, 64, 2.0).unwrap();
        let fv = vec![3.25; ts.len()];
        let d = hilfer_derivative_1d(&fv, &psi, 0.7, 1.0, &ts).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12), "max {:?}", d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn hilfer_1d_inverts_fractional_integral() {
        let psi = PsiFunction::identity();
        let ts = graded_nodes(0.0, 1.0, 257, 1.0).unwrap();
        let g: Vec<f64> = ts.clone();
        let integral = frac_integral_1d_samples(&g, &psi, 0.7, &ts).unwrap();
        let recovered = hilfer_derivative_1d(&integral, &psi, 0.7, 0.5, &ts).unwrap();
        let sup = recovered
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-2, "sup recovery error {sup}");
    }

    #[test]
    fn hilfer_1d_rejects_coarse_grids() {
        let psi = PsiFunction::identity();
        let ts = graded_nodes(0.0, 1.0, 16, 1.0).unwrap();
        let fv = vec![0.0; 16];
        assert!(matches!(
            hilfer_derivative_1d(&fv, &psi, 0.7, 0.5, &ts),
            Err(FracError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn hilfer_2d_classical_mixed_derivative() {
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 1.0, 64, 64, 1.0).unwrap();
        let u = GridFn::from_fn(&grid, |x, y| x * y).unwrap();
        let ord = FracOrder::new(1.0, 1.0, 1.0).unwrap();
        let d = hilfer_partial_2d(&u, &psi, &ord).unwrap();
        for i in 1..grid.nx() - 1 {
            for j in 1..grid.ny() - 1 {
                assert!((d.at(i, j) - 1.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn hilfer_2d_recovers_integrand() {
        // Test functions vanish on the axes so the mid stage of the pipeline
        // stays regular; the identity itself only holds on the open
        // rectangle (the outer integral is zero on the axes by definition).
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 1.0, 96, 96, 1.0).unwrap();
        let w = GridFn::from_fn(&grid, |x, y| x * y * (1.0 + x + y)).unwrap();
        let ord = FracOrder::new(0.8, 0.75, 0.5).unwrap();
        let integral = frac_integral_2d(&w, &psi, &FracOrder::new(0.8, 0.75, 0.0).unwrap())
            .unwrap();
        let recovered = hilfer_partial_2d(&integral, &psi, &ord).unwrap();
        let mut sup = 0.0f64;
        for i in 1..grid.nx() - 1 {
            for j in 1..grid.ny() - 1 {
                sup = sup.max((recovered.at(i, j) - w.at(i, j)).abs());
            }
        }
        assert!(sup < 1e-3, "sup recovery error {sup}");
    }

    #[test]
    fn rl_partial_matches_hilfer_beta_zero_bitwise() {
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 1.0, 40, 40, 2.0).unwrap();
        let u = GridFn::from_fn(&grid, |x, y| x * x * y).unwrap();
        let ord = FracOrder::new(0.75, 0.6, 0.4).unwrap();
        let handle = reduce_special_case(SpecialCase::RlPartial, &ord, &psi);
        let via_handle = handle.apply(&u).unwrap();
        let beta0 = FracOrder::new(0.75, 0.6, 0.0).unwrap();
        let direct = hilfer_partial_2d(&u, &psi, &beta0).unwrap();
        assert_eq!(via_handle.values(), direct.values());
    }

    #[test]
    fn rl_explicit_formula_agrees_with_pipeline() {
        let psi = PsiFunction::identity();
        let grid = Grid2D::graded(1.0, 1.0, 48, 48, 1.0).unwrap();
        let u = GridFn::from_fn(&grid, |x, y| x * x * y + y).unwrap();
        let ord = FracOrder::new(0.8, 0.7, 0.0).unwrap();
        let pipeline = hilfer_partial_2d(&u, &psi, &ord).unwrap();
        let explicit = rl_partial_2d_explicit(&u, &psi, &ord).unwrap();
        for i in 1..grid.nx() - 1 {
            for j in 1..grid.ny() - 1 {
                let (a, b) = (pipeline.at(i, j), explicit.at(i, j));
                let scale = a.abs().max(b.abs()).max(1e-12);
                assert!((a - b).abs() / scale < 1e-6, "mismatch at ({i},{j}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn classical_special_case_on_x_squared_y() {
        let grid = Grid2D::graded(1.0, 1.0, 64, 64, 1.0).unwrap();
        let u = GridFn::from_fn(&grid, |x, y| x * x * y).unwrap();
        let any_ord = FracOrder::new(0.6, 0.6, 0.3).unwrap();
        let op = reduce_special_case(SpecialCase::Classical, &any_ord, &PsiFunction::identity());
        let d = op.apply(&u).unwrap();
        for (i, &x) in grid.xs().iter().enumerate().skip(1).take(grid.nx() - 2) {
            for j in 1..grid.ny() - 1 {
                assert!((d.at(i, j) - 2.0 * x).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn caputo_partial_of_constant_vanishes() {
        let grid = Grid2D::graded(1.0, 1.0, 40, 40, 2.0).unwrap();
        let u = GridFn::from_fn(&grid, |_, _| 7.5).unwrap();
        let ord = FracOrder::new(0.75, 0.8, 0.2).unwrap();
        let op = reduce_special_case(SpecialCase::CaputoPartial, &ord, &PsiFunction::identity());
        let d = op.apply(&u).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn gamma_rules() {
        let ord = FracOrder::new(0.75, 0.75, 0.5).unwrap();
        assert!((ord.gamma() - 0.875).abs() < 1e-15);
        let paper = ord.with_gamma_rule(GammaRule::Paper);
        assert!((paper.gamma() - 0.625).abs() < 1e-15);
        // classical: both rules give 1
        let classical = FracOrder::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(classical.gamma(), 1.0);
        assert_eq!(classical.with_gamma_rule(GammaRule::Paper).gamma(), 1.0);
    }

    #[test]
    fn order_validation() {
        assert!(FracOrder::new(0.0, 0.5, 0.5).is_err());
        assert!(FracOrder::new(0.5, 1.1, 0.5).is_err());
        assert!(FracOrder::new(0.5, 0.5, -0.1).is_err());
        assert!(FracOrder::new(0.5, 0.5, 1.1).is_err());
    }

    #[test]
    fn convergence_order_for_smooth_power_profile() {
        // δ = 2.5 profile at α = 0.6: observed order should be at least 1.5
        // as the mesh doubles.
        let psi = PsiFunction::identity();
        let want = oracle::power_integral_1d(0.6, 2.5, &psi, 0.0, 1.0).unwrap();
        let mut errs = Vec::new();
        for n in [65usize, 129, 257, 513] {
            let xs = graded_nodes(0.0, 1.0, n, 2.0).unwrap();
            let got = frac_integral_1d(|s: f64| s.powf(1.5), &psi, 0.6, 0.0, &xs).unwrap();
            errs.push((got.last().unwrap() - want).abs());
        }
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.5, "observed order {order}, errors {errs:?}");
        }
    }
}
