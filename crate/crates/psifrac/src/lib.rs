//! psifrac — a numerical engine for weighted (ψ-) fractional calculus.
//!
//! The crate evaluates ψ-Riemann-Liouville fractional integrals and ψ-Hilfer
//! fractional derivatives in one and two variables, solves the hyperbolic
//! fractional Darboux problem on a rectangle by Picard iteration, and
//! certifies Ulam-Hyers / Ulam-Hyers-Rassias stability bounds with explicit
//! constants built from the Mittag-Leffler function.
//!
//! Module map:
//! - [`specfun`]: Gamma and one-parameter Mittag-Leffler functions.
//! - [`exprdsl`]: the closed-form expression language used in problem configs.
//! - [`psi`]: admissible weight functions ψ (identity, log, power, bounded,
//!   user expressions) with validation.
//! - [`grid`]: graded tensor-product meshes and scalar fields on them.
//! - [`fracops`]: the quadrature core — product-integration fractional
//!   integrals and the integrate/differentiate/integrate derivative pipeline.
//! - [`oracle`]: closed-form reference values for the power-profile family.
//! - [`gronwall`]: the fractional Gronwall bound and its empirical checker.
//! - [`darboux`]: the Darboux fixed-point system and Picard solver.
//! - [`stability`]: perturbed solves, stability constants, certificates.
//! - [`config`] / [`cli`]: JSON problem ingestion and the command-line tool.

// Negated comparisons like `!(x > 0.0)` are deliberate throughout: unlike
// `x <= 0.0` they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod darboux;
pub mod exprdsl;
pub mod fracops;
pub mod grid;
pub mod gronwall;
pub mod oracle;
pub mod psi;
pub mod specfun;
pub mod stability;

pub use exprdsl::Expr;
pub use fracops::FracOrder;
pub use grid::{Grid2D, GridFn};
pub use psi::PsiFunction;
