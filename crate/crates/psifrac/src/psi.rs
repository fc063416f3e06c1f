//! Admissible weight functions ψ.
//!
//! A weight function must be strictly increasing with a continuous positive
//! derivative on its domain. The builtins cover the classical operator
//! families — `identity` (Riemann-Liouville), `log` (Hadamard), `power`
//! (Katugampola-style) and the bounded `t/(1+t)` needed when constants
//! require a finite ψ(∞) — and user expressions are admitted after a sampled
//! monotonicity/derivative check.
//!
//! The Hadamard case pairs ψ = ln t with a base point at 0 in some
//! presentations; ln 0 = -∞ is not numerically meaningful, so the `log`
//! builtin's domain is (0, ∞) and integrals against it must use a strictly
//! positive base point (1 recovers the classical Hadamard operator).

use crate::exprdsl::Expr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsiError {
    #[error("invalid parameters for builtin `{name}`: {msg}")]
    InvalidParams { name: String, msg: String },
    #[error("weight function failed validation: {0}")]
    ValidationFailed(String),
    #[error("expression for psi must be declared over the single variable `t`")]
    WrongVariables,
    #[error("evaluation failed at t={t}: {msg}")]
    Eval { t: f64, msg: String },
}

/// Finite-difference step for expression-backed derivatives.
fn fd_step(t: f64) -> f64 {
    (1e-6 * t.abs()).max(1e-6)
}

#[derive(Debug, Clone)]
enum PsiKind {
    Identity,
    Log,
    Power(f64),
    Bounded,
    Expr {
        value: Expr,
        derivative: Option<Expr>,
    },
}

/// An increasing weight function ψ with its derivative.
///
/// Values are immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct PsiFunction {
    kind: PsiKind,
    domain: (f64, f64),
    label: String,
}

/// Builtin weight function selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// ψ(t) = t on [0, ∞).
    Identity,
    /// ψ(t) = ln t on (0, ∞).
    Log,
    /// ψ(t) = t^ρ with ρ > 0 on [0, ∞).
    Power(f64),
    /// ψ(t) = t/(1+t) on [0, ∞); sup ψ = 1 < ∞.
    Bounded,
}

impl PsiFunction {
    pub fn builtin(which: Builtin) -> Result<PsiFunction, PsiError> {
        let (kind, domain, label) = match which {
            Builtin::Identity => (PsiKind::Identity, (0.0, f64::INFINITY), "identity".into()),
            Builtin::Log => (PsiKind::Log, (0.0, f64::INFINITY), "log".into()),
            Builtin::Power(rho) => {
                if !(rho > 0.0) {
                    return Err(PsiError::InvalidParams {
                        name: "power".into(),
                        msg: format!("exponent must be positive, got {rho}"),
                    });
                }
                (PsiKind::Power(rho), (0.0, f64::INFINITY), format!("power({rho})"))
            }
            Builtin::Bounded => (PsiKind::Bounded, (0.0, f64::INFINITY), "bounded".into()),
        };
        Ok(PsiFunction { kind, domain, label })
    }

    pub fn identity() -> PsiFunction {
        Self::builtin(Builtin::Identity).expect("identity has no parameters")
    }

    /// Builds a weight from an expression over `t`; the derivative comes from
    /// central differences with step `max(1e-6, 1e-6·|t|)` unless an explicit
    /// derivative expression is supplied. The candidate is validated before
    /// being accepted.
    pub fn from_expr(value: Expr, domain: (f64, f64)) -> Result<PsiFunction, PsiError> {
        Self::from_expr_impl(value, None, domain)
    }

    pub fn from_expr_with_derivative(
        value: Expr,
        derivative: Expr,
        domain: (f64, f64),
    ) -> Result<PsiFunction, PsiError> {
        Self::from_expr_impl(value, Some(derivative), domain)
    }

    fn from_expr_impl(
        value: Expr,
        derivative: Option<Expr>,
        domain: (f64, f64),
    ) -> Result<PsiFunction, PsiError> {
        if value.vars() != ["t"] {
            return Err(PsiError::WrongVariables);
        }
        if let Some(d) = &derivative {
            if d.vars() != ["t"] {
                return Err(PsiError::WrongVariables);
            }
        }
        let label = format!("expr({})", value.source());
        let psi = PsiFunction {
            kind: PsiKind::Expr { value, derivative },
            domain,
            label,
        };
        let report = psi.validate(256);
        if !report.passed {
            return Err(PsiError::ValidationFailed(report.summary()));
        }
        Ok(psi)
    }

    /// Restricts the domain, e.g. `log` to [0.1, 10] before validation.
    pub fn restricted(mut self, lo: f64, hi: f64) -> Result<PsiFunction, PsiError> {
        if !(lo < hi) || lo < self.domain.0 || hi > self.domain.1 {
            return Err(PsiError::InvalidParams {
                name: self.label.clone(),
                msg: format!("[{lo}, {hi}] is not inside [{}, {}]", self.domain.0, self.domain.1),
            });
        }
        self.domain = (lo, hi);
        Ok(self)
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            PsiKind::Identity => t,
            PsiKind::Log => t.ln(),
            PsiKind::Power(rho) => t.powf(*rho),
            PsiKind::Bounded => t / (1.0 + t),
            PsiKind::Expr { value, .. } => value.eval(&[t]).unwrap_or(f64::NAN),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match &self.kind {
            PsiKind::Identity => 1.0,
            PsiKind::Log => 1.0 / t,
            PsiKind::Power(rho) => rho * t.powf(rho - 1.0),
            PsiKind::Bounded => 1.0 / ((1.0 + t) * (1.0 + t)),
            PsiKind::Expr { value, derivative } => match derivative {
                Some(d) => d.eval(&[t]).unwrap_or(f64::NAN),
                None => {
                    let h = fd_step(t);
                    let f1 = value.eval(&[t + h]).unwrap_or(f64::NAN);
                    let f0 = value.eval(&[t - h]).unwrap_or(f64::NAN);
                    (f1 - f0) / (2.0 * h)
                }
            },
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A finite supremum of ψ when one is known a priori (only the bounded
    /// builtin). Used by the Rassias-stability constants, which are finite
    /// only when ψ(∞) < ∞.
    pub fn known_sup(&self) -> Option<f64> {
        match self.kind {
            PsiKind::Bounded => Some(1.0),
            _ => None,
        }
    }

    /// Samples ψ and ψ' on `n` nodes and reports monotonicity violations,
    /// the minimal sampled derivative and the largest relative jump of ψ'
    /// between neighboring nodes. Failures are report contents, not errors.
    ///
    /// The derivative condition holds on the open interval, so ψ' at the
    /// lower endpoint is excluded from the minimum: graded weights like t^ρ
    /// with ρ > 1 legitimately have ψ'(0) = 0.
    pub fn validate(&self, n: usize) -> ValidationReport {
        let n = n.max(16);
        let (lo, hi) = self.sampling_window();
        let mut min_derivative = f64::INFINITY;
        let mut monotonicity_violations = 0usize;
        let mut max_relative_jump = 0.0f64;
        let mut prev_value = f64::NAN;
        let mut prev_deriv = f64::NAN;
        let mut non_finite = 0usize;
        for i in 0..n {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let v = self.value(t);
            let d = self.derivative(t);
            if !v.is_finite() || !d.is_finite() {
                non_finite += 1;
                continue;
            }
            if i > 0 {
                min_derivative = min_derivative.min(d);
            }
            if prev_value.is_finite() && v <= prev_value {
                monotonicity_violations += 1;
            }
            if prev_deriv.is_finite() && i > 1 {
                let scale = prev_deriv.abs().max(d.abs()).max(f64::MIN_POSITIVE);
                max_relative_jump = max_relative_jump.max((d - prev_deriv).abs() / scale);
            }
            prev_value = v;
            prev_deriv = d;
        }
        // Neighbor jumps of a continuous derivative shrink with the mesh;
        // a near-unit relative jump means a genuine discontinuity.
        let passed = non_finite == 0
            && monotonicity_violations == 0
            && min_derivative > 0.0
            && max_relative_jump < 0.9;
        ValidationReport {
            nodes: n,
            window: (lo, hi),
            min_derivative,
            monotonicity_violations,
            max_relative_jump,
            non_finite_samples: non_finite,
            passed,
        }
    }

    // Validation needs a finite window; unbounded domains are probed on a
    // fixed span past the left endpoint.
    fn sampling_window(&self) -> (f64, f64) {
        let (lo, hi) = self.domain;
        let lo = if matches!(self.kind, PsiKind::Log) && lo <= 0.0 {
            // open left endpoint: step inside
            if hi.is_finite() {
                lo + (hi - lo) * 1e-6
            } else {
                1e-3
            }
        } else {
            lo
        };
        if hi.is_finite() {
            (lo, hi)
        } else {
            (lo, lo + 16.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub nodes: usize,
    pub window: (f64, f64),
    pub min_derivative: f64,
    pub monotonicity_violations: usize,
    pub max_relative_jump: f64,
    pub non_finite_samples: usize,
    pub passed: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        format!(
            "nodes={} window=[{}, {}] min_psi'={} monotonicity_violations={} max_rel_jump={} non_finite={} passed={}",
            self.nodes,
            self.window.0,
            self.window.1,
            self.min_derivative,
            self.monotonicity_violations,
            self.max_relative_jump,
            self.non_finite_samples,
            self.passed
        )
    }
}
