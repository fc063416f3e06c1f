//! JSON problem configuration.
//!
//! A problem config carries everything a solve or certificate run needs:
//! the weight function, fractional orders, domain, expressions, contraction
//! data, grid and tolerances, plus an optional `stability` section with the
//! certificate parameters. Reports embed the fully resolved config (all
//! defaults materialized), so a report can be re-run from its own `config`
//! field.

use crate::darboux::{self, DarbouxProblem};
use crate::exprdsl::{self, Expr, ParseError};
use crate::fracops::{FracOrder, FracError, GammaRule};
use crate::grid::{Grid2D, GridError, DEFAULT_GRADING};
use crate::psi::{Builtin, PsiError, PsiFunction};
use crate::stability::{MlOrder, UhrIndices};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON in `{path}`: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("field `{field}`: {source}")]
    BadExpression { field: String, source: ParseError },
    #[error("field `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PsiConfig {
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<[f64; 2]>,
    },
    Expr {
        value: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        derivative: Option<String>,
        domain: [f64; 2],
    },
}

impl Default for PsiConfig {
    fn default() -> Self {
        PsiConfig::Builtin {
            name: "identity".into(),
            rho: None,
            domain: None,
        }
    }
}

impl PsiConfig {
    pub fn build(&self) -> Result<PsiFunction, ConfigError> {
        match self {
            PsiConfig::Builtin { name, rho, domain } => {
                let which = match name.as_str() {
                    "identity" => Builtin::Identity,
                    "log" => Builtin::Log,
                    "bounded" => Builtin::Bounded,
                    "power" => Builtin::Power(rho.ok_or_else(|| ConfigError::Invalid {
                        field: "psi.rho".into(),
                        msg: "the power builtin needs a positive exponent".into(),
                    })?),
                    other => {
                        return Err(ConfigError::Invalid {
                            field: "psi.name".into(),
                            msg: format!(
                                "unknown builtin `{other}` (expected identity, log, power, bounded)"
                            ),
                        })
                    }
                };
                let mut psi = PsiFunction::builtin(which)?;
                if let Some([lo, hi]) = domain {
                    psi = psi.restricted(*lo, *hi)?;
                }
                Ok(psi)
            }
            PsiConfig::Expr {
                value,
                derivative,
                domain,
            } => {
                let value = exprdsl::parse(value, &["t"]).map_err(|source| {
                    ConfigError::BadExpression {
                        field: "psi.value".into(),
                        source,
                    }
                })?;
                let psi = match derivative {
                    Some(d) => {
                        let d = exprdsl::parse(d, &["t"]).map_err(|source| {
                            ConfigError::BadExpression {
                                field: "psi.derivative".into(),
                                source,
                            }
                        })?;
                        PsiFunction::from_expr_with_derivative(value, d, (domain[0], domain[1]))?
                    }
                    None => PsiFunction::from_expr(value, (domain[0], domain[1]))?,
                };
                Ok(psi)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    #[serde(default)]
    pub gamma_rule: GammaRule,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_grading() -> f64 {
    DEFAULT_GRADING
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 129,
            ny: 129,
            grading: DEFAULT_GRADING,
        }
    }
}

/// Lipschitz data: a constant, or an expression of (x, y) whose grid
/// supremum is used wherever a constant is required.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LfConfig {
    Constant(f64),
    Expression(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    /// Rassias weight expression over (x, y).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_sup: Option<f64>,
    #[serde(default)]
    pub uhr_indices: UhrIndices,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub psi: PsiConfig,
    pub order: OrderConfig,
    pub domain: DomainConfig,
    pub f: String,
    pub phi: String,
    pub xi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi1: Option<String>,
    pub lf: LfConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub ml_order: MlOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
}

/// A config with every numeric default materialized, plus the built objects.
pub struct BuiltProblem {
    pub problem: DarbouxProblem,
    pub grid: Arc<Grid2D>,
    pub tol: f64,
    pub max_iter: usize,
    pub ml_order: MlOrder,
    pub seed: u64,
    /// The config as actually used, for embedding in reports.
    pub resolved: ProblemConfig,
}

fn parse_field(src: &str, vars: &[&str], field: &str) -> Result<Expr, ConfigError> {
    exprdsl::parse(src, vars).map_err(|source| ConfigError::BadExpression {
        field: field.into(),
        source,
    })
}

impl ProblemConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<ProblemConfig, ConfigError> {
        let path_str = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
            path: path_str.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path_str,
            source,
        })
    }

    /// Builds the problem, grid, and solver parameters, materializing every
    /// default into the `resolved` copy.
    pub fn build(&self) -> Result<BuiltProblem, ConfigError> {
        let psi = self.psi.build()?;
        let ord = FracOrder::new(self.order.alpha1, self.order.alpha2, self.order.beta)?
            .with_gamma_rule(self.order.gamma_rule);
        let grid = Grid2D::graded(
            self.domain.a,
            self.domain.b,
            self.grid.nx,
            self.grid.ny,
            self.grid.grading,
        )?;
        let f = parse_field(&self.f, &["x", "y", "u", "p", "q"], "f")?;
        let phi = parse_field(&self.phi, &["x"], "phi")?;
        let xi = parse_field(&self.xi, &["y"], "xi")?;
        let phi1 = self
            .phi1
            .as_deref()
            .map(|src| parse_field(src, &["x"], "phi1"))
            .transpose()?;
        let lf = self.resolve_lf(&grid)?;
        if !(lf > 0.0) {
            return Err(ConfigError::Invalid {
                field: "lf".into(),
                msg: format!("Lipschitz constant must be positive, got {lf}"),
            });
        }
        let tau = self.tau.unwrap_or_else(|| darboux::default_tau(lf));
        let tol = self.tol.unwrap_or(darboux::DEFAULT_TOL);
        let max_iter = self.max_iter.unwrap_or(darboux::DEFAULT_MAX_ITER);
        let seed = self.seed.unwrap_or(0);
        let problem = DarbouxProblem {
            f,
            ord,
            psi,
            a: self.domain.a,
            b: self.domain.b,
            phi,
            xi,
            phi1,
            lf,
            tau,
        };
        let mut resolved = self.clone();
        resolved.tau = Some(tau);
        resolved.tol = Some(tol);
        resolved.max_iter = Some(max_iter);
        resolved.seed = Some(seed);
        resolved.lf = LfConfig::Constant(lf);
        Ok(BuiltProblem {
            problem,
            grid,
            tol,
            max_iter,
            ml_order: self.ml_order,
            seed,
            resolved,
        })
    }

    /// Constant Lipschitz data directly; an expression is sampled over the
    /// grid and its supremum used (the bounds are monotone in L_f, so the
    /// supremum is the sound choice).
    fn resolve_lf(&self, grid: &Arc<Grid2D>) -> Result<f64, ConfigError> {
        match &self.lf {
            LfConfig::Constant(v) => Ok(*v),
            LfConfig::Expression(src) => {
                let e = parse_field(src, &["x", "y"], "lf")?;
                let mut sup = f64::NEG_INFINITY;
                for &x in grid.xs() {
                    for &y in grid.ys() {
                        let v = e.eval(&[x, y]).map_err(|err| ConfigError::Invalid {
                            field: "lf".into(),
                            msg: err.to_string(),
                        })?;
                        if v < 0.0 {
                            return Err(ConfigError::Invalid {
                                field: "lf".into(),
                                msg: format!("Lipschitz expression is negative at ({x}, {y})"),
                            });
                        }
                        sup = sup.max(v);
                    }
                }
                Ok(sup)
            }
        }
    }
}
