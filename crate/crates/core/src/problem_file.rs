//! TOML problem definitions with coefficients written in the expression language.
//!
//! ```toml
//! name = "paradise fish"
//! phi  = "x"
//! phi1 = "1 - alpha + alpha*x"
//! phi2 = "beta*x"
//! f    = "0"
//! u0   = 0.0
//! u1   = 1.0
//!
//! [params]
//! alpha = 0.1
//! beta  = 0.2
//!
//! [seminorms]          # optional; numbers or expressions in the parameters
//! phi  = 1
//! phi1 = "alpha"
//! phi2 = "beta"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::expr::{parse, Expr, ExprError, Params};
use crate::models::ExactSolution;
use crate::problem::{Coefficient, Problem};

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Toml(#[from] toml::de::Error),

    #[error("field `{field}`: {source}")]
    Field {
        field: String,
        #[source]
        source: ExprError,
    },

    #[error("field `{field}`: parameter `{name}` is not bound in [params] or on the command line")]
    Unbound { field: String, name: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumberOrExpr {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormEntries {
    pub phi: Option<NumberOrExpr>,
    pub phi1: Option<NumberOrExpr>,
    pub phi2: Option<NumberOrExpr>,
    pub f: Option<NumberOrExpr>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    pub phi: String,
    pub phi1: String,
    pub phi2: String,
    pub f: String,
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub u1: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seminorms: SeminormEntries,
    /// Exact solution of the problem as written (before any homogenization).
    pub exact: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub exact: Option<ExactSolution>,
    pub params: Params,
}

impl ProblemFile {
    pub fn from_toml(text: &str) -> Result<Self, ProblemFileError> {
        Ok(toml::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, ProblemFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProblemFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Resolves expressions with the file's parameters, overridden by `overrides`.
    pub fn resolve(&self, overrides: &Params) -> Result<LoadedProblem, ProblemFileError> {
        let mut params = self.params.clone();
        params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));

        let field_expr = |field: &str, src: &str| -> Result<Expr, ProblemFileError> {
            let expr = parse(src).map_err(|source| ProblemFileError::Field {
                field: field.into(),
                source,
            })?;
            if let Some(name) = expr.parameters().into_iter().find(|n| !params.contains_key(n)) {
                return Err(ProblemFileError::Unbound {
                    field: field.into(),
                    name,
                });
            }
            Ok(expr)
        };
        let scalar = |field: &str, v: &Option<NumberOrExpr>| -> Result<Option<f64>, ProblemFileError> {
            match v {
                None => Ok(None),
                Some(NumberOrExpr::Number(x)) => Ok(Some(*x)),
                Some(NumberOrExpr::Expr(src)) => {
                    let e = field_expr(field, src)?;
                    e.eval(&params, 0.0)
                        .map(Some)
                        .map_err(|source| ProblemFileError::Field {
                            field: field.into(),
                            source,
                        })
                }
            }
        };
        let coefficient = |field: &str, src: &str, seminorm: &Option<NumberOrExpr>| {
            let expr = field_expr(field, src)?;
            let mut c = Coefficient::from_expr(&expr, &params).map_err(|source| {
                ProblemFileError::Field {
                    field: field.into(),
                    source,
                }
            })?;
            if let Some(s) = scalar(&format!("seminorms.{field}"), seminorm)? {
                c = c.with_seminorm(s);
            }
            Ok::<_, ProblemFileError>(c)
        };

        let s = &self.seminorms;
        let problem = Problem::new(
            self.name.clone(),
            coefficient("phi", &self.phi, &s.phi)?,
            coefficient("phi1", &self.phi1, &s.phi1)?,
            coefficient("phi2", &self.phi2, &s.phi2)?,
            coefficient("f", &self.f, &s.f)?,
        )
        .with_boundary(self.u0, self.u1);

        let exact = match &self.exact {
            None => None,
            Some(src) => {
                let bound = field_expr("exact", src)?.bind(&params).map_err(|source| {
                    ProblemFileError::Field {
                        field: "exact".into(),
                        source,
                    }
                })?;
                // must be total on [0, 1]; checked up front so evaluation can be infallible
                let empty = Params::new();
                for j in 0..=1024 {
                    bound
                        .eval(&empty, j as f64 / 1024.0)
                        .map_err(|source| ProblemFileError::Field {
                            field: "exact".into(),
                            source,
                        })?;
                }
                let label = bound.to_string();
                Some(ExactSolution::new(label, true, move |x| {
                    bound.eval(&empty, x).unwrap_or(f64::NAN)
                }))
            }
        };
        Ok(LoadedProblem {
            problem,
            exact,
            params,
        })
    }
}

pub fn load(path: &Path, overrides: &Params) -> Result<LoadedProblem, ProblemFileError> {
    ProblemFile::read(path)?.resolve(overrides)
}
