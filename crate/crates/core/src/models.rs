//! Built-in problems: the paradise-fish learning model and two manufactured
//! problems with known solutions (one smooth, one only Hölder-½).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Params;
use crate::problem::{Coefficient, Lift, Problem};

/// Known exact solution of a built-in problem.
#[derive(Clone)]
pub struct ExactSolution {
    pub label: String,
    /// False when the solution is merely Hölder continuous.
    pub lipschitz: bool,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ExactSolution {
    pub fn new(
        label: impl Into<String>,
        lipschitz: bool,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ExactSolution {
            label: label.into(),
            lipschitz,
            func: Arc::new(func),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x)
    }
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub problem: Problem,
    pub exact: Option<ExactSolution>,
    pub params: Params,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// `u(x) = x·u(1−α+αx) + (1−x)·u(βx) + (β−α)(1−x)x`, the homogenized fish model.
/// The physical choice probability is `v(x) = u(x) + x`, carried as the problem's lift.
pub fn fish(alpha: f64, beta: f64) -> Result<Model> {
    check(0.0 < alpha && alpha <= beta && beta < 1.0, || {
        format!("fish requires 0 < alpha <= beta < 1, got alpha = {alpha}, beta = {beta}")
    })?;
    let mut problem = Problem::new(
        format!("fish(alpha={alpha}, beta={beta})"),
        Coefficient::native("x", |x| x).with_seminorm(1.0),
        Coefficient::native(format!("1 - {alpha:?} + {alpha:?}*x"), move |x| {
            1.0 - alpha + alpha * x
        })
        .with_seminorm(alpha),
        Coefficient::native(format!("{beta:?}*x"), move |x| beta * x).with_seminorm(beta),
        Coefficient::native(format!("({beta:?} - {alpha:?})*(1 - x)*x"), move |x| {
            (beta - alpha) * (1.0 - x) * x
        })
        .with_seminorm((beta - alpha).abs()),
    );
    problem.lift = Some(Lift { u0: 0.0, u1: 1.0 });
    let exact = (alpha == beta).then(|| ExactSolution::new("0", true, |_| 0.0));
    Ok(Model {
        problem,
        exact,
        params: params(&[("alpha", alpha), ("beta", beta)]),
    })
}

/// The fish model in its original form `v = Tv`, `v(0) = 0`, `v(1) = 1`.
pub fn fish_raw(alpha: f64, beta: f64) -> Result<Model> {
    let mut m = fish(alpha, beta)?;
    m.problem.name = format!("fish-raw(alpha={alpha}, beta={beta})");
    m.problem.f = Coefficient::constant(0.0);
    m.problem.lift = None;
    m.problem = m.problem.with_boundary(0.0, 1.0);
    m.exact = (alpha == beta).then(|| ExactSolution::new("x", true, |x| x));
    Ok(m)
}

/// Builds `f = u − Tu` for a chosen exact solution `u`.
fn manufactured_source(
    label: &str,
    phi: &Coefficient,
    phi1: &Coefficient,
    phi2: &Coefficient,
    exact: &ExactSolution,
) -> Coefficient {
    let (phi, phi1, phi2, u) = (phi.clone(), phi1.clone(), phi2.clone(), exact.clone());
    let pick = |c: &Coefficient, x: f64| match c.eval(x) {
        Ok(v) => Ok(v),
        Err(Error::Eval { source, .. }) => Err(source),
        Err(other) => unreachable!("coefficient evaluation returned {other}"),
    };
    Coefficient::fallible(format!("{label} - T[{label}]"), move |x| {
        let w = pick(&phi, x)?;
        let tu = w * u.eval(pick(&phi1, x)?) + (1.0 - w) * u.eval(pick(&phi2, x)?);
        Ok(u.eval(x) - tu)
    })
}

/// `φ = x²`, `φ₁ = 1 − (α/2)(1−x)`, `φ₂ = 1 − e^{−αx/2}`, exact solution `sin(πx)`.
pub fn manufactured_smooth(alpha: f64) -> Result<Model> {
    check(0.0 < alpha && alpha < 1.0 / 3.0, || {
        format!("smooth model requires 0 < alpha < 1/3, got {alpha}")
    })?;
    let half = alpha / 2.0;
    let phi = Coefficient::native("x^2", |x| x * x).with_seminorm(2.0);
    let phi1 = Coefficient::native(format!("1 - {half:?}*(1 - x)"), move |x| {
        1.0 - half * (1.0 - x)
    })
    .with_seminorm(half);
    let phi2 =
        Coefficient::native(format!("1 - exp(-{half:?}*x)"), move |x| 1.0 - (-half * x).exp())
            .with_seminorm(half);
    let exact = ExactSolution::new("sin(pi*x)", true, |x| (PI * x).sin());
    let f = manufactured_source("sin(pi*x)", &phi, &phi1, &phi2, &exact);
    Ok(Model {
        problem: Problem::new(format!("smooth(alpha={alpha})"), phi, phi1, phi2, f),
        exact: Some(exact),
        params: params(&[("alpha", alpha)]),
    })
}

/// `φ = x`, `φ₁ = 1 − (α/2)(1−x)`, `φ₂ = (α/2)x`, exact solution `√(½ − |x − ½|)`.
pub fn manufactured_nonsmooth(alpha: f64) -> Result<Model> {
    check(0.0 < alpha && alpha < 0.5, || {
        format!("nonsmooth model requires 0 < alpha < 1/2, got {alpha}")
    })?;
    let half = alpha / 2.0;
    let phi = Coefficient::native("x", |x| x).with_seminorm(1.0);
    let phi1 = Coefficient::native(format!("1 - {half:?}*(1 - x)"), move |x| {
        1.0 - half * (1.0 - x)
    })
    .with_seminorm(half);
    let phi2 = Coefficient::native(format!("{half:?}*x"), move |x| half * x).with_seminorm(half);
    let label = "sqrt(1/2 - abs(x - 1/2))";
    let exact = ExactSolution::new(label, false, |x| (0.5 - (x - 0.5).abs()).max(0.0).sqrt());
    let f = manufactured_source(label, &phi, &phi1, &phi2, &exact);
    Ok(Model {
        problem: Problem::new(format!("nonsmooth(alpha={alpha})"), phi, phi1, phi2, f),
        exact: Some(exact),
        params: params(&[("alpha", alpha)]),
    })
}

/// Names accepted by [`by_name`].
pub const MODEL_NAMES: [&str; 4] = ["fish", "fish-raw", "smooth", "nonsmooth"];

/// Looks a model up by name; `alpha`/`beta` come from `params` with the
/// defaults 0.1/0.2 (fish) and 0.3 (smooth) or 0.45 (nonsmooth).
pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Model> {
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    let allowed: &[&str] = match name {
        "fish" | "fish-raw" => &["alpha", "beta"],
        "smooth" | "nonsmooth" => &["alpha"],
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown model `{name}` (expected one of {})",
                MODEL_NAMES.join(", ")
            )))
        }
    };
    if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!(
            "model `{name}` has no parameter `{extra}`"
        )));
    }
    match name {
        "fish" => fish(get("alpha", 0.1), get("beta", 0.2)),
        "fish-raw" => fish_raw(get("alpha", 0.1), get("beta", 0.2)),
        "smooth" => manufactured_smooth(get("alpha", 0.3)),
        _ => manufactured_nonsmooth(get("alpha", 0.45)),
    }
}
