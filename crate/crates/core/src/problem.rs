//! Problem instances `u = φ·u∘φ₁ + (1−φ)·u∘φ₂ + f` on `[0, 1]` and their
//! admissibility checks.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprError, Params};

/// Samples used by the divided-difference seminorm fallback.
pub const DEFAULT_SEMINORM_SAMPLES: usize = 4096;

/// Absolute tolerance for the sampled assumption checks.
pub const ASSUMPTION_TOLERANCE: f64 = 1e-12;

type CoefficientFn = dyn Fn(f64) -> Result<f64, ExprError> + Send + Sync;

/// A real function on `[0, 1]`, optionally carrying its exact Lipschitz seminorm.
#[derive(Clone)]
pub struct Coefficient {
    label: String,
    func: Arc<CoefficientFn>,
    seminorm: Option<f64>,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficient")
            .field("label", &self.label)
            .field("seminorm", &self.seminorm)
            .finish()
    }
}

impl Coefficient {
    pub fn native(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient {
            label: label.into(),
            func: Arc::new(move |x| Ok(f(x))),
            seminorm: None,
        }
    }

    pub fn fallible(
        label: impl Into<String>,
        f: impl Fn(f64) -> Result<f64, ExprError> + Send + Sync + 'static,
    ) -> Self {
        Coefficient {
            label: label.into(),
            func: Arc::new(f),
            seminorm: None,
        }
    }

    /// Binds `params` into `expr` up front; unbound names fail here, not at evaluation.
    pub fn from_expr(expr: &Expr, params: &Params) -> Result<Self, ExprError> {
        let label = expr.to_string();
        let bound = expr.bind(params)?;
        let empty = Params::new();
        Ok(Coefficient {
            label,
            func: Arc::new(move |x| bound.eval(&empty, x)),
            seminorm: None,
        })
    }

    pub fn constant(value: f64) -> Self {
        Coefficient::native(format!("{value:?}"), move |_| value).with_seminorm(0.0)
    }

    pub fn with_seminorm(mut self, seminorm: f64) -> Self {
        self.seminorm = Some(seminorm);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn analytic_seminorm(&self) -> Option<f64> {
        self.seminorm
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let value = (self.func)(x).map_err(|source| Error::Eval {
            name: self.label.clone(),
            x,
            source,
        })?;
        if !value.is_finite() {
            return Err(Error::Eval {
                name: self.label.clone(),
                x,
                source: ExprError::Domain {
                    message: "non-finite value".into(),
                    subexpr: self.label.clone(),
                },
            });
        }
        Ok(value)
    }
}

/// Boundary values removed by homogenization; the physical solution is `u + lift(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lift {
    pub u0: f64,
    pub u1: f64,
}

impl Lift {
    pub fn value(&self, x: f64) -> f64 {
        (1.0 - x) * self.u0 + x * self.u1
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub phi: Coefficient,
    pub phi1: Coefficient,
    pub phi2: Coefficient,
    pub f: Coefficient,
    pub u0: f64,
    pub u1: f64,
    /// Set on homogeneous problems derived from (or equivalent to) one with
    /// boundary values `lift.u0`, `lift.u1`.
    pub lift: Option<Lift>,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        phi: Coefficient,
        phi1: Coefficient,
        phi2: Coefficient,
        f: Coefficient,
    ) -> Self {
        Problem {
            name: name.into(),
            phi,
            phi1,
            phi2,
            f,
            u0: 0.0,
            u1: 0.0,
            lift: None,
        }
    }

    pub fn with_boundary(mut self, u0: f64, u1: f64) -> Self {
        self.u0 = u0;
        self.u1 = u1;
        self
    }

    pub fn is_homogeneous(&self) -> bool {
        self.u0 == 0.0 && self.u1 == 0.0
    }

    /// `(Tv)(x) = φ(x)·v(φ₁(x)) + (1−φ(x))·v(φ₂(x))`.
    pub fn apply_t<F>(&self, v: F, x: f64) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let w = self.phi.eval(x)?;
        let left = v(self.phi1.eval(x)?)?;
        let right = v(self.phi2.eval(x)?)?;
        Ok(w * left + (1.0 - w) * right)
    }

    /// Value of the lift to add to a homogeneous solution, zero when absent.
    pub fn lift_value(&self, x: f64) -> f64 {
        self.lift.map_or(0.0, |l| l.value(x))
    }
}

/// Shifts `u` by `h(x) = (1−x)u₀ + x·u₁` so the returned problem has zero
/// boundary values and source `f + Th − h`.
pub fn homogenize(p: &Problem) -> Problem {
    if p.is_homogeneous() {
        return p.clone();
    }
    let lift = Lift { u0: p.u0, u1: p.u1 };
    let (phi, phi1, phi2, f) = (p.phi.clone(), p.phi1.clone(), p.phi2.clone(), p.f.clone());
    let shifted = move |x: f64| -> Result<f64, ExprError> {
        let eval = |c: &Coefficient, t: f64| {
            c.eval(t).map_err(|e| match e {
                Error::Eval { source, .. } => source,
                other => ExprError::Domain {
                    message: other.to_string(),
                    subexpr: c.label().to_string(),
                },
            })
        };
        let w = eval(&phi, x)?;
        let th = w * lift.value(eval(&phi1, x)?) + (1.0 - w) * lift.value(eval(&phi2, x)?);
        Ok(eval(&f, x)? + th - lift.value(x))
    };
    let label = format!(
        "{} + T[h] - h, h(x) = (1 - x)*{:?} + x*{:?}",
        p.f.label(),
        p.u0,
        p.u1
    );
    Problem {
        name: p.name.clone(),
        phi: p.phi.clone(),
        phi1: p.phi1.clone(),
        phi2: p.phi2.clone(),
        f: Coefficient::fallible(label, shifted),
        u0: 0.0,
        u1: 0.0,
        lift: Some(lift),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormSource {
    Analytic,
    Estimated,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Seminorm {
    /// The value used downstream: analytic when supplied, otherwise the estimate.
    pub value: f64,
    pub source: SeminormSource,
    /// Divided-difference estimate, always computed for cross-checking.
    pub estimate: f64,
}

/// Lipschitz seminorm of `c`: its analytic value when one is attached, otherwise the
/// largest divided difference over `samples` uniform points (a lower bound).
pub fn seminorm_estimate(c: &Coefficient, samples: usize) -> Result<f64> {
    Ok(seminorm(c, samples)?.value)
}

pub fn seminorm(c: &Coefficient, samples: usize) -> Result<Seminorm> {
    let estimate = sampled_seminorm(|x| c.eval(x), samples)?;
    Ok(match c.analytic_seminorm() {
        Some(value) => Seminorm {
            value,
            source: SeminormSource::Analytic,
            estimate,
        },
        None => Seminorm {
            value: estimate,
            source: SeminormSource::Estimated,
            estimate,
        },
    })
}

/// Largest `|v(s_{j+1}) − v(s_j)| / (s_{j+1} − s_j)` over `samples` uniform points in `[0, 1]`.
pub fn sampled_seminorm<F>(v: F, samples: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if samples < 2 {
        return Err(Error::InvalidInput(format!(
            "seminorm estimation needs at least 2 samples, got {samples}"
        )));
    }
    let last = (samples - 1) as f64;
    let mut prev_s = 0.0;
    let mut prev_v = v(0.0)?;
    let mut best: f64 = 0.0;
    for j in 1..samples {
        let s = j as f64 / last;
        let value = v(s)?;
        best = best.max((value - prev_v).abs() / (s - prev_s));
        prev_s = s;
        prev_v = value;
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    PhiAtZero,
    PhiAtOne,
    PhiRange,
    Phi1AtOne,
    Phi2AtZero,
    Phi1Range,
    Phi2Range,
    SourceAtZero,
    SourceAtOne,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::PhiAtZero => "phi(0) = 0",
            Condition::PhiAtOne => "phi(1) = 1",
            Condition::PhiRange => "0 <= phi(x) <= 1",
            Condition::Phi1AtOne => "phi1(1) = 1",
            Condition::Phi2AtZero => "phi2(0) = 0",
            Condition::Phi1Range => "0 <= phi1(x) <= 1",
            Condition::Phi2Range => "0 <= phi2(x) <= 1",
            Condition::SourceAtZero => "f(0) = 0",
            Condition::SourceAtOne => "f(1) = 0",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub condition: Condition,
    /// Sample point with the largest deviation.
    pub x: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seminorms {
    pub phi: Seminorm,
    pub phi1: Seminorm,
    pub phi2: Seminorm,
    pub f: Seminorm,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub assumption_violations: Vec<Violation>,
    pub seminorms: Seminorms,
    /// `(1 + ‖φ‖)(‖φ₁‖ + ‖φ₂‖)`, the Lipschitz-norm bound on `T`.
    pub contraction_product: f64,
    pub contraction_margin: f64,
    /// `‖f‖ / margin`, present only for a positive margin.
    pub apriori_bound: Option<f64>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.assumption_violations.is_empty()
    }

    pub fn is_contractive(&self) -> bool {
        self.contraction_margin > 0.0
    }
}

#[derive(Default)]
struct Worst(Option<(f64, f64, f64)>);

impl Worst {
    fn record(&mut self, deviation: f64, x: f64, observed: f64) {
        if deviation > ASSUMPTION_TOLERANCE && self.0.is_none_or(|(d, ..)| deviation > d) {
            self.0 = Some((deviation, x, observed));
        }
    }
}

/// Checks the admissibility conditions at `samples` interior points plus both endpoints
/// and computes the contraction margin. Violations are reported, never raised.
pub fn validate(p: &Problem, samples: usize) -> Result<ValidationReport> {
    let hp = homogenize(p);
    let mut violations = Vec::new();
    let mut push = |condition, worst: Worst| {
        if let Some((_, x, observed)) = worst.0 {
            violations.push(Violation {
                condition,
                x,
                observed,
            });
        }
    };

    let single = |c: &Coefficient, x: f64, target: f64| -> Result<Worst> {
        let v = c.eval(x)?;
        let mut w = Worst::default();
        w.record((v - target).abs(), x, v);
        Ok(w)
    };
    push(Condition::PhiAtZero, single(&p.phi, 0.0, 0.0)?);
    push(Condition::PhiAtOne, single(&p.phi, 1.0, 1.0)?);
    push(Condition::Phi1AtOne, single(&p.phi1, 1.0, 1.0)?);
    push(Condition::Phi2AtZero, single(&p.phi2, 0.0, 0.0)?);

    let mut ranges = [Worst::default(), Worst::default(), Worst::default()];
    let last = (samples + 1) as f64;
    for j in 0..=samples + 1 {
        let x = j as f64 / last;
        for (worst, c) in ranges.iter_mut().zip([&p.phi, &p.phi1, &p.phi2]) {
            let v = c.eval(x)?;
            let deviation = (-v).max(v - 1.0);
            worst.record(deviation, x, v);
        }
    }
    let [phi_r, phi1_r, phi2_r] = ranges;
    push(Condition::PhiRange, phi_r);
    push(Condition::Phi1Range, phi1_r);
    push(Condition::Phi2Range, phi2_r);

    if p.is_homogeneous() {
        push(Condition::SourceAtZero, single(&p.f, 0.0, 0.0)?);
        push(Condition::SourceAtOne, single(&p.f, 1.0, 0.0)?);
    }

    let seminorms = Seminorms {
        phi: seminorm(&p.phi, DEFAULT_SEMINORM_SAMPLES)?,
        phi1: seminorm(&p.phi1, DEFAULT_SEMINORM_SAMPLES)?,
        phi2: seminorm(&p.phi2, DEFAULT_SEMINORM_SAMPLES)?,
        f: seminorm(&hp.f, DEFAULT_SEMINORM_SAMPLES)?,
    };
    let contraction_product =
        (1.0 + seminorms.phi.value) * (seminorms.phi1.value + seminorms.phi2.value);
    let contraction_margin = 1.0 - contraction_product;
    let apriori_bound = (contraction_margin > 0.0).then(|| seminorms.f.value / contraction_margin);

    let mut warnings = Vec::new();
    if contraction_margin <= 0.0 {
        warnings.push(format!(
            "contraction condition fails: (1 + |phi|)(|phi1| + |phi2|) = {contraction_product:.6} >= 1; \
             existence, uniqueness and Picard convergence are not guaranteed"
        ));
    }
    for (name, s) in [
        ("phi", &seminorms.phi),
        ("phi1", &seminorms.phi1),
        ("phi2", &seminorms.phi2),
    ] {
        if s.source == SeminormSource::Analytic && s.estimate > s.value * (1.0 + 1e-6) + 1e-9 {
            warnings.push(format!(
                "analytic seminorm of {name} ({}) is below its sampled estimate ({})",
                s.value, s.estimate
            ));
        }
    }

    Ok(ValidationReport {
        assumption_violations: violations,
        seminorms,
        contraction_product,
        contraction_margin,
        apriori_bound,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn fish(alpha: f64, beta: f64) -> Problem {
        Problem::new(
            "fish",
            Coefficient::native("x", |x| x).with_seminorm(1.0),
            Coefficient::native("1 - a + a x", move |x| 1.0 - alpha + alpha * x).with_seminorm(alpha),
            Coefficient::native("b x", move |x| beta * x).with_seminorm(beta),
            Coefficient::native("(b - a)(1 - x)x", move |x| (beta - alpha) * (1.0 - x) * x)
                .with_seminorm((beta - alpha).abs()),
        )
    }

    #[test]
    fn seminorm_of_identity() {
        let c = Coefficient::native("x", |x| x);
        assert!((seminorm_estimate(&c, 100).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seminorm_of_sine() {
        let c = Coefficient::native("sin(pi x)", |x| (PI * x).sin());
        let s = seminorm_estimate(&c, 10_000).unwrap();
        assert!((s - PI).abs() < 1e-3, "{s}");
        assert!(s <= PI);
    }

    #[test]
    fn seminorm_of_cusp_matches_first_cell_quotient() {
        let samples = 10_000;
        let u = |x: f64| (0.5 - (x - 0.5).abs()).sqrt();
        let c = Coefficient::native("cusp", u);
        // brute force over all consecutive pairs
        let s: Vec<f64> = (0..samples).map(|j| j as f64 / (samples - 1) as f64).collect();
        let brute = s
            .windows(2)
            .map(|w| (u(w[1]) - u(w[0])).abs() / (w[1] - w[0]))
            .fold(0.0, f64::max);
        let h = 1.0 / (samples - 1) as f64;
        assert!((brute - h.sqrt() / h).abs() / brute < 1e-9);
        let est = seminorm_estimate(&c, samples).unwrap();
        assert_eq!(est, brute);
        assert!(est > 99.0);
    }

    #[test]
    fn analytic_seminorm_preferred() {
        let c = Coefficient::native("x", |x| x).with_seminorm(1.5);
        let s = seminorm(&c, 64).unwrap();
        assert_eq!(s.value, 1.5);
        assert_eq!(s.source, SeminormSource::Analytic);
        assert!((s.estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seminorm_needs_two_samples() {
        let c = Coefficient::native("x", |x| x);
        assert!(matches!(seminorm_estimate(&c, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn fish_margin() {
        let r = validate(&fish(0.1, 0.2), 200).unwrap();
        assert!(r.assumption_violations.is_empty());
        assert!((r.contraction_margin - 0.4).abs() < 1e-12);
        let bound = r.apriori_bound.unwrap();
        assert!((bound - 0.1 / 0.4).abs() < 1e-12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn negative_margin_is_a_warning() {
        let r = validate(&fish(0.4, 0.9), 200).unwrap();
        assert!((r.contraction_margin + 1.6).abs() < 1e-12);
        assert!(r.apriori_bound.is_none());
        assert!(r.is_admissible());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn violations_are_reported_with_worst_point() {
        let p = Problem::new(
            "bad",
            Coefficient::native("1.2x", |x| 1.2 * x),
            Coefficient::native("x", |x| x),
            Coefficient::native("x/2 + 0.1", |x| x / 2.0 + 0.1),
            Coefficient::native("1", |_| 1.0),
        );
        let r = validate(&p, 9).unwrap();
        let conds: Vec<Condition> = r.assumption_violations.iter().map(|v| v.condition).collect();
        assert_eq!(
            conds,
            vec![
                Condition::PhiAtOne,
                Condition::Phi2AtZero,
                Condition::PhiRange,
                Condition::SourceAtZero,
                Condition::SourceAtOne
            ]
        );
        let range = &r.assumption_violations[2];
        assert_eq!(range.x, 1.0);
        assert!((range.observed - 1.2).abs() < 1e-15);
    }

    #[test]
    fn evaluation_errors_propagate() {
        // the range scan hits x = 1/2
        let expr = parse("x + 1/(x - 0.5)").unwrap();
        let mut p = fish(0.1, 0.2);
        p.phi = Coefficient::from_expr(&expr, &Params::new()).unwrap();
        assert!(matches!(validate(&p, 3), Err(Error::Eval { x, .. }) if x == 0.5));
    }

    #[test]
    fn apply_t_examples() {
        let p = fish(0.1, 0.3);
        let zero = |_: f64| Ok(0.0);
        assert_eq!(p.apply_t(zero, 0.37).unwrap(), 0.0);
        let c = |_: f64| Ok(2.5);
        assert!((p.apply_t(c, 0.37).unwrap() - 2.5).abs() < 1e-15);
        let id = |t: f64| Ok(t);
        assert!((p.apply_t(id, 0.5).unwrap() - 0.55).abs() < 1e-15);
    }

    #[test]
    fn homogenize_identity_on_homogeneous() {
        let p = fish(0.2, 0.4);
        let q = homogenize(&p);
        assert!(q.lift.is_none());
        assert_eq!(q.f.label(), p.f.label());
    }

    #[test]
    fn homogenize_constant_boundary_gives_zero_source() {
        let p = Problem::new(
            "const",
            Coefficient::native("x^2", |x| x * x),
            Coefficient::native("(1+x)/2", |x| (1.0 + x) / 2.0),
            Coefficient::native("x/3", |x| x / 3.0),
            Coefficient::constant(0.0),
        )
        .with_boundary(1.0, 1.0);
        let q = homogenize(&p);
        assert!(q.is_homogeneous());
        assert_eq!(q.lift, Some(Lift { u0: 1.0, u1: 1.0 }));
        for j in 0..=20 {
            let x = j as f64 / 20.0;
            assert!(q.f.eval(x).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn homogenize_raw_fish_gives_fish_source() {
        let (alpha, beta) = (0.1, 0.5);
        let mut raw = fish(alpha, beta).with_boundary(0.0, 1.0);
        raw.f = Coefficient::constant(0.0);
        let q = homogenize(&raw);
        for j in 0..=50 {
            let x = j as f64 / 50.0;
            let expected = (beta - alpha) * (1.0 - x) * x;
            assert!((q.f.eval(x).unwrap() - expected).abs() < 1e-15);
        }
        assert!((q.lift_value(0.3) - 0.3).abs() < 1e-15);
    }
}
