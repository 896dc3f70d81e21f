//! Picard iteration `u_k = T u_{k−1} + f` in two independent forms: exact
//! recursion (no discretization, `2^K` evaluations per point) and a memoized
//! grid variant that projects each iterate onto a piecewise-linear space.

use rayon::prelude::*;
use serde::Serialize;

use crate::collocation::{Grid, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::problem::{homogenize, validate, Problem};

/// Deepest exact recursion allowed; cost doubles with every level.
pub const MAX_RECURSIVE_DEPTH: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardMode {
    ExactRecursive,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    #[default]
    Zero,
    SourceF,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PicardConfig {
    pub mode: PicardMode,
    pub depth: u32,
    /// Number of grid cells; ignored by the recursive mode.
    pub grid_size: usize,
    pub initial_guess: InitialGuess,
}

impl PicardConfig {
    pub fn recursive(depth: u32) -> Self {
        PicardConfig {
            mode: PicardMode::ExactRecursive,
            depth,
            grid_size: 0,
            initial_guess: InitialGuess::Zero,
        }
    }

    pub fn grid(depth: u32, grid_size: usize) -> Self {
        PicardConfig {
            mode: PicardMode::Grid,
            depth,
            grid_size,
            initial_guess: InitialGuess::Zero,
        }
    }

    pub fn with_initial_guess(mut self, guess: InitialGuess) -> Self {
        self.initial_guess = guess;
        self
    }
}

/// Convergence is only guaranteed for a positive contraction margin; returns the
/// reason when it is not.
pub fn convergence_warning(p: &Problem) -> Result<Option<String>> {
    let report = validate(p, 1000)?;
    Ok((!report.is_contractive()).then(|| {
        format!(
            "contraction margin {:.6} is not positive; Picard iterates may not converge",
            report.contraction_margin
        )
    }))
}

fn iterate(p: &Problem, depth: u32, guess: InitialGuess, x: f64) -> Result<f64> {
    if depth == 0 {
        return match guess {
            InitialGuess::Zero => Ok(0.0),
            InitialGuess::SourceF => p.f.eval(x),
        };
    }
    if depth == 1 && guess == InitialGuess::Zero {
        // T0 = 0; skips the leaf level, which is half of all evaluations
        return p.f.eval(x);
    }
    let w = p.phi.eval(x)?;
    let left = iterate(p, depth - 1, guess, p.phi1.eval(x)?)?;
    let right = iterate(p, depth - 1, guess, p.phi2.eval(x)?)?;
    Ok(w * left + (1.0 - w) * right + p.f.eval(x)?)
}

/// `u_K(x)` by direct recursion. Non-homogeneous problems are homogenized first, so the
/// value returned is for the shifted unknown.
pub fn picard_eval(p: &Problem, cfg: &PicardConfig, x: f64) -> Result<f64> {
    if cfg.mode != PicardMode::ExactRecursive {
        return Err(Error::InvalidInput("picard_eval needs the exact_recursive mode".into()));
    }
    if cfg.depth == 0 {
        return Err(Error::InvalidInput("Picard depth must be positive".into()));
    }
    if cfg.depth > MAX_RECURSIVE_DEPTH {
        return Err(Error::DepthCap {
            depth: cfg.depth,
            cap: MAX_RECURSIVE_DEPTH,
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { t: x });
    }
    let hp = homogenize(p);
    iterate(&hp, cfg.depth, cfg.initial_guess, x)
}

/// Recursive Picard values at several points, evaluated in parallel.
pub fn picard_eval_many(p: &Problem, cfg: &PicardConfig, xs: &[f64]) -> Result<Vec<f64>> {
    xs.par_iter().map(|&x| picard_eval(p, cfg, x)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardGridReport {
    pub solution: PiecewiseLinear,
    /// `‖v_k − v_{k−1}‖_∞` over the nodes, one entry per iteration.
    pub updates: Vec<f64>,
    pub warning: Option<String>,
}

impl PicardGridReport {
    pub fn final_update(&self) -> f64 {
        self.updates.last().copied().unwrap_or(0.0)
    }
}

struct NodeMap {
    phi: f64,
    phi1: f64,
    phi2: f64,
    f: f64,
    left: usize,
    right: usize,
}

/// Iterates `v_{k+1} = P_h(T v_k + f)` on an `m`-cell grid, `K` times.
pub fn picard_grid(p: &Problem, cfg: &PicardConfig) -> Result<PicardGridReport> {
    if cfg.mode != PicardMode::Grid {
        return Err(Error::InvalidInput("picard_grid needs the grid mode".into()));
    }
    if cfg.depth == 0 {
        return Err(Error::InvalidInput("Picard depth must be positive".into()));
    }
    let grid = Grid::new(cfg.grid_size)?;
    let hp = homogenize(p);
    let warning = convergence_warning(&hp)?;
    let maps = grid
        .nodes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| {
            let phi1 = hp.phi1.eval(x)?;
            let phi2 = hp.phi2.eval(x)?;
            Ok(NodeMap {
                phi: hp.phi.eval(x)?,
                phi1,
                phi2,
                f: hp.f.eval(x)?,
                left: grid.locate(phi1)?,
                right: grid.locate(phi2)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut v = match cfg.initial_guess {
        InitialGuess::Zero => PiecewiseLinear::zero(grid),
        InitialGuess::SourceF => {
            let values: Vec<f64> = maps.iter().map(|m| m.f).collect();
            PiecewiseLinear::from_nodal_values(grid, &values)?
        }
    };
    let mut current = v.nodal_values();
    let mut updates = Vec::with_capacity(cfg.depth as usize);
    for _ in 0..cfg.depth {
        let pieces = v.pieces();
        let next: Vec<f64> = maps
            .par_iter()
            .map(|m| {
                let (a1, b1) = pieces[m.left - 1];
                let (a2, b2) = pieces[m.right - 1];
                m.phi * (a1 * m.phi1 + b1) + (1.0 - m.phi) * (a2 * m.phi2 + b2) + m.f
            })
            .collect();
        let update = next
            .iter()
            .zip(&current)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        updates.push(update);
        v = PiecewiseLinear::from_nodal_values(grid, &next)?;
        current = next;
    }
    Ok(PicardGridReport {
        solution: v,
        updates,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::problem::{validate, Coefficient};

    #[test]
    fn one_step_from_zero_is_the_source() {
        let m = models::fish(0.1, 0.3).unwrap();
        for x in [0.0, 0.2, 0.5, 0.77, 1.0] {
            let v = picard_eval(&m.problem, &PicardConfig::recursive(1), x).unwrap();
            assert_eq!(v, m.problem.f.eval(x).unwrap());
        }
    }

    #[test]
    fn zero_source_stays_zero() {
        let m = models::fish(0.4, 0.4).unwrap();
        for k in [1, 5, 12] {
            assert_eq!(picard_eval(&m.problem, &PicardConfig::recursive(k), 0.3).unwrap(), 0.0);
        }
        let r = picard_grid(&m.problem, &PicardConfig::grid(25, 64)).unwrap();
        assert!(r.solution.nodal_values().iter().all(|&v| v == 0.0));
        assert!(r.updates.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn depth_limits() {
        let p = models::fish(0.1, 0.3).unwrap().problem;
        assert!(matches!(
            picard_eval(&p, &PicardConfig::recursive(31), 0.5),
            Err(Error::DepthCap { depth: 31, cap: 30 })
        ));
        assert!(picard_eval(&p, &PicardConfig::recursive(0), 0.5).is_err());
        assert!(picard_eval(&p, &PicardConfig::grid(3, 8), 0.5).is_err());
        assert!(picard_grid(&p, &PicardConfig::recursive(3)).is_err());
        assert!(picard_eval(&p, &PicardConfig::recursive(3), 1.5).is_err());
    }

    #[test]
    fn source_initial_guess_saves_one_iteration() {
        let p = models::manufactured_smooth(0.2).unwrap().problem;
        let a = picard_eval(&p, &PicardConfig::recursive(6), 0.4).unwrap();
        let b = picard_eval(
            &p,
            &PicardConfig::recursive(5).with_initial_guess(InitialGuess::SourceF),
            0.4,
        )
        .unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn grid_updates_contract() {
        for m in [
            models::fish(0.1, 0.3).unwrap(),
            models::manufactured_smooth(0.2).unwrap(),
            models::manufactured_nonsmooth(0.3).unwrap(),
        ] {
            let q = validate(&m.problem, 100).unwrap().contraction_product;
            let r = picard_grid(&m.problem, &PicardConfig::grid(60, 512)).unwrap();
            for w in r.updates.windows(2) {
                assert!(w[1] <= q * w[0] + 1e-13, "{}: {w:?}", m.problem.name);
            }
        }
    }

    #[test]
    fn non_contractive_problems_are_flagged() {
        let p = models::fish(0.4, 0.9).unwrap().problem;
        assert!(convergence_warning(&p).unwrap().is_some());
        assert!(picard_grid(&p, &PicardConfig::grid(3, 8)).unwrap().warning.is_some());
        let q = models::fish(0.1, 0.2).unwrap().problem;
        assert!(picard_grid(&q, &PicardConfig::grid(3, 8)).unwrap().warning.is_none());
    }

    #[test]
    fn grid_picard_recovers_sine() {
        let m = models::manufactured_smooth(0.2).unwrap();
        let r = picard_grid(&m.problem, &PicardConfig::grid(100, 4096)).unwrap();
        let g = r.solution.grid();
        let err = r
            .solution
            .nodal_values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - m.exact.as_ref().unwrap().eval(g.node(i))).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-5, "{err}");
        assert!(r.final_update() < 1e-12);
    }

    #[test]
    fn non_homogeneous_problem_is_shifted() {
        let raw = models::fish_raw(0.2, 0.2).unwrap().problem;
        // α = β: homogenized source vanishes so every iterate is zero
        let v = picard_eval(&raw, &PicardConfig::recursive(8), 0.6).unwrap();
        assert!(v.abs() < 1e-15);
        let mut p = raw.clone();
        p.f = Coefficient::constant(0.0);
        let r = picard_grid(&p, &PicardConfig::grid(10, 32)).unwrap();
        assert!(r.solution.nodal_values().iter().all(|v| v.abs() < 1e-15));
    }
}
