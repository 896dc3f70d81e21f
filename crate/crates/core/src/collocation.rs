//! Piecewise-linear collocation on a uniform grid.
//!
//! The approximation is `u_h(x) = a_i x + b_i` on `[x_{i-1}, x_i]`, `1 ≤ i ≤ n`.
//! The `2n` unknowns are ordered `(a_1, b_1, …, a_n, b_n)` and determined by
//! one boundary row `b_1 = 0`, `n − 1` continuity rows, `n − 1` collocation rows
//! at the interior nodes, and the boundary row `a_n + b_n = 0`.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lu::Lu;
use crate::problem::{homogenize, Lift, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Grid> {
        if n == 0 {
            return Err(Error::InvalidInput("a grid needs at least one subinterval".into()));
        }
        Ok(Grid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `x_i = i/n`; exact at both ends.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|i| self.node(i))
    }

    /// Index `i ∈ [1, n]` with `x_{i-1} ≤ t ≤ x_i`; interior ties go to the left interval.
    pub fn locate(&self, t: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain { t });
        }
        let n = self.n;
        let mut i = ((t * n as f64).ceil() as usize).clamp(1, n);
        // t*n can round across a node; settle against the node values themselves
        while i > 1 && t <= self.node(i - 1) {
            i -= 1;
        }
        while i < n && t > self.node(i) {
            i += 1;
        }
        Ok(i)
    }
}

/// Continuous piecewise-linear function on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    grid: Grid,
    /// `(a_i, b_i)` for interval `i`, stored at index `i − 1`.
    pieces: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(grid: Grid, pieces: Vec<(f64, f64)>) -> Result<Self> {
        if pieces.len() != grid.n() {
            return Err(Error::InvalidInput(format!(
                "{} pieces for a grid of {} intervals",
                pieces.len(),
                grid.n()
            )));
        }
        Ok(PiecewiseLinear { grid, pieces })
    }

    pub fn zero(grid: Grid) -> Self {
        PiecewiseLinear {
            grid,
            pieces: vec![(0.0, 0.0); grid.n()],
        }
    }

    /// The nodal interpolant of `values` (one per node, `n + 1` total).
    pub fn from_nodal_values(grid: Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.n() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} nodal values for a grid of {} intervals",
                values.len(),
                grid.n()
            )));
        }
        let pieces = (1..=grid.n())
            .map(|i| {
                let (xl, xr) = (grid.node(i - 1), grid.node(i));
                let a = (values[i] - values[i - 1]) / (xr - xl);
                (a, values[i - 1] - a * xl)
            })
            .collect();
        Ok(PiecewiseLinear { grid, pieces })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = self.grid.locate(t)?;
        let (a, b) = self.pieces[i - 1];
        Ok(a * t + b)
    }

    /// `u(x_i)` for `0 ≤ i ≤ n`, each taken from the interval left of the node (interval 1 at `x_0`).
    pub fn nodal_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.n() + 1);
        out.push(self.pieces[0].1);
        for (i, &(a, b)) in self.pieces.iter().enumerate() {
            out.push(a * self.grid.node(i + 1) + b);
        }
        out
    }

    /// Exact Lipschitz seminorm, the largest slope.
    pub fn seminorm(&self) -> f64 {
        self.pieces.iter().fold(0.0, |m, &(a, _)| m.max(a.abs()))
    }

    /// Largest relative mismatch between neighbouring pieces at interior nodes.
    pub fn continuity_defect(&self) -> f64 {
        self.pieces
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let x = self.grid.node(k + 1);
                let (l, r) = (w[0].0 * x + w[0].1, w[1].0 * x + w[1].1);
                (l - r).abs() / l.abs().max(r.abs()).max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Nodal interpolation of `v` onto `grid`.
pub fn project<F>(grid: Grid, v: F) -> Result<PiecewiseLinear>
where
    F: Fn(f64) -> Result<f64>,
{
    let values = grid.nodes().map(v).collect::<Result<Vec<_>>>()?;
    PiecewiseLinear::from_nodal_values(grid, &values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Continuity,
    Collocation,
    Boundary,
}

/// Coefficient data sampled at one collocation node.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CollocationNode {
    pub index: usize,
    pub x: f64,
    pub phi: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct CollocationSystem {
    pub grid: Grid,
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
    pub row_labels: Vec<RowKind>,
    pub nodes: Vec<CollocationNode>,
}

impl CollocationSystem {
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dim + col]
    }

    pub fn count(&self, kind: RowKind) -> usize {
        self.row_labels.iter().filter(|&&k| k == kind).count()
    }
}

const fn a_col(i: usize) -> usize {
    2 * (i - 1)
}

const fn b_col(i: usize) -> usize {
    2 * (i - 1) + 1
}

pub fn assemble(p: &Problem, grid: Grid) -> Result<CollocationSystem> {
    if !p.is_homogeneous() {
        return Err(Error::NotHomogeneous(p.name.clone()));
    }
    let n = grid.n();
    let dim = 2 * n;
    let nodes = (1..n)
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            Ok(CollocationNode {
                index: i,
                x,
                phi: p.phi.eval(x)?,
                phi1: p.phi1.eval(x)?,
                phi2: p.phi2.eval(x)?,
                f: p.f.eval(x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut matrix = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    let mut row_labels = Vec::with_capacity(dim);

    let mut row = 0;
    matrix[b_col(1)] = 1.0;
    row_labels.push(RowKind::Boundary);
    row += 1;

    for i in 1..n {
        let x = grid.node(i);
        let r = &mut matrix[row * dim..(row + 1) * dim];
        r[a_col(i)] = x;
        r[b_col(i)] = 1.0;
        r[a_col(i + 1)] = -x;
        r[b_col(i + 1)] = -1.0;
        row_labels.push(RowKind::Continuity);
        row += 1;
    }

    for node in &nodes {
        let i = node.index;
        let j = grid.locate(node.phi1)?;
        let k = grid.locate(node.phi2)?;
        let r = &mut matrix[row * dim..(row + 1) * dim];
        r[a_col(i)] += node.x;
        r[b_col(i)] += 1.0;
        r[a_col(j)] -= node.phi * node.phi1;
        r[b_col(j)] -= node.phi;
        r[a_col(k)] -= (1.0 - node.phi) * node.phi2;
        r[b_col(k)] -= 1.0 - node.phi;
        rhs[row] = node.f;
        row_labels.push(RowKind::Collocation);
        row += 1;
    }

    let r = &mut matrix[row * dim..(row + 1) * dim];
    r[a_col(n)] = 1.0;
    r[b_col(n)] = 1.0;
    row_labels.push(RowKind::Boundary);

    Ok(CollocationSystem {
        grid,
        dim,
        matrix,
        rhs,
        row_labels,
        nodes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub solution: PiecewiseLinear,
    /// Boundary values removed by homogenization, if any.
    pub lift: Option<Lift>,
    /// Largest collocation residual, re-evaluated through `eval` after the solve.
    pub residual_max: f64,
    pub continuity_max: f64,
    pub boundary_max: f64,
    pub min_pivot: f64,
    pub condition_warning: bool,
    pub assembly_time: Duration,
    pub solve_time: Duration,
}

impl SolveReport {
    /// `u_h(t) + h(t)`: the solution of the problem before homogenization.
    pub fn physical(&self, t: f64) -> Result<f64> {
        Ok(self.solution.eval(t)? + self.lift.map_or(0.0, |l| l.value(t)))
    }
}

pub fn solve(sys: &CollocationSystem) -> Result<SolveReport> {
    let start = Instant::now();
    let lu = Lu::factor(sys.matrix.clone(), sys.dim)?;
    let z = lu.solve(&sys.rhs)?;
    let pieces: Vec<(f64, f64)> = z.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let solution = PiecewiseLinear::new(sys.grid, pieces)?;
    let solve_time = start.elapsed();

    let mut residual_max: f64 = 0.0;
    for node in &sys.nodes {
        let tu = node.phi * solution.eval(node.phi1)? + (1.0 - node.phi) * solution.eval(node.phi2)?;
        let r = solution.eval(node.x)? - tu - node.f;
        residual_max = residual_max.max(r.abs());
    }
    let continuity_max = solution
        .pieces
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let x = sys.grid.node(k + 1);
            ((w[0].0 * x + w[0].1) - (w[1].0 * x + w[1].1)).abs()
        })
        .fold(0.0, f64::max);
    let (a_n, b_n) = solution.pieces[sys.grid.n() - 1];
    let boundary_max = solution.pieces[0].1.abs().max((a_n + b_n).abs());

    Ok(SolveReport {
        solution,
        lift: None,
        residual_max,
        continuity_max,
        boundary_max,
        min_pivot: lu.min_pivot,
        condition_warning: lu.ill_conditioned(),
        assembly_time: Duration::ZERO,
        solve_time,
    })
}

/// Homogenizes if needed, assembles on an `n`-interval grid, and solves.
pub fn collocate(p: &Problem, n: usize) -> Result<SolveReport> {
    let grid = Grid::new(n)?;
    let hp = homogenize(p);
    let start = Instant::now();
    let sys = assemble(&hp, grid)?;
    let assembly_time = start.elapsed();
    let mut report = solve(&sys)?;
    report.assembly_time = assembly_time;
    report.lift = hp.lift;
    Ok(report)
}
