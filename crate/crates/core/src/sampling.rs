//! Seeded random test functions and the property drivers built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::collocation::{project, Grid, PiecewiseLinear};
use crate::error::Result;
use crate::problem::{sampled_seminorm, validate, Problem, DEFAULT_SEMINORM_SAMPLES};

/// Cells of the random functions fed to the operator.
pub const CONTRACTION_CELLS: usize = 64;

/// Points used to estimate the seminorm of `T v`.
pub const CONTRACTION_SAMPLES: usize = 4097;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Piecewise-linear function with zero boundary values and interior nodal values
/// drawn uniformly from `[-1, 1]`.
pub fn random_h01<R: Rng>(rng: &mut R, grid: Grid) -> PiecewiseLinear {
    let n = grid.n();
    let values: Vec<f64> = (0..=n)
        .map(|i| if i == 0 || i == n { 0.0 } else { rng.gen_range(-1.0..=1.0) })
        .collect();
    PiecewiseLinear::from_nodal_values(grid, &values).expect("n + 1 values")
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionCheck {
    pub trials: usize,
    pub seed: u64,
    pub contraction_product: f64,
    /// Largest observed `|T v| / |v|`.
    pub worst_ratio: f64,
    /// Largest `|T v| − q |v|`; the bound holds when this stays below the tolerance.
    pub worst_excess: f64,
}

impl ContractionCheck {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.worst_excess <= tolerance
    }
}

/// Compares the sampled seminorm of `T v` (source excluded) against `q |v|` for
/// `trials` random `v ∈ H₀¹`.
pub fn check_contraction(p: &Problem, trials: usize, seed: u64) -> Result<ContractionCheck> {
    let q = validate(p, DEFAULT_SEMINORM_SAMPLES)?.contraction_product;
    let grid = Grid::new(CONTRACTION_CELLS)?;
    let mut rng = rng(seed);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..trials {
        let v = random_h01(&mut rng, grid);
        let norm = v.seminorm();
        let tv = sampled_seminorm(|x| p.apply_t(|t| v.eval(t), x), CONTRACTION_SAMPLES)?;
        if norm > 0.0 {
            worst_ratio = worst_ratio.max(tv / norm);
        }
        worst_excess = worst_excess.max(tv - q * norm);
    }
    Ok(ContractionCheck {
        trials,
        seed,
        contraction_product: q,
        worst_ratio,
        worst_excess,
    })
}

/// Largest `|P_h v| − |v|` over `trials` random `v ∈ H₀¹` on a grid `refine` times finer.
pub fn projection_excess(grid: Grid, refine: usize, trials: usize, seed: u64) -> Result<f64> {
    let fine = Grid::new(grid.n() * refine)?;
    let mut rng = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let v = random_h01(&mut rng, fine);
        let ph = project(grid, |x| v.eval(x))?;
        worst = worst.max(ph.seminorm() - v.seminorm());
    }
    Ok(worst)
}
