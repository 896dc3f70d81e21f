//! Error norms, convergence-order estimation, and timing benchmarks.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::collocation::{collocate, PiecewiseLinear, SolveReport};
use crate::error::{Error, Result};
use crate::models::ExactSolution;
use crate::picard::{picard_eval_many, PicardConfig};
use crate::problem::{sampled_seminorm, Problem};

/// Uniform evaluation points shared by all levels of a convergence ladder.
pub const DEFAULT_EVAL_POINTS: usize = 2049;

/// Differences below this are treated as exact agreement and get no order.
pub const ORDER_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub sup_error: f64,
    pub rms_error: f64,
    /// Sampled Lipschitz seminorm of the difference.
    pub lipschitz_error: f64,
    pub eval_points: usize,
}

fn uniform(points: usize) -> impl Iterator<Item = f64> {
    let last = (points - 1) as f64;
    (0..points).map(move |j| j as f64 / last)
}

/// Error metrics between two callables on `points` uniform samples including both ends.
pub fn compare_fns<A, B>(a: A, b: B, points: usize) -> Result<ErrorMetrics>
where
    A: Fn(f64) -> Result<f64>,
    B: Fn(f64) -> Result<f64>,
{
    if points < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 points, got {points}")));
    }
    let mut sup: f64 = 0.0;
    let mut sum_sq = 0.0;
    for x in uniform(points) {
        let d = (a(x)? - b(x)?).abs();
        sup = sup.max(d);
        sum_sq += d * d;
    }
    let lipschitz_error = sampled_seminorm(|x| Ok(a(x)? - b(x)?), points)?;
    Ok(ErrorMetrics {
        sup_error: sup,
        rms_error: (sum_sq / points as f64).sqrt(),
        lipschitz_error,
        eval_points: points,
    })
}

pub fn compare<F>(u: &PiecewiseLinear, reference: F, points: usize) -> Result<ErrorMetrics>
where
    F: Fn(f64) -> Result<f64>,
{
    compare_fns(|x| u.eval(x), reference, points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderMode {
    ExactReference,
    Extrapolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    /// `‖u_n − u_{2n}‖_∞` on the evaluation set; absent on the finest level.
    pub difference: Option<f64>,
    /// `log₂(d_n / d_{2n})`; absent where fewer than three levels remain or a guard fired.
    pub order: Option<f64>,
    pub true_error: Option<f64>,
    pub true_order: Option<f64>,
    /// Set when the order guard suppressed a ratio of near-zero differences.
    pub exact_to_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub mode: OrderMode,
    pub base_n: usize,
    pub eval_points: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Why the ladder stopped early, if it did; rows before the failure are kept.
    pub failure: Option<String>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn true_orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.true_order).collect()
    }

    /// The headline estimate: the first extrapolated order (from the three coarsest levels).
    pub fn leading_order(&self) -> Option<f64> {
        self.rows.first().and_then(|r| r.order)
    }
}

fn guarded_log2(coarse: f64, fine: f64) -> Option<f64> {
    (coarse >= ORDER_GUARD && fine >= ORDER_GUARD).then(|| (coarse / fine).log2())
}

#[derive(Debug, Clone, Copy)]
pub struct OrderOptions {
    pub eval_points: usize,
}

impl Default for OrderOptions {
    fn default() -> Self {
        OrderOptions {
            eval_points: DEFAULT_EVAL_POINTS,
        }
    }
}

/// Solves at `n = base_n·2^j` for `j < levels` and estimates the order from successive
/// sup-norm differences; with an exact solution also reports true-error orders.
pub fn estimate_order(
    p: &Problem,
    exact: Option<&ExactSolution>,
    base_n: usize,
    levels: usize,
    options: OrderOptions,
) -> Result<ConvergenceTable> {
    if !base_n.is_power_of_two() {
        return Err(Error::InvalidInput(format!("base_n must be a power of two, got {base_n}")));
    }
    if levels < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 levels, got {levels}")));
    }
    if options.eval_points < 2 {
        return Err(Error::InvalidInput("need at least 2 evaluation points".into()));
    }
    let ns: Vec<usize> = (0..levels).map(|j| base_n << j).collect();
    let solved: Vec<Result<SolveReport>> = ns.par_iter().map(|&n| collocate(p, n)).collect();

    let mut failure = None;
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (n, r) in ns.iter().zip(solved) {
        // exact solutions describe the problem as posed, so raw problems are compared with the lift added
        let posed = |rep: &SolveReport, x: f64| {
            if p.is_homogeneous() {
                rep.solution.eval(x)
            } else {
                rep.physical(x)
            }
        };
        match r.and_then(|rep| uniform(options.eval_points).map(|x| posed(&rep, x)).collect()) {
            Ok(values) => samples.push(values),
            Err(e) => {
                failure = Some(format!("n = {n}: {e}"));
                break;
            }
        }
    }
    let exact_values: Option<Vec<f64>> =
        exact.map(|u| uniform(options.eval_points).map(|x| u.eval(x)).collect());

    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let differences: Vec<f64> = samples.windows(2).map(|w| sup(&w[0], &w[1])).collect();
    let true_errors: Option<Vec<f64>> = exact_values
        .as_ref()
        .map(|ex| samples.iter().map(|s| sup(s, ex)).collect());

    let rows = (0..samples.len())
        .map(|j| {
            let difference = differences.get(j).copied();
            let next = differences.get(j + 1).copied();
            let (order, guarded) = match (difference, next) {
                (Some(d0), Some(d1)) => {
                    let o = guarded_log2(d0, d1);
                    (o, o.is_none())
                }
                _ => (None, difference.is_some_and(|d| d < ORDER_GUARD)),
            };
            let true_error = true_errors.as_ref().map(|e| e[j]);
            let true_order = true_errors
                .as_ref()
                .and_then(|e| e.get(j + 1).and_then(|&fine| guarded_log2(e[j], fine)));
            ConvergenceRow {
                n: ns[j],
                h: 1.0 / ns[j] as f64,
                difference,
                order,
                true_error,
                true_order,
                exact_to_tolerance: guarded,
            }
        })
        .collect();

    Ok(ConvergenceTable {
        mode: if exact.is_some() {
            OrderMode::ExactReference
        } else {
            OrderMode::Extrapolation
        },
        base_n,
        eval_points: options.eval_points,
        rows,
        failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub exponent: f64,
    pub prefactor: f64,
}

/// Least-squares fit of `log y = log c + e·log x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("xs and ys differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("a log-log fit needs at least 2 points".into()));
    }
    if let Some(v) = xs.iter().chain(ys).find(|&&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("log-log fit needs positive values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("log-log fit needs at least two distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    Ok(LogLogFit {
        exponent,
        prefactor: (my - exponent * mx).exp(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub assembly_time: f64,
    pub solve_time: f64,
    pub total_time: f64,
    /// RMS error against the exact solution, or against the finest solve when none is known.
    pub error_proxy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub repetitions: usize,
    /// Fit of total time against `n` over all sizes.
    pub fit: Option<LogLogFit>,
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// Times assembly and solve at each `n` (one discarded warm-up, median of `repetitions`).
/// Runs are strictly sequential so timings do not contend with each other.
pub fn benchmark(
    p: &Problem,
    exact: Option<&ExactSolution>,
    n_values: &[usize],
    repetitions: usize,
    error_points: usize,
) -> Result<BenchTable> {
    if repetitions == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    if n_values.is_empty() || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("n values must be non-empty and strictly ascending".into()));
    }
    let mut solutions = Vec::with_capacity(n_values.len());
    let mut timings = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut report = collocate(p, n)?;
        let (mut asm, mut sol, mut tot) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..repetitions {
            let start = Instant::now();
            report = collocate(p, n)?;
            tot.push(start.elapsed());
            asm.push(report.assembly_time);
            sol.push(report.solve_time);
        }
        timings.push((median(asm), median(sol), median(tot)));
        solutions.push(report.solution);
    }

    let finest = solutions.last().cloned();
    let rows = n_values
        .iter()
        .zip(&timings)
        .zip(&solutions)
        .enumerate()
        .map(|(idx, ((&n, &(asm, sol, tot)), u))| {
            let error_proxy = match (exact, &finest) {
                (Some(ex), _) => Some(compare(u, |x| Ok(ex.eval(x)), error_points)?.rms_error),
                (None, Some(fine)) if idx + 1 < n_values.len() => {
                    Some(compare_fns(|x| u.eval(x), |x| fine.eval(x), error_points)?.rms_error)
                }
                _ => None,
            };
            Ok(BenchRow {
                n,
                assembly_time: asm.as_secs_f64(),
                solve_time: sol.as_secs_f64(),
                total_time: tot.as_secs_f64(),
                error_proxy,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fit = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.total_time.max(1e-9)).collect();
        Some(fit_loglog(&xs, &ys)?)
    } else {
        None
    };
    Ok(BenchTable {
        rows,
        repetitions,
        fit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardCostRow {
    pub depth: u32,
    pub time: f64,
    pub rms_error: f64,
}

/// Time and RMS error of exact-recursive Picard at `points` uniform samples, for each depth.
pub fn picard_cost(
    p: &Problem,
    exact: &ExactSolution,
    depths: impl IntoIterator<Item = u32>,
    points: usize,
) -> Result<Vec<PicardCostRow>> {
    if points < 2 {
        return Err(Error::InvalidInput("need at least 2 points".into()));
    }
    let xs: Vec<f64> = uniform(points).collect();
    let reference: Vec<f64> = xs.iter().map(|&x| exact.eval(x)).collect();
    depths
        .into_iter()
        .map(|k| {
            let start = Instant::now();
            let values = picard_eval_many(p, &PicardConfig::recursive(k), &xs)?;
            let time = start.elapsed().as_secs_f64();
            let sum_sq: f64 = values.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum();
            Ok(PicardCostRow {
                depth: k,
                time,
                rms_error: (sum_sq / points as f64).sqrt(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CostToAccuracy {
    pub target_rms: f64,
    /// Smallest `n` (doubling from 8) whose collocation RMS error meets the target.
    /// Times are medians of repeated runs at the selected `n` and depth.
    pub collocation_n: usize,
    pub collocation_time: f64,
    /// Smallest recursion depth whose RMS error meets the target.
    pub picard_depth: u32,
    pub picard_time: f64,
}

/// Timed repetitions per method in [`cost_to_accuracy`]; the median is reported.
pub const COST_REPETITIONS: usize = 5;

fn median_time<T>(mut run: impl FnMut() -> Result<T>) -> Result<f64> {
    let mut times = Vec::with_capacity(COST_REPETITIONS);
    for _ in 0..COST_REPETITIONS {
        let start = Instant::now();
        run()?;
        times.push(start.elapsed());
    }
    Ok(median(times).as_secs_f64())
}

/// Cost of reaching `target_rms` (on `points` uniform samples) with collocation versus
/// exact-recursive Picard. Picard depths are tried in increasing order up to `max_depth`.
pub fn cost_to_accuracy(
    p: &Problem,
    exact: &ExactSolution,
    target_rms: f64,
    points: usize,
    max_depth: u32,
) -> Result<CostToAccuracy> {
    let mut n = 8;
    let collocation_n = loop {
        let report = collocate(p, n)?;
        let err = compare(&report.solution, |x| Ok(exact.eval(x)), points)?.rms_error;
        if err <= target_rms {
            break n;
        }
        if n >= 1 << 14 {
            return Err(Error::InvalidInput(format!(
                "collocation did not reach RMS {target_rms:e} by n = {n}"
            )));
        }
        n *= 2;
    };
    let collocation_time = median_time(|| collocate(p, collocation_n))?;

    let xs: Vec<f64> = uniform(points).collect();
    for k in 1..=max_depth {
        let row = picard_cost(p, exact, [k], points)?.remove(0);
        if row.rms_error <= target_rms {
            let cfg = PicardConfig::recursive(k);
            return Ok(CostToAccuracy {
                target_rms,
                collocation_n,
                collocation_time,
                picard_depth: k,
                picard_time: median_time(|| picard_eval_many(p, &cfg, &xs))?,
            });
        }
    }
    Err(Error::InvalidInput(format!(
        "Picard did not reach RMS {target_rms:e} within depth {max_depth}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collocation::Grid;
    use crate::models;
    use std::f64::consts::PI;

    #[test]
    fn compare_zero_functions() {
        let u = PiecewiseLinear::zero(Grid::new(4).unwrap());
        let m = compare(&u, |_| Ok(0.0), 11).unwrap();
        assert_eq!((m.sup_error, m.rms_error, m.lipschitz_error), (0.0, 0.0, 0.0));
        assert!(compare(&u, |_| Ok(0.0), 1).is_err());
    }

    #[test]
    fn compare_against_sine_peak() {
        let u = PiecewiseLinear::zero(Grid::new(4).unwrap());
        let m = compare(&u, |x| Ok((PI * x).sin()), 1000).unwrap();
        // samples j/999 straddle 1/2; the nearest sits 1/1998 from the peak
        let nearest = (PI / 1998.0).cos();
        assert!((m.sup_error - nearest).abs() < 1e-15, "{}", m.sup_error);
        assert!((m.sup_error - 1.0).abs() < 1.3e-6);
        assert!(m.rms_error <= m.sup_error);
        assert!((m.rms_error - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn compare_is_symmetric() {
        let a = |x: f64| Ok((3.0 * x).sin());
        let b = |x: f64| Ok(x * x - 0.2);
        let ab = compare_fns(a, b, 257).unwrap();
        let ba = compare_fns(b, a, 257).unwrap();
        assert_eq!(ab.sup_error, ba.sup_error);
        assert_eq!(ab.rms_error, ba.rms_error);
    }

    #[test]
    fn fit_examples() {
        let f = fit_loglog(&[1.0, 2.0, 4.0], &[1.0, 4.0, 16.0]).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-14);
        assert!((f.prefactor - 1.0).abs() < 1e-14);
        let g = fit_loglog(&[1.0, 2.0], &[3.0, 3.0]).unwrap();
        assert!(g.exponent.abs() < 1e-15);
        assert!((g.prefactor - 3.0).abs() < 1e-14);
        assert!(fit_loglog(&[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, -1.0]).is_err());
        assert!(fit_loglog(&[1.0], &[1.0]).is_err());
        assert!(fit_loglog(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn trivial_solution_is_flagged_not_ordered() {
        let m = models::fish(0.3, 0.3).unwrap();
        let t = estimate_order(&m.problem, None, 8, 4, OrderOptions::default()).unwrap();
        assert_eq!(t.mode, OrderMode::Extrapolation);
        assert!(t.orders().is_empty());
        assert!(t.rows[..3].iter().all(|r| r.exact_to_tolerance));
        assert!(t.failure.is_none());
    }

    #[test]
    fn ladder_argument_checks() {
        let p = models::fish(0.1, 0.2).unwrap().problem;
        assert!(estimate_order(&p, None, 12, 3, OrderOptions::default()).is_err());
        assert!(estimate_order(&p, None, 16, 2, OrderOptions::default()).is_err());
    }

    #[test]
    fn smooth_error_quarters_on_refinement() {
        let m = models::manufactured_smooth(0.3).unwrap();
        let ex = m.exact.as_ref().unwrap();
        let e64 = compare(&collocate(&m.problem, 64).unwrap().solution, |x| Ok(ex.eval(x)), 2049)
            .unwrap()
            .sup_error;
        let e128 = compare(&collocate(&m.problem, 128).unwrap().solution, |x| Ok(ex.eval(x)), 2049)
            .unwrap()
            .sup_error;
        let ratio = e64 / e128;
        assert!((3.2..4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn smooth_true_and_extrapolated_orders_agree() {
        let m = models::manufactured_smooth(0.3).unwrap();
        let t = estimate_order(&m.problem, m.exact.as_ref(), 64, 4, OrderOptions::default()).unwrap();
        assert_eq!(t.mode, OrderMode::ExactReference);
        let (o, to) = (t.orders(), t.true_orders());
        assert_eq!(o.len(), 2);
        assert_eq!(to.len(), 3);
        for (a, b) in o.iter().zip(&to) {
            assert!((a - b).abs() <= 0.3, "{a} vs {b}");
            assert!((a - 2.0).abs() < 0.3);
        }
    }

    #[test]
    fn bench_single_size_has_no_fit() {
        let m = models::manufactured_smooth(0.3).unwrap();
        let t = benchmark(&m.problem, m.exact.as_ref(), &[64], 3, 257).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.fit.is_none());
        assert!(t.rows[0].error_proxy.unwrap() < 1e-3);
        assert!(benchmark(&m.problem, None, &[64, 32], 1, 257).is_err());
        assert!(benchmark(&m.problem, None, &[64], 0, 257).is_err());
    }

    #[test]
    fn bench_without_exact_uses_finest_solution() {
        let m = models::fish(0.1, 0.4).unwrap();
        let t = benchmark(&m.problem, None, &[16, 32, 64], 1, 257).unwrap();
        assert!(t.rows[0].error_proxy.unwrap() > t.rows[1].error_proxy.unwrap());
        assert!(t.rows[2].error_proxy.is_none());
        assert!(t.fit.is_some());
    }
}
