//! Machine-readable run output: CSV tables and a self-describing JSON document.

use std::io::Write;

use serde::Serialize;

use crate::analysis::{BenchTable, ConvergenceTable, CostToAccuracy, ErrorMetrics, PicardCostRow};
use crate::collocation::SolveReport;
use crate::error::{Error, Result};
use crate::expr::Params;
use crate::models::ExactSolution;
use crate::problem::{Lift, Problem, ValidationReport};

/// Bumped whenever a CSV column layout changes.
pub const CSV_LAYOUT_VERSION: u32 = 1;

/// 17 significant digits: enough for every f64 to parse back to itself.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
    pub csv_layout: u32,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            csv_layout: CSV_LAYOUT_VERSION,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemDescription {
    pub name: String,
    /// `model:<name>` or `file:<path>`.
    pub source: String,
    pub params: Params,
    pub phi: String,
    pub phi1: String,
    pub phi2: String,
    pub f: String,
    pub u0: f64,
    pub u1: f64,
    pub lift: Option<Lift>,
    pub exact: Option<String>,
}

impl ProblemDescription {
    pub fn new(source: String, p: &Problem, params: &Params, exact: Option<&ExactSolution>) -> Self {
        ProblemDescription {
            name: p.name.clone(),
            source,
            params: params.clone(),
            phi: p.phi.label().to_string(),
            phi1: p.phi1.label().to_string(),
            phi2: p.phi2.label().to_string(),
            f: p.f.label().to_string(),
            u0: p.u0,
            u1: p.u1,
            lift: p.lift,
            exact: exact.map(|e| e.label.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionRow {
    pub x: f64,
    pub u_h: f64,
    pub v_h: Option<f64>,
    pub exact: Option<f64>,
    pub abs_error: Option<f64>,
}

/// Per-node table. `v_h = u_h + lift` appears when a lift is known. The exact solution
/// refers to the problem as posed: `u_h` for homogeneous problems, `v_h` otherwise.
pub fn solution_rows(
    p: &Problem,
    report: &SolveReport,
    exact: Option<&ExactSolution>,
) -> Result<Vec<SolutionRow>> {
    let grid = report.solution.grid();
    grid.nodes()
        .map(|x| {
            let u_h = report.solution.eval(x)?;
            let v_h = report.lift.map(|l| u_h + l.value(x));
            let own = if p.is_homogeneous() { u_h } else { v_h.unwrap_or(u_h) };
            let exact_v = exact.map(|e| e.eval(x));
            Ok(SolutionRow {
                x,
                u_h,
                v_h,
                exact: exact_v,
                abs_error: exact_v.map(|e| (e - own).abs()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub assembly_s: f64,
    pub solve_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub n: usize,
    pub residual_max: f64,
    pub continuity_max: f64,
    pub boundary_max: f64,
    pub min_pivot: f64,
    pub condition_warning: bool,
    /// `(a_i, b_i)` per interval, enough to re-evaluate `u_h` anywhere.
    pub pieces: Vec<(f64, f64)>,
}

impl From<&SolveReport> for SolveSummary {
    fn from(r: &SolveReport) -> Self {
        SolveSummary {
            n: r.solution.grid().n(),
            residual_max: r.residual_max,
            continuity_max: r.continuity_max,
            boundary_max: r.boundary_max,
            min_pivot: r.min_pivot,
            condition_warning: r.condition_warning,
            pieces: r.solution.pieces().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Cell {
    pub alpha: f64,
    pub beta: f64,
    pub order: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1 {
    pub base_n: usize,
    pub levels: usize,
    pub eval_points: usize,
    pub cells: Vec<Table1Cell>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOutput {
    pub tool: ToolInfo,
    pub command: String,
    /// Every resolved option of the run, so the output can be regenerated from itself.
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemDescription>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<SolutionRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_metrics: Option<ErrorMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table1: Option<Table1>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_cost: Option<Vec<PicardCostRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_to_accuracy: Option<CostToAccuracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub fn write_json<W: Write>(mut out: W, run: &RunOutput) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, run)
        .map_err(|e| Error::InvalidInput(format!("writing JSON: {e}")))?;
    writeln!(out).map_err(|e| Error::InvalidInput(format!("writing JSON: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("writing CSV: {e}"))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e.into()))
}

/// Columns `x, u_h, v_h, exact, abs_error`, omitting those absent from every row.
pub fn write_solution_csv<W: Write>(out: W, rows: &[SolutionRow]) -> Result<()> {
    let has_v = rows.iter().any(|r| r.v_h.is_some());
    let has_exact = rows.iter().any(|r| r.exact.is_some());
    let mut header = vec!["x", "u_h"];
    if has_v {
        header.push("v_h");
    }
    if has_exact {
        header.extend(["exact", "abs_error"]);
    }
    table(
        out,
        &header,
        rows.iter().map(|r| {
            let mut rec = vec![fmt_float(r.x), fmt_float(r.u_h)];
            if has_v {
                rec.push(opt(r.v_h));
            }
            if has_exact {
                rec.push(opt(r.exact));
                rec.push(opt(r.abs_error));
            }
            rec
        }),
    )
}

pub fn write_convergence_csv<W: Write>(out: W, t: &ConvergenceTable) -> Result<()> {
    table(
        out,
        &["n", "h", "difference", "order", "true_error", "true_order", "exact_to_tolerance"],
        t.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_float(r.h),
                opt(r.difference),
                opt(r.order),
                opt(r.true_error),
                opt(r.true_order),
                r.exact_to_tolerance.to_string(),
            ]
        }),
    )
}

/// Grid layout: one row per alpha, one column per beta, `—` where no order exists.
pub fn write_table1_csv<W: Write>(out: W, t: &Table1, alphas: &[f64], betas: &[f64]) -> Result<()> {
    let mut header = vec!["alpha/beta".to_string()];
    header.extend(betas.iter().map(|b| format!("{b:.1}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = alphas.iter().map(|&a| {
        let mut rec = vec![format!("{a:.1}")];
        for &b in betas {
            let cell = t
                .cells
                .iter()
                .find(|c| (c.alpha - a).abs() < 1e-12 && (c.beta - b).abs() < 1e-12);
            rec.push(match cell.and_then(|c| c.order) {
                Some(o) => format!("{o:.2}"),
                None => "—".to_string(),
            });
        }
        rec
    });
    table(out, &header_refs, rows)
}

pub fn write_bench_csv<W: Write>(out: W, t: &BenchTable) -> Result<()> {
    table(
        out,
        &["n", "assembly_s", "solve_s", "total_s", "error_proxy"],
        t.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_float(r.assembly_time),
                fmt_float(r.solve_time),
                fmt_float(r.total_time),
                opt(r.error_proxy),
            ]
        }),
    )
}

pub fn write_picard_csv<W: Write>(out: W, rows: &[PicardCostRow]) -> Result<()> {
    table(
        out,
        &["depth", "time_s", "rms_error"],
        rows.iter()
            .map(|r| vec![r.depth.to_string(), fmt_float(r.time), fmt_float(r.rms_error)]),
    )
}

pub fn write_validation_csv<W: Write>(out: W, r: &ValidationReport) -> Result<()> {
    table(
        out,
        &["condition", "x", "observed"],
        r.assumption_violations
            .iter()
            .map(|v| vec![v.condition.to_string(), fmt_float(v.x), fmt_float(v.observed)]),
    )
}
