//! `funceq` command-line front end.
//!
//! Exit codes: 0 success, 1 assumption violations under `--strict`, 2 singular
//! collocation system, 3 input, parse or I/O errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use funceq::analysis::{
    benchmark, compare_fns, cost_to_accuracy, estimate_order, picard_cost, OrderOptions,
    DEFAULT_EVAL_POINTS,
};
use funceq::expr::Params;
use funceq::models::{self, ExactSolution};
use funceq::output::{self, ProblemDescription, RunOutput, SolveSummary, Table1, Table1Cell, Timings};
use funceq::picard::convergence_warning;
use funceq::problem::DEFAULT_SEMINORM_SAMPLES;
use funceq::problem_file;
use funceq::sampling::check_contraction;
use funceq::{collocate, validate, Error, Problem};

const EXIT_STRICT: u8 = 1;
const EXIT_SINGULAR: u8 = 2;
const EXIT_INPUT: u8 = 3;

/// Alpha/beta values spanned by the fish order table.
const TABLE1_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Parser)]
#[command(name = "funceq", version, about = "Collocation solver for nonlocal functional equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem by collocation and write the nodal solution.
    Solve(SolveArgs),
    /// Estimate the convergence order from a refinement ladder.
    Order(OrderArgs),
    /// Time collocation over a list of grid sizes.
    Bench(BenchArgs),
    /// Check the admissibility assumptions and the contraction condition.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Built-in model: fish, fish-raw, smooth, nonsmooth.
    #[arg(long, conflicts_with = "file")]
    model: Option<String>,
    /// TOML problem file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Parameter binding NAME=VALUE; overrides model defaults and file values.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail with exit code 1 when an assumption is violated.
    #[arg(long)]
    strict: bool,
    /// Sample points for the assumption checks.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_EVAL_POINTS)]
    eval_points: usize,
}

#[derive(Args)]
struct OrderArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 256)]
    base_n: usize,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = DEFAULT_EVAL_POINTS)]
    eval_points: usize,
    /// Sweep every alpha < beta cell of the fish model on {0.1, ..., 0.9}.
    #[arg(long)]
    table1: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated ascending grid sizes.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Add exact-recursive Picard time/error rows for K = 1..k-max.
    #[arg(long)]
    include_picard: bool,
    #[arg(long, default_value_t = 20)]
    k_max: u32,
    #[arg(long, default_value_t = 257)]
    eval_points: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Seed for the randomized operator-bound check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random functions tried by the operator-bound check; 0 skips it.
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value for `{name}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

enum Failure {
    Strict(String),
    Run(Error),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Strict(_) => EXIT_STRICT,
            Failure::Run(Error::SingularSystem { .. }) => EXIT_SINGULAR,
            Failure::Run(_) | Failure::Input(_) => EXIT_INPUT,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Strict(m) | Failure::Input(m) => f.write_str(m),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Resolved {
    problem: Problem,
    exact: Option<ExactSolution>,
    params: Params,
    source: String,
}

fn resolve(c: &Common) -> CliResult<Resolved> {
    let overrides: Params = c.params.iter().cloned().collect();
    if let Some(path) = &c.file {
        let loaded = problem_file::load(path, &overrides).map_err(|e| Failure::Input(e.to_string()))?;
        return Ok(Resolved {
            problem: loaded.problem,
            exact: loaded.exact,
            params: loaded.params,
            source: format!("file:{}", path.display()),
        });
    }
    let name = c.model.as_deref().unwrap_or("fish");
    let m = models::by_name(name, &overrides)?;
    Ok(Resolved {
        problem: m.problem,
        exact: m.exact,
        params: m.params,
        source: format!("model:{name}"),
    })
}

fn open_out(c: &Common) -> CliResult<Box<dyn Write>> {
    Ok(match &c.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn base_output(command: &str, c: &Common, r: &Resolved, config: serde_json::Value) -> RunOutput {
    let mut config = config;
    config["format"] = json!(match c.format {
        Format::Csv => "csv",
        Format::Json => "json",
    });
    config["strict"] = json!(c.strict);
    config["samples"] = json!(c.samples);
    RunOutput {
        command: command.into(),
        config,
        problem: Some(ProblemDescription::new(
            r.source.clone(),
            &r.problem,
            &r.params,
            r.exact.as_ref(),
        )),
        ..RunOutput::default()
    }
}

/// Validates and reports; in strict mode violations abort the run.
fn check_assumptions(c: &Common, r: &Resolved, run: &mut RunOutput) -> CliResult<()> {
    let report = validate(&r.problem, c.samples)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for v in &report.assumption_violations {
        eprintln!("warning: assumption {} violated at x = {} (observed {})", v.condition, v.x, v.observed);
    }
    let violated = !report.is_admissible();
    run.validation = Some(report);
    if c.strict && violated {
        return Err(Failure::Strict("assumption violations (strict mode)".into()));
    }
    Ok(())
}

fn finish<F>(c: &Common, run: &RunOutput, csv: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> funceq::Result<()>,
{
    let mut out = open_out(c)?;
    match c.format {
        Format::Json => output::write_json(&mut out, run)?,
        Format::Csv => csv(&mut out)?,
    }
    out.flush().map_err(|e| Failure::Input(format!("writing output: {e}")))
}

fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    if a.n < 2 {
        return Err(Failure::Input(format!("--n must be at least 2, got {}", a.n)));
    }
    let r = resolve(&a.common)?;
    let mut run = base_output("solve", &a.common, &r, json!({ "n": a.n, "eval_points": a.eval_points }));
    check_assumptions(&a.common, &r, &mut run)?;
    let report = collocate(&r.problem, a.n)?;
    if report.condition_warning {
        eprintln!("warning: ill-conditioned system (min pivot {:e})", report.min_pivot);
    }
    let rows = output::solution_rows(&r.problem, &report, r.exact.as_ref())?;
    if let Some(ex) = &r.exact {
        let homogeneous = r.problem.is_homogeneous();
        run.error_metrics = Some(compare_fns(
            |x| if homogeneous { report.solution.eval(x) } else { report.physical(x) },
            |x| Ok(ex.eval(x)),
            a.eval_points,
        )?);
    }
    run.timings = Some(Timings {
        assembly_s: report.assembly_time.as_secs_f64(),
        solve_s: report.solve_time.as_secs_f64(),
    });
    run.solve = Some(SolveSummary::from(&report));
    run.solution = Some(rows.clone());
    finish(&a.common, &run, |w| output::write_solution_csv(w, &rows))
}

fn cmd_order(a: &OrderArgs) -> CliResult<()> {
    let options = OrderOptions {
        eval_points: a.eval_points,
    };
    let config = json!({
        "base_n": a.base_n,
        "levels": a.levels,
        "eval_points": a.eval_points,
        "table1": a.table1,
    });
    if a.table1 {
        return table1(a, options, config);
    }
    let r = resolve(&a.common)?;
    let mut run = base_output("order", &a.common, &r, config);
    check_assumptions(&a.common, &r, &mut run)?;
    let table = estimate_order(&r.problem, r.exact.as_ref(), a.base_n, a.levels, options)?;
    if let Some(f) = &table.failure {
        eprintln!("warning: refinement ladder stopped early: {f}");
    }
    run.convergence = Some(table.clone());
    finish(&a.common, &run, |w| output::write_convergence_csv(w, &table))
}

fn table1(a: &OrderArgs, options: OrderOptions, config: serde_json::Value) -> CliResult<()> {
    if a.common.model.is_some() || a.common.file.is_some() || !a.common.params.is_empty() {
        return Err(Failure::Input("--table1 sweeps the fish model and takes no problem selection".into()));
    }
    let pairs: Vec<(f64, f64)> = TABLE1_GRID
        .iter()
        .flat_map(|&al| TABLE1_GRID.iter().filter(move |&&b| al < b).map(move |&b| (al, b)))
        .collect();
    let cells: Vec<Table1Cell> = pairs
        .par_iter()
        .map(|&(alpha, beta)| {
            let result = models::fish(alpha, beta)
                .and_then(|m| estimate_order(&m.problem, None, a.base_n, a.levels, options));
            let (order, error) = match result {
                Ok(t) => match t.leading_order() {
                    Some(o) => (Some(o), None),
                    None => (None, Some(t.failure.unwrap_or_else(|| "no order (differences below guard)".into()))),
                },
                Err(e) => (None, Some(e.to_string())),
            };
            Table1Cell { alpha, beta, order, error }
        })
        .collect();
    for c in cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("warning: cell ({}, {}): {}", c.alpha, c.beta, c.error.as_deref().unwrap_or(""));
    }
    let table = Table1 {
        base_n: a.base_n,
        levels: a.levels,
        eval_points: a.eval_points,
        cells,
    };
    let mut run = RunOutput {
        command: "order".into(),
        config,
        ..RunOutput::default()
    };
    run.table1 = Some(table.clone());
    let alphas = &TABLE1_GRID[..8];
    let betas = &TABLE1_GRID[1..];
    finish(&a.common, &run, |w| output::write_table1_csv(w, &table, alphas, betas))
}

fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let r = resolve(&a.common)?;
    let mut run = base_output(
        "bench",
        &a.common,
        &r,
        json!({
            "n": a.n,
            "repetitions": a.repetitions,
            "include_picard": a.include_picard,
            "k_max": a.k_max,
            "eval_points": a.eval_points,
        }),
    );
    check_assumptions(&a.common, &r, &mut run)?;
    let table = benchmark(&r.problem, r.exact.as_ref(), &a.n, a.repetitions, a.eval_points)?;
    run.benchmark = Some(table.clone());
    let mut picard_rows = None;
    if a.include_picard {
        if let Some(w) = convergence_warning(&r.problem)? {
            eprintln!("warning: {w}");
        }
        let exact = r
            .exact
            .as_ref()
            .ok_or_else(|| Failure::Input("--include-picard needs a problem with a known exact solution".into()))?;
        let rows = picard_cost(&r.problem, exact, 1..=a.k_max, a.eval_points)?;
        picard_rows = Some(rows.clone());
        run.picard_cost = Some(rows);
        match cost_to_accuracy(&r.problem, exact, 1e-4, a.eval_points, a.k_max) {
            Ok(c) => run.cost_to_accuracy = Some(c),
            Err(e) => eprintln!("warning: cost-to-accuracy comparison skipped: {e}"),
        }
    }
    finish(&a.common, &run, |w| {
        output::write_bench_csv(&mut *w, &table)?;
        if let Some(rows) = &picard_rows {
            writeln!(w).map_err(|e| Error::InvalidInput(e.to_string()))?;
            output::write_picard_csv(&mut *w, rows)?;
        }
        Ok(())
    })
}

fn cmd_validate(a: &ValidateArgs) -> CliResult<()> {
    let r = resolve(&a.common)?;
    let mut run = base_output(
        "validate",
        &a.common,
        &r,
        json!({ "seed": a.seed, "trials": a.trials, "seminorm_samples": DEFAULT_SEMINORM_SAMPLES }),
    );
    let strict = check_assumptions(&a.common, &r, &mut run);
    if a.trials > 0 {
        let homogeneous = funceq::homogenize(&r.problem);
        let check = check_contraction(&homogeneous, a.trials, a.seed)?;
        if !check.holds(1e-8) {
            eprintln!(
                "warning: operator bound exceeded by {:e} (worst ratio {})",
                check.worst_excess, check.worst_ratio
            );
        }
        run.config["contraction_check"] = serde_json::to_value(&check).unwrap_or_default();
    }
    let report = run.validation.clone();
    finish(&a.common, &run, |w| match &report {
        Some(rep) => output::write_validation_csv(w, rep),
        None => Ok(()),
    })?;
    strict
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            return if informational { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INPUT) };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Order(a) => cmd_order(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
