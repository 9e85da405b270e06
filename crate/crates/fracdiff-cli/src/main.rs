//! fracdiff: evaluate Riemann-Liouville fractional integrals from the
//! command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//! All numeric output is printed with 17 significant digits, so files are
//! byte-for-byte reproducible across runs on the same platform.

// guards of the form !(x > 0.0) deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fracdiff::expsum::{build_expsum, eval_expsum, kernel_exact, select_truncation, truncation_bounds};
use fracdiff::fast::evaluate_fast;
use fracdiff::laguerre::{build_rule, run_gl, SteppingMethod};
use fracdiff::oracle::{analytic_monomial, direct_integral};
use fracdiff::problem::{FractionalOrder, FractionalProblem, SourceFunction, TimeGrid};
use fracdiff::split::{split_evaluate, HistoryWindow};
use fracdiff::trace::EvaluationTrace;

#[derive(Parser)]
#[command(
    name = "fracdiff",
    about = "Fast evaluation of Riemann-Liouville fractional integrals of order 0 < alpha < 1",
    version,
    after_help = "Exit codes: 0 success, 2 configuration error, 3 numerical failure.\n\
                  FRACDIFF_THREADS overrides --threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate I^alpha_a f over a time grid and write a trace
    Integrate(IntegrateArgs),
    /// Compare the exponential-sum kernel against the exact kernel
    Kernel(KernelArgs),
    /// Time evaluators over a sweep of grid sizes
    Bench(BenchArgs),
    /// Print a Gauss-Laguerre rule
    Nodes(NodesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Gauss-Laguerre quadrature with backward Euler stepping
    GlEuler,
    /// Gauss-Laguerre quadrature with trapezoidal stepping
    GlTrap,
    /// Exponential-sum kernel compression with the fast recursion
    Expsum,
    /// Direct O(P^2) product integration (ground truth)
    Oracle,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::GlEuler => "gl-euler",
            Method::GlTrap => "gl-trap",
            Method::Expsum => "expsum",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct CommonOut {
    /// Output path; `-` writes to stdout
    #[arg(long, default_value = "-")]
    output: String,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for node-parallel sections (1 keeps runs serial)
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Fractional order, strictly inside (0, 1)
    #[arg(long)]
    alpha: f64,
    /// Left endpoint of the integration interval
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    /// Right endpoint of the integration interval
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Number of uniform grid intervals
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    /// Read grid points from a CSV file with header `t` instead of a uniform grid
    #[arg(long)]
    grid_file: Option<String>,
    /// Forcing function: const:C | monomial:P | sin | exp | csv:PATH
    #[arg(long)]
    function: String,
    /// Evaluation method
    #[arg(long, value_enum, default_value_t = Method::GlTrap)]
    method: Method,
    /// Gauss-Laguerre rule order
    #[arg(long, default_value_t = 40)]
    lambda: usize,
    /// Trapezoidal step of the kernel discretization (expsum method)
    #[arg(long, default_value_t = 0.25)]
    rho_step: f64,
    /// Tail tolerance for the kernel truncation (expsum method)
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Kernel validity lower end; defaults to the smallest grid step
    #[arg(long)]
    delta: Option<f64>,
    /// Evaluate via local/history splitting with this window width
    #[arg(long)]
    split_window: Option<f64>,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Trapezoidal step of the kernel discretization
    #[arg(long, default_value_t = 0.25)]
    rho_step: f64,
    /// Tail tolerance for the truncation selection
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Lower end of the reported lag range
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Number of log-spaced report points
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Comma-separated methods to time
    #[arg(long, default_value = "gl-trap,expsum")]
    methods: String,
    /// Comma-separated grid sizes
    #[arg(long, default_value = "10000,20000,40000")]
    p_sweep: String,
    #[arg(long, default_value_t = 40)]
    lambda: usize,
    #[arg(long, default_value_t = 0.25)]
    rho_step: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Forcing function: const:C | monomial:P | sin | exp | csv:PATH
    #[arg(long, default_value = "const:1")]
    function: String,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct NodesArgs {
    /// Rule order, 1..=200
    #[arg(long)]
    lambda: usize,
    #[command(flatten)]
    out: CommonOut,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Config(msg.into()))
}

// during the validation phase every library error is a configuration error
fn validated<T>(r: fracdiff::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.to_string()))
}

// during the computation phase it is a numerical failure
fn computed<T>(r: fracdiff::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Numerical(e.to_string()))
}

/// 17 significant digits: enough to reproduce any f64 exactly.
fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Rows of (column name, formatted values) rendered as CSV or JSON records.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let mut out = String::from("[");
                for (i, row) in self.rows.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str("\n  {");
                    for (j, (name, value)) in self.columns.iter().zip(row).enumerate() {
                        if j > 0 {
                            out.push_str(", ");
                        }
                        let quoted = value.parse::<f64>().is_err();
                        if quoted {
                            let _ = write!(out, "\"{name}\": \"{value}\"");
                        } else {
                            let _ = write!(out, "\"{name}\": {value}");
                        }
                    }
                    out.push('}');
                }
                out.push_str("\n]\n");
                out
            }
        }
    }
}

fn parse_function(spec: &str) -> Result<SourceFunction, Failure> {
    if spec == "sin" {
        return Ok(SourceFunction::Sine);
    }
    if spec == "exp" {
        return Ok(SourceFunction::Exponential);
    }
    if let Some(value) = spec.strip_prefix("const:") {
        let c: f64 = value
            .parse()
            .map_err(|_| Failure::Config(format!("function: bad constant `{value}`")))?;
        if !c.is_finite() {
            return config_err(format!("function: constant must be finite, got {c}"));
        }
        return Ok(SourceFunction::Constant(c));
    }
    if let Some(value) = spec.strip_prefix("monomial:") {
        let p: f64 = value
            .parse()
            .map_err(|_| Failure::Config(format!("function: bad exponent `{value}`")))?;
        return validated(SourceFunction::monomial(p));
    }
    if let Some(path) = spec.strip_prefix("csv:") {
        return validated(SourceFunction::from_csv_path(path));
    }
    config_err(format!(
        "function: expected const:C | monomial:P | sin | exp | csv:PATH, got `{spec}`"
    ))
}

/// Closed-form solution for forcing functions that have one.
fn analytic_truth(
    f: &SourceFunction,
    order: FractionalOrder,
    a: f64,
) -> Option<Box<dyn Fn(f64) -> f64>> {
    match f {
        SourceFunction::Constant(c) => {
            let c = *c;
            Some(Box::new(move |t: f64| {
                c * analytic_monomial(order, 0.0, t - a).unwrap()
            }))
        }
        SourceFunction::Monomial { exponent } if a == 0.0 => {
            let p = *exponent;
            Some(Box::new(move |t: f64| {
                analytic_monomial(order, p, t).unwrap()
            }))
        }
        _ => None,
    }
}

fn load_grid_file(path: &str) -> Result<TimeGrid, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("grid file {path}: {e}")))?;
    let mut lines = text.lines();
    match lines.next().map(|h| h.trim_start_matches('\u{feff}').trim()) {
        Some("t") => {}
        other => {
            return config_err(format!(
                "grid file {path}: expected header `t`, got `{}`",
                other.unwrap_or("")
            ))
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let t: f64 = line
            .parse()
            .map_err(|_| Failure::Config(format!("grid file row {}: bad time `{line}`", i + 2)))?;
        points.push(t);
    }
    validated(TimeGrid::new(points))
}

fn resolve_threads(flag: usize) -> Result<usize, Failure> {
    match std::env::var("FRACDIFF_THREADS") {
        Ok(value) => value.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            Failure::Config(format!(
                "FRACDIFF_THREADS must be a positive integer, got `{value}`"
            ))
        }),
        Err(_) => {
            if flag == 0 {
                config_err("--threads must be positive")
            } else {
                Ok(flag)
            }
        }
    }
}

fn write_output(path: &str, content: &str) -> Result<(), Failure> {
    if path == "-" {
        print!("{content}");
        Ok(())
    } else {
        std::fs::write(path, content)
            .map_err(|e| Failure::Numerical(format!("writing {path}: {e}")))
    }
}

fn cmd_integrate(args: &IntegrateArgs) -> Result<String, Failure> {
    let order = validated(FractionalOrder::new(args.alpha))?;
    let f = parse_function(&args.function)?;
    let problem = validated(FractionalProblem::new(order, args.a, args.b, f))?;

    let window = match args.split_window {
        Some(w) => {
            if args.method != Method::GlEuler && args.method != Method::GlTrap {
                return config_err(
                    "split-window: the split evaluator needs a gl-euler or gl-trap method",
                );
            }
            Some(validated(HistoryWindow::for_problem(w, &problem))?)
        }
        None => None,
    };

    let grid = match &args.grid_file {
        Some(path) => {
            let grid = load_grid_file(path)?;
            let expect_start = args.a + window.map_or(0.0, |w| w.width());
            if grid.first() < expect_start || grid.last() > args.b {
                return config_err(format!(
                    "grid file range [{}, {}] outside the admissible [{expect_start}, {}]",
                    grid.first(),
                    grid.last(),
                    args.b
                ));
            }
            grid
        }
        None => {
            let start = args.a + window.map_or(0.0, |w| w.width());
            if start >= args.b {
                return config_err("split-window leaves an empty evaluation range");
            }
            validated(TimeGrid::uniform(start, args.b, args.steps))?
        }
    };

    let method = match args.method {
        Method::GlEuler => Some(SteppingMethod::BackwardEuler),
        Method::GlTrap => Some(SteppingMethod::Trapezoidal),
        _ => None,
    };

    // expsum configuration is validated before any computation starts
    let expsum_setup = if args.method == Method::Expsum {
        let delta = args.delta.unwrap_or_else(|| grid.min_step());
        if !(delta > 0.0) {
            return config_err(format!("delta must be positive, got {delta}"));
        }
        if grid.min_step() < delta {
            return config_err(format!(
                "smallest grid step {} undercuts delta = {delta}",
                grid.min_step()
            ));
        }
        if !(args.rho_step > 0.0) {
            return config_err(format!("rho_step must be positive, got {}", args.rho_step));
        }
        if !(args.tol > 0.0) {
            return config_err(format!("tol must be positive, got {}", args.tol));
        }
        Some((delta, args.rho_step, args.tol))
    } else {
        None
    };
    if args.method != Method::Oracle && args.method != Method::Expsum && args.lambda == 0 {
        return config_err("lambda must be positive");
    }

    let threads = resolve_threads(args.out.threads)?;
    let trace: EvaluationTrace = fracdiff::with_threads(threads, || -> Result<_, Failure> {
        match (args.method, window) {
            (Method::Oracle, _) => computed(direct_integral(&problem, &grid)),
            (Method::Expsum, _) => {
                let (delta, rho_step, tol) = expsum_setup.unwrap();
                let (m, n) =
                    computed(select_truncation(order, rho_step, delta, args.b - args.a, tol))?;
                let expsum = computed(build_expsum(order, rho_step, m, n))?;
                computed(evaluate_fast(&problem, &grid, &expsum, delta))
            }
            (_, Some(w)) => computed(split_evaluate(
                &problem,
                &grid,
                w,
                args.lambda,
                method.unwrap(),
            )),
            (_, None) => computed(run_gl(&problem, &grid, args.lambda, method.unwrap())),
        }
    })?;

    let truth = analytic_truth(problem.source(), order, args.a);
    let mut table = if truth.is_some() {
        Table::new(vec!["t", "value", "truth", "rel_err"])
    } else {
        Table::new(vec!["t", "value"])
    };
    for (t, v) in trace.grid().points().iter().zip(trace.values()) {
        match &truth {
            Some(exact_fn) => {
                let exact = exact_fn(*t);
                let rel = if exact != 0.0 {
                    ((v - exact) / exact).abs()
                } else {
                    v.abs()
                };
                table.push(vec![fmt(*t), fmt(*v), fmt(exact), fmt(rel)]);
            }
            None => table.push(vec![fmt(*t), fmt(*v)]),
        }
    }
    Ok(table.render(args.out.format))
}

fn cmd_kernel(args: &KernelArgs) -> Result<String, Failure> {
    resolve_threads(args.out.threads)?;
    let order = validated(FractionalOrder::new(args.alpha))?;
    if !(args.a < args.b) {
        return config_err(format!("need a < b, got [{}, {}]", args.a, args.b));
    }
    let span = args.b - args.a;
    if !(args.delta > 0.0 && args.delta < span) {
        return config_err(format!(
            "delta must lie in (0, b - a) = (0, {span}), got {}",
            args.delta
        ));
    }
    if args.points < 2 {
        return config_err("need at least two report points");
    }
    if !(args.rho_step > 0.0) {
        return config_err(format!("rho_step must be positive, got {}", args.rho_step));
    }
    if !(args.tol > 0.0) {
        return config_err(format!("tol must be positive, got {}", args.tol));
    }

    let (m, n) = computed(select_truncation(
        order,
        args.rho_step,
        args.delta,
        span,
        args.tol,
    ))?;
    let approx = computed(build_expsum(order, args.rho_step, m, n))?;

    let mut table = Table::new(vec![
        "t",
        "exact",
        "expsum",
        "rel_err",
        "upper_bound",
        "lower_bound",
        "condition",
    ]);
    let ratio = span / args.delta;
    for i in 0..args.points {
        let t = args.delta * ratio.powf(i as f64 / (args.points - 1) as f64);
        let exact = computed(kernel_exact(order, t))?;
        let approx_value = computed(eval_expsum(&approx, t))?;
        let bounds = computed(truncation_bounds(&approx, t))?;
        table.push(vec![
            fmt(t),
            fmt(exact),
            fmt(approx_value),
            fmt(((approx_value - exact) / exact).abs()),
            fmt(bounds.upper_tail),
            fmt(bounds.lower_tail),
            bounds.condition_satisfied.to_string(),
        ]);
    }
    Ok(table.render(args.out.format))
}

fn cmd_bench(args: &BenchArgs) -> Result<String, Failure> {
    let order = validated(FractionalOrder::new(args.alpha))?;
    let f = parse_function(&args.function)?;
    let problem = validated(FractionalProblem::new(order, args.a, args.b, f))?;
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|name| match name.trim() {
            "gl-euler" => Ok(Method::GlEuler),
            "gl-trap" => Ok(Method::GlTrap),
            "expsum" => Ok(Method::Expsum),
            "oracle" => Ok(Method::Oracle),
            other => Err(Failure::Config(format!("methods: unknown method `{other}`"))),
        })
        .collect::<Result<_, _>>()?;
    let sweep: Vec<usize> = args
        .p_sweep
        .split(',')
        .map(|value| {
            value
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&p| p > 0)
                .ok_or_else(|| Failure::Config(format!("p-sweep: bad grid size `{value}`")))
        })
        .collect::<Result<_, _>>()?;
    if methods.is_empty() || sweep.is_empty() {
        return config_err("need at least one method and one grid size");
    }
    if args.lambda == 0 {
        return config_err("lambda must be positive");
    }

    let threads = resolve_threads(args.out.threads)?;
    // one kernel approximation for the whole sweep: its validity lower end is
    // the finest grid's step, admissible for every coarser grid as well
    let expsum_setup = if methods.contains(&Method::Expsum) {
        let finest = (args.b - args.a) / *sweep.iter().max().unwrap() as f64;
        let (m, n) = computed(select_truncation(
            order,
            args.rho_step,
            finest,
            args.b - args.a,
            args.tol,
        ))?;
        Some((computed(build_expsum(order, args.rho_step, m, n))?, finest))
    } else {
        None
    };
    let mut table = Table::new(vec!["method", "P", "lambda", "wall_seconds", "peak_state_count"]);
    fracdiff::with_threads(threads, || -> Result<(), Failure> {
        for &method in &methods {
            for &steps in &sweep {
                let grid = validated(TimeGrid::uniform(args.a, args.b, steps))?;
                let run = || match method {
                    Method::GlEuler => computed(run_gl(
                        &problem,
                        &grid,
                        args.lambda,
                        SteppingMethod::BackwardEuler,
                    )),
                    Method::GlTrap => computed(run_gl(
                        &problem,
                        &grid,
                        args.lambda,
                        SteppingMethod::Trapezoidal,
                    )),
                    Method::Expsum => {
                        let (expsum, delta) = expsum_setup.as_ref().unwrap();
                        computed(evaluate_fast(&problem, &grid, expsum, *delta))
                    }
                    Method::Oracle => computed(direct_integral(&problem, &grid)),
                };
                // one discarded warmup run keeps pool spin-up and first-touch
                // page faults out of the reported wall time
                run()?;
                let trace = run()?;
                table.push(vec![
                    method.name().to_string(),
                    steps.to_string(),
                    trace.term_count().to_string(),
                    fmt(trace.wall_seconds()),
                    trace.state_count().to_string(),
                ]);
            }
        }
        Ok(())
    })?;
    Ok(table.render(args.out.format))
}

fn cmd_nodes(args: &NodesArgs) -> Result<String, Failure> {
    resolve_threads(args.out.threads)?;
    let rule = validated(build_rule(args.lambda))?;
    let mut table = Table::new(vec!["l", "x", "w", "w_scaled"]);
    for (i, ((x, w), s)) in rule
        .nodes()
        .iter()
        .zip(rule.weights())
        .zip(rule.scaled_weights())
        .enumerate()
    {
        table.push(vec![(i + 1).to_string(), fmt(*x), fmt(*w), fmt(*s)]);
    }
    Ok(table.render(args.out.format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Integrate(args) => (cmd_integrate(args), &args.out),
        Command::Kernel(args) => (cmd_kernel(args), &args.out),
        Command::Bench(args) => (cmd_bench(args), &args.out),
        Command::Nodes(args) => (cmd_nodes(args), &args.out),
    };
    let content = match result {
        Ok(content) => content,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            return ExitCode::from(failure.exit_code());
        }
    };
    if let Err(failure) = write_output(&out.output, &content) {
        eprintln!("error: {}", failure.message());
        return ExitCode::from(failure.exit_code());
    }
    ExitCode::SUCCESS
}
