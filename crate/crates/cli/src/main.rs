// `!(x > 0.0)` is deliberate throughout: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use rlr_core::selftest::{run_selftest, SelftestOptions};

mod config;
mod csv;
mod grid;
mod run;
mod svg;

use config::{FileConfig, RunConfig};
use grid::Grid;

/// Asymptotic theory and Monte Carlo checks for regularized logistic regression.
#[derive(Debug, Parser)]
#[command(name = "rlr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the asymptotic fixed point on a (delta, lambda) grid.
    Predict(ProblemArgs),
    /// Theory plus Monte Carlo trials on a (delta, lambda) grid.
    Sweep(SweepArgs),
    /// Run the numerical invariant suites.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// TOML file with [problem], [solver], [experiment], [sweep] sections.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in configuration, applied before --config (ridge, sparse-l1).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, value_name = "none|l1|l2sq")]
    reg: Option<String>,
    #[arg(long, allow_hyphen_values = true, value_name = "F")]
    kappa: Option<f64>,
    /// Single value, list `a,b,c`, or range `start:stop:count[:lin|log]`.
    #[arg(long, allow_hyphen_values = true, value_name = "GRID")]
    delta: Option<Grid>,
    /// Single value, list `a,b,c`, or range `start:stop:count[:lin|log]`.
    #[arg(long, allow_hyphen_values = true, value_name = "GRID")]
    lambda: Option<Grid>,
    /// Fraction of nonzero coefficients; omit for a Gaussian prior.
    #[arg(long, allow_hyphen_values = true, value_name = "F")]
    sparsity: Option<f64>,
    /// Fixed-point tolerance on the sup-norm residual.
    #[arg(long, allow_hyphen_values = true, value_name = "F")]
    tol: Option<f64>,
    /// Gauss-Hermite order.
    #[arg(long, value_name = "N")]
    quad_order: Option<usize>,
    /// Worker threads for grid cells and trials (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write one SVG chart per metric next to --out.
    #[arg(long, requires = "out")]
    svg: bool,
    /// Fill the runtime_ms column. Off by default so output is reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Number of coefficients.
    #[arg(long, value_name = "N")]
    p: Option<usize>,
    /// Trials per cell; 0 gives theory columns only.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Support threshold for the false-alarm and misdetection rates.
    #[arg(long, allow_hyphen_values = true, value_name = "F")]
    epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, hide = true)]
    quad_order: Option<usize>,
    #[arg(long, hide = true)]
    seed: Option<u64>,
}

/// Maps onto the exit status: 1 for bad input or a failed check, 2 when
/// some grid cell did not converge.
enum Failure {
    Usage(anyhow::Error),
    NotConverged,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn color_enabled(stream: &impl IsTerminal) -> bool {
    stream.is_terminal() && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty())
}

fn paint(text: &str, code: &str, color: bool) -> String {
    if color {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn file_config(args: &ProblemArgs) -> Result<FileConfig> {
    let mut cfg = match &args.preset {
        Some(name) => config::preset(name)?,
        None => FileConfig::default(),
    };
    if let Some(path) = &args.config {
        cfg.overlay(&config::load(path)?);
    }
    let mut flags = FileConfig::default();
    flags.problem.reg = args.reg.clone();
    flags.problem.kappa = args.kappa;
    flags.problem.sparsity = args.sparsity;
    flags.solver.tol = args.tol;
    flags.solver.quad_order = args.quad_order;
    flags.sweep.delta = args.delta.clone();
    flags.sweep.lambda = args.lambda.clone();
    flags.sweep.jobs = args.jobs;
    cfg.overlay(&flags);
    Ok(cfg)
}

fn svg_path(out: &Path, metric: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("rlr");
    out.with_file_name(format!("{stem}_{metric}.svg"))
}

fn execute(config: &RunConfig, args: &ProblemArgs) -> Result<(), Failure> {
    let cells = run::run_cells(config)?;

    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            csv::write(&mut BufWriter::new(file), &cells, args.timing).context("writing CSV")?;
        }
        None => csv::write(&mut io::stdout().lock(), &cells, args.timing).context("writing CSV")?,
    }
    if let (true, Some(out)) = (args.svg, &args.out) {
        for metric in svg::METRICS {
            if let Some(chart) = svg::render(metric, &cells) {
                let path = svg_path(out, metric.name);
                std::fs::write(&path, chart).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }

    let color = color_enabled(&io::stderr());
    let mut failed = false;
    for cell in &cells {
        let flags = cell.flags();
        if flags.is_empty() {
            continue;
        }
        failed = true;
        let mut detail = Vec::new();
        if let Err(e) = &cell.theory {
            detail.push(format!("theory: {e}"));
        }
        if let Some(Err(e)) = &cell.empirical {
            detail.push(format!("empirical: {e}"));
        }
        eprintln!(
            "{} delta={} lambda={}: {} {}",
            paint("warning:", "33", color),
            cell.spec.delta,
            cell.spec.lambda,
            flags.join(";"),
            detail.join("; ")
        );
    }
    if failed {
        Err(Failure::NotConverged)
    } else {
        Ok(())
    }
}

fn predict(args: &ProblemArgs) -> Result<(), Failure> {
    let mut file = file_config(args)?;
    file.experiment.trials = Some(0);
    let config = RunConfig::resolve(&file)?;
    execute(&config, args)
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let mut file = file_config(&args.problem)?;
    let mut flags = FileConfig::default();
    flags.experiment.p = args.p;
    flags.experiment.trials = args.trials;
    flags.experiment.seed = args.seed;
    flags.experiment.epsilon = args.epsilon;
    file.overlay(&flags);
    let config = RunConfig::resolve(&file)?;
    execute(&config, &args.problem)
}

fn selftest(args: &SelftestArgs) -> Result<(), Failure> {
    let defaults = SelftestOptions::default();
    let options = SelftestOptions {
        quad_order: args.quad_order.unwrap_or(defaults.quad_order),
        seed: args.seed.unwrap_or(defaults.seed),
    };
    let color = color_enabled(&io::stdout());
    let reports = run_selftest(&options);
    let mut out = io::stdout().lock();
    for r in &reports {
        let verdict = if r.passed {
            paint("PASS", "32", color)
        } else {
            paint("FAIL", "31", color)
        };
        let _ = writeln!(
            out,
            "{verdict}  {:<26} worst {:>9.2e}  tol {:>7.0e}  {:>4} checks  {:>8.1} ms  {}",
            r.name,
            r.worst,
            r.tolerance,
            r.checks,
            r.elapsed.as_secs_f64() * 1e3,
            r.description
        );
        if let Some(e) = &r.error {
            let _ = writeln!(out, "      error: {e}");
        }
    }
    if let Some(first) = reports.iter().find(|r| !r.passed) {
        return Err(anyhow!("selftest failed: first failing suite is {}", first.name).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Keep exit status 2 for non-convergence; usage errors are 1.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Predict(args) => predict(args),
        Command::Sweep(args) => sweep(args),
        Command::Selftest(args) => selftest(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("{} {e:#}", paint("error:", "31", color_enabled(&io::stderr())));
            ExitCode::from(1)
        }
        Err(Failure::NotConverged) => ExitCode::from(2),
    }
}
