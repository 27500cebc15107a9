//! Evaluates grid cells on a bounded worker pool.

use std::time::{Duration, Instant};

use anyhow::Result;
use rayon::prelude::*;
use rlr_core::empirical::{run_trials, Summary};
use rlr_core::theory::predict;
use rlr_core::{ExperimentConfig, ProblemSpec, TheoryReport};

use crate::config::RunConfig;

#[derive(Debug, Clone)]
pub struct CellResult {
    pub spec: ProblemSpec,
    pub theory: Result<TheoryReport, String>,
    /// `None` in theory-only mode.
    pub empirical: Option<Result<Summary, String>>,
    pub runtime: Duration,
}

impl CellResult {
    pub fn flags(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        match &self.theory {
            Ok(report) if !report.converged => flags.push("theory-not-converged"),
            Ok(_) => {}
            Err(_) => flags.push("theory-failed"),
        }
        if let Some(Err(_)) = &self.empirical {
            flags.push("empirical-failed");
        }
        flags
    }
}

fn evaluate(config: &RunConfig, spec: &ProblemSpec) -> CellResult {
    let start = Instant::now();
    let theory = predict(spec, &config.knobs).map_err(|e| e.to_string());
    let empirical = (config.trials > 0).then(|| {
        let experiment = ExperimentConfig {
            epsilon: config.epsilon,
            fista: config.fista,
            ..ExperimentConfig::new(config.p, *spec, config.trials, config.seed)
        };
        run_trials(&experiment).map(|e| e.summary).map_err(|e| e.to_string())
    });
    CellResult {
        spec: *spec,
        theory,
        empirical,
        runtime: start.elapsed(),
    }
}

/// Results come back in `(δ, λ)` order whatever the worker count.
pub fn run_cells(config: &RunConfig) -> Result<Vec<CellResult>> {
    let cells = config.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()?;
    let mut results: Vec<CellResult> = pool.install(|| cells.par_iter().map(|spec| evaluate(config, spec)).collect());
    results.sort_by(|a, b| {
        a.spec
            .delta
            .total_cmp(&b.spec.delta)
            .then(a.spec.lambda.total_cmp(&b.spec.lambda))
    });
    Ok(results)
}
