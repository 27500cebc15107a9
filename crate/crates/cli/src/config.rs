//! Run configuration: built-in preset, then TOML file, then command-line
//! flags, each layer overriding the previous one field by field.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rlr_core::theory::PenaltyRoute;
use rlr_core::{FistaKnobs, PriorKind, ProblemSpec, Regularizer, SolverKnobs};
use serde::Deserialize;

use crate::grid::Grid;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub reg: Option<String>,
    pub kappa: Option<f64>,
    /// Absent means a Gaussian prior.
    pub sparsity: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    pub quad_order: Option<usize>,
    pub closed_form: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub p: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub fista_tol: Option<f64>,
    pub fista_max_iter: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub delta: Option<Grid>,
    pub lambda: Option<Grid>,
    pub jobs: Option<usize>,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("ridge", include_str!("../presets/ridge.toml")),
    ("sparse-l1", include_str!("../presets/sparse-l1.toml")),
];

pub fn preset(name: &str) -> Result<FileConfig> {
    let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) else {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        bail!("unknown preset `{name}` (available: {})", names.join(", "));
    };
    parse(text).with_context(|| format!("built-in preset `{name}`"))
}

pub fn parse(text: &str) -> Result<FileConfig> {
    // toml's error message carries the line, column and offending key.
    Ok(toml::from_str(text)?)
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl FileConfig {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &FileConfig) {
        overlay!(self.problem, other.problem, reg, kappa, sparsity);
        overlay!(self.solver, other.solver, tol, damping, max_iter, quad_order, closed_form);
        overlay!(self.experiment, other.experiment, p, trials, seed, epsilon, fista_tol, fista_max_iter);
        overlay!(self.sweep, other.sweep, delta, lambda, jobs);
    }
}

pub const DEFAULT_P: usize = 250;
pub const DEFAULT_SEED: u64 = 0;

/// A validated run: the grid cells plus everything needed to evaluate them.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub regularizer: Regularizer,
    pub kappa: f64,
    pub sparsity: Option<f64>,
    pub deltas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub knobs: SolverKnobs,
    pub p: usize,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub fista: FistaKnobs,
    pub jobs: Option<usize>,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl RunConfig {
    pub fn resolve(file: &FileConfig) -> Result<RunConfig> {
        let reg_text = file.problem.reg.as_deref().context("problem.reg is required (--reg none|l1|l2sq)")?;
        let regularizer: Regularizer = reg_text.parse().context("problem.reg")?;

        let kappa = file.problem.kappa.unwrap_or(1.0);
        if !(kappa > 0.0 && kappa.is_finite()) {
            bail!("problem.kappa must be positive, got {kappa}");
        }
        if let Some(s) = file.problem.sparsity {
            if !(s > 0.0 && s <= 1.0) {
                bail!("problem.sparsity must lie in (0, 1], got {s}");
            }
        }

        let deltas = file.sweep.delta.clone().context("sweep.delta is required (--delta)")?;
        let deltas = sorted_unique(deltas.0);
        if let Some(d) = deltas.iter().find(|d| !(**d > 0.0)) {
            bail!("sweep.delta values must be positive, got {d}");
        }
        let lambdas = match (&file.sweep.lambda, regularizer) {
            (Some(g), _) => sorted_unique(g.0.clone()),
            (None, Regularizer::None) => vec![0.0],
            (None, _) => bail!("sweep.lambda is required for --reg {regularizer} (--lambda)"),
        };
        if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0)) {
            bail!("sweep.lambda values must be nonnegative, got {l}");
        }
        match regularizer {
            Regularizer::L1 if lambdas.contains(&0.0) => {
                bail!("lambda = 0 is unsupported with --reg l1; use --reg none for the unregularized fit")
            }
            Regularizer::None if lambdas.iter().any(|l| *l != 0.0) => {
                bail!("--reg none fits without a penalty and needs lambda = 0")
            }
            _ => {}
        }

        let defaults = SolverKnobs::default();
        let knobs = SolverKnobs {
            tol: file.solver.tol.unwrap_or(defaults.tol),
            damping: file.solver.damping.unwrap_or(defaults.damping),
            max_iter: file.solver.max_iter.unwrap_or(defaults.max_iter),
            quad_order: file.solver.quad_order.unwrap_or(defaults.quad_order),
            route: if file.solver.closed_form.unwrap_or(false) {
                PenaltyRoute::ClosedForm
            } else {
                PenaltyRoute::Quadrature
            },
            ..defaults
        };
        knobs.validate().context("solver")?;
        if !(rlr_core::scalar_math::MIN_ORDER..=rlr_core::scalar_math::MAX_ORDER).contains(&knobs.quad_order) {
            bail!(
                "solver.quad_order must lie in {}..={}, got {}",
                rlr_core::scalar_math::MIN_ORDER,
                rlr_core::scalar_math::MAX_ORDER,
                knobs.quad_order
            );
        }

        let fista_defaults = FistaKnobs::default();
        let fista = FistaKnobs {
            tol: file.experiment.fista_tol.unwrap_or(fista_defaults.tol),
            max_iter: file.experiment.fista_max_iter.unwrap_or(fista_defaults.max_iter),
            ..fista_defaults
        };
        fista.validate().context("experiment")?;

        let p = file.experiment.p.unwrap_or(DEFAULT_P);
        if p == 0 {
            bail!("experiment.p must be positive");
        }
        let epsilon = file.experiment.epsilon.unwrap_or(rlr_core::empirical::DEFAULT_EPSILON);
        if !(epsilon > 0.0) {
            bail!("experiment.epsilon must be positive, got {epsilon}");
        }
        if file.sweep.jobs == Some(0) {
            bail!("sweep.jobs must be positive");
        }

        let config = RunConfig {
            regularizer,
            kappa,
            sparsity: file.problem.sparsity,
            deltas,
            lambdas,
            knobs,
            p,
            trials: file.experiment.trials.unwrap_or(0),
            seed: file.experiment.seed.unwrap_or(DEFAULT_SEED),
            epsilon,
            fista,
            jobs: file.sweep.jobs,
        };
        for spec in config.cells()? {
            if config.trials > 0 && (spec.delta * p as f64).round() < 1.0 {
                bail!("delta {} with p {p} leaves no observations", spec.delta);
            }
        }
        Ok(config)
    }

    pub fn prior(&self) -> PriorKind {
        match self.sparsity {
            Some(sparsity) => PriorKind::Sparse { sparsity },
            None => PriorKind::Gaussian,
        }
    }

    /// Grid cells in `(δ, λ)` order.
    pub fn cells(&self) -> Result<Vec<ProblemSpec>> {
        let mut cells = Vec::with_capacity(self.deltas.len() * self.lambdas.len());
        for &delta in &self.deltas {
            for &lambda in &self.lambdas {
                let spec = ProblemSpec::new(self.kappa, delta, lambda, self.regularizer, self.prior())
                    .with_context(|| format!("cell delta={delta} lambda={lambda}"))?;
                cells.push(spec);
            }
        }
        Ok(cells)
    }
}
