//! Monte Carlo counterpart of the theory: synthetic instances, the
//! finite-dimensional fit, and seeded aggregation over trials.

mod data;
mod fista;
mod measure;

pub use data::{generate_instance, trial_seed, Instance};
pub use fista::{fit_rlr, Fit, FistaKnobs};
pub use measure::{measure_trial, Metrics};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::theory::ProblemSpec;

/// Support threshold `ε` used when none is given.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Everything needed to reproduce a batch of trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub p: usize,
    pub spec: ProblemSpec,
    pub trials: usize,
    pub master_seed: u64,
    pub epsilon: f64,
    pub fista: FistaKnobs,
}

impl ExperimentConfig {
    pub fn new(p: usize, spec: ProblemSpec, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            p,
            spec,
            trials,
            master_seed,
            epsilon: DEFAULT_EPSILON,
            fista: FistaKnobs::default(),
        }
    }

    /// `n = round(δp)`
    pub fn n(&self) -> usize {
        (self.spec.delta * self.p as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.fista.validate()?;
        if self.p == 0 {
            return Err(Error::InvalidSpec("p must be positive".into()));
        }
        if self.n() == 0 {
            return Err(Error::InvalidSpec(format!("delta·p = {} rounds to zero rows", self.spec.delta * self.p as f64)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidSpec(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub index: u64,
    pub seed: u64,
    /// `None` when the truth had empty support.
    pub metrics: Option<Metrics>,
    pub optimizer_iters: usize,
    pub objective_final: f64,
    pub converged: bool,
    pub diverged: bool,
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// `s/√k`; zero for a single sample.
    pub se: f64,
    pub count: usize,
}

impl Stat {
    pub fn from_samples(xs: &[f64]) -> Option<Stat> {
        let k = xs.len();
        if k == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / k as f64;
        let se = if k > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, se, count: k })
    }
}

/// Aggregates over trials whose optimizer converged and whose truth had a
/// nonempty support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub alpha: Option<Stat>,
    pub sigma2: Option<Stat>,
    pub mse_raw: Option<Stat>,
    pub mse_debiased: Option<Stat>,
    pub e1: Option<Stat>,
    pub e2: Option<Stat>,
    pub trials_converged: usize,
    pub trials_not_converged: usize,
    /// Trials skipped because the drawn `β*` was identically zero.
    pub trials_empty_support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub trials: Vec<TrialResult>,
    pub summary: Summary,
}

/// Run one trial end to end.
pub fn run_trial(config: &ExperimentConfig, index: u64) -> Result<TrialResult> {
    let seed = trial_seed(config.master_seed, index);
    let instance = generate_instance(config, seed);
    let fit = fit_rlr(instance.x.view(), instance.y.view(), &config.spec, &config.fista)?;
    let metrics = match measure_trial(fit.beta.view(), instance.beta_star.view(), config.epsilon) {
        Ok(m) => Some(m),
        Err(Error::EmptySupport) => None,
        Err(e) => return Err(e),
    };
    Ok(TrialResult {
        index,
        seed,
        metrics,
        optimizer_iters: fit.iterations,
        objective_final: fit.objective,
        converged: fit.converged,
        diverged: fit.diverged,
    })
}

/// All trials of `config`, in parallel. Each trial derives its own seed
/// from `(master_seed, index)` and results are reduced in index order, so
/// the output does not depend on the thread count.
pub fn run_trials(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let trials: Vec<TrialResult> = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect::<Result<_>>()?;
    let summary = summarize(&trials);
    Ok(Experiment { trials, summary })
}

pub fn summarize(trials: &[TrialResult]) -> Summary {
    let usable: Vec<&Metrics> = trials
        .iter()
        .filter(|t| t.converged)
        .filter_map(|t| t.metrics.as_ref())
        .collect();
    let stat = |f: &dyn Fn(&Metrics) -> Option<f64>| {
        let xs: Vec<f64> = usable.iter().filter_map(|m| f(m)).collect();
        Stat::from_samples(&xs)
    };
    Summary {
        alpha: stat(&|m| Some(m.alpha_hat)),
        sigma2: stat(&|m| Some(m.sigma2_hat)),
        mse_raw: stat(&|m| Some(m.mse_raw)),
        mse_debiased: stat(&|m| Some(m.mse_debiased).filter(|v| v.is_finite())),
        e1: stat(&|m| m.e1_hat),
        e2: stat(&|m| Some(m.e2_hat)),
        trials_converged: trials.iter().filter(|t| t.converged).count(),
        trials_not_converged: trials.iter().filter(|t| !t.converged).count(),
        trials_empty_support: trials.iter().filter(|t| t.metrics.is_none()).count(),
    }
}
