//! Shared fixtures for the criterion benchmarks.

use rlr_core::{ExperimentConfig, PriorKind, ProblemSpec, Regularizer};

pub fn ridge(delta: f64, lambda: f64) -> ProblemSpec {
    ProblemSpec::new(1.0, delta, lambda, Regularizer::L2Sq, PriorKind::Gaussian).unwrap()
}

/// `l1` penalty with a Bernoulli-Gaussian prior of sparsity 0.25.
pub fn sparse_l1(delta: f64, lambda: f64) -> ProblemSpec {
    ProblemSpec::new(1.0, delta, lambda, Regularizer::L1, PriorKind::Sparse { sparsity: 0.25 }).unwrap()
}

pub fn experiment(spec: ProblemSpec, p: usize) -> ExperimentConfig {
    ExperimentConfig::new(p, spec, 1, 7)
}
