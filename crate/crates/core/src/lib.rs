//! Exact asymptotic performance of regularized logistic regression (RLR) in
//! the proportional regime `n/p → δ`, plus the Monte Carlo machinery that
//! checks those predictions on finite synthetic problems.
//!
//! The pipeline is:
//!
//! * [`scalar_math`]: link function `ρ(t) = log(1 + eᵗ)`, the normal tail
//!   `Q`, Gauss–Hermite rules.
//! * [`prox`]: scalar proximal operators and Moreau envelopes.
//! * [`expectation`]: deterministic quadrature of every expectation in the
//!   six-equation system.
//! * [`theory`]: the system map, its fixed-point solvers and the derived
//!   predictions (correlation, variance, MSE, support recovery).
//! * [`empirical`]: synthetic data, an accelerated proximal-gradient RLR
//!   solver, per-trial measurements and seeded aggregation.
//! * [`selftest`]: named invariant suites shared by the CLI and tests.


// `!(x > 0.0)` is deliberate throughout: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod empirical;
pub mod error;
pub mod expectation;
pub mod prox;
pub mod scalar_math;
pub mod selftest;
pub mod theory;

pub use empirical::{ExperimentConfig, FistaKnobs, TrialResult};
pub use error::{Error, Result};
pub use expectation::{Prior, PriorKind};
pub use prox::Regularizer;
pub use scalar_math::QuadratureRule;
pub use theory::{FixedPoint, ProblemSpec, SolverKnobs, SupportRecoveryPrediction, TheoryReport};
