//! Asymptotic theory: the six-equation system, its solvers, and the
//! performance predictions derived from a solved fixed point.
//!
//! The unknowns are `v = (α, σ, γ, θ, τ, r)`. With
//! `P = prox_{λστ f̃}(στ(θβ + (r/√δ)Z))` and `X = καZ₁ + σZ₂`:
//!
//! ```text
//! κ²α         = E[β P]
//! γ           = E[Z P] / (r√δ)
//! κ²α² + σ²   = E[P²]
//! γ²          = (2/r²) E[ρ'(−κZ₁)(X − prox_{γρ}(X))²]
//! θγ          = −2 E[ρ''(−κZ₁) prox_{γρ}(X)]
//! 1 − γ/(στ)  = E[2ρ'(−κZ₁) / (1 + γρ''(prox_{γρ}(X)))]
//! ```

mod predict;
mod solver;
mod system;

pub use predict::{
    gamma_map, predict, predict_functional, predict_support_recovery, report_from_solution,
    SupportRecoveryPrediction, TheoryReport,
};
pub use solver::{solve_fixed_point, solve_l2_reduced, Solution};
pub use system::{
    l2_closed_form, sparse_l1_closed_form, system_map, system_map_with, PenaltyRoute,
};

use crate::error::{Error, Result};
use crate::expectation::{Prior, PriorKind};
use crate::prox::Regularizer;
use crate::scalar_math::DEFAULT_QUAD_ORDER;

/// The triple `(κ, δ, λ)` with the penalty and the coefficient prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    /// Signal strength `‖β*‖ / √p`.
    pub kappa: f64,
    /// Oversampling ratio `n / p`.
    pub delta: f64,
    pub lambda: f64,
    pub regularizer: Regularizer,
    pub prior: Prior,
}

impl ProblemSpec {
    pub fn new(kappa: f64, delta: f64, lambda: f64, regularizer: Regularizer, prior: PriorKind) -> Result<Self> {
        let spec = ProblemSpec {
            kappa,
            delta,
            lambda,
            regularizer,
            prior: Prior { kind: prior, kappa },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidSpec(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidSpec(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        self.prior.validate()?;
        if self.prior.kappa != self.kappa {
            return Err(Error::InvalidSpec(format!(
                "prior kappa {} differs from problem kappa {}",
                self.prior.kappa, self.kappa
            )));
        }
        match self.regularizer {
            Regularizer::None if self.lambda != 0.0 => Err(Error::InvalidSpec(format!(
                "regularizer none requires lambda = 0, got {}",
                self.lambda
            ))),
            Regularizer::L1 if self.lambda == 0.0 => Err(Error::InvalidSpec(
                "lambda = 0 with l1 is unsupported; use regularizer none for the unregularized fit".into(),
            )),
            _ => Ok(()),
        }
    }

    /// `λ = 0`, the maximum-likelihood case.
    pub fn is_unregularized(&self) -> bool {
        self.lambda == 0.0
    }
}

/// The six unknowns of the asymptotic system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub theta: f64,
    pub tau: f64,
    pub r: f64,
}

impl FixedPoint {
    pub const fn new(alpha: f64, sigma: f64, gamma: f64, theta: f64, tau: f64, r: f64) -> Self {
        FixedPoint {
            alpha,
            sigma,
            gamma,
            theta,
            tau,
            r,
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.alpha, self.sigma, self.gamma, self.theta, self.tau, self.r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        FixedPoint::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    /// `‖self − other‖∞`
    pub fn max_abs_diff(&self, other: &FixedPoint) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `(1 − ω)·self + ω·target`
    pub fn blend(&self, target: &FixedPoint, omega: f64) -> FixedPoint {
        let a = self.to_array();
        let b = target.to_array();
        FixedPoint::from_array(std::array::from_fn(|i| (1.0 - omega) * a[i] + omega * b[i]))
    }

    pub fn is_interior(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
            && self.sigma > 0.0
            && self.gamma > 0.0
            && self.tau > 0.0
            && self.r > 0.0
    }
}

impl Default for FixedPoint {
    fn default() -> Self {
        FixedPoint::new(0.5, 1.0, 1.0, 1.0, 1.0, 1.0)
    }
}

/// Iteration controls for the fixed-point solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverKnobs {
    /// Initial relaxation weight `ω ∈ (0, 1]`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub quad_order: usize,
    pub init: FixedPoint,
    pub route: PenaltyRoute,
}

impl Default for SolverKnobs {
    fn default() -> Self {
        SolverKnobs {
            damping: 1.0,
            tol: 1e-10,
            max_iter: 2000,
            quad_order: DEFAULT_QUAD_ORDER,
            init: FixedPoint::default(),
            route: PenaltyRoute::Quadrature,
        }
    }
}

impl SolverKnobs {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidSpec(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSpec("max_iter must be positive".into()));
        }
        if !self.init.is_interior() {
            return Err(Error::InvalidSpec("initial point needs positive sigma, gamma, tau, r".into()));
        }
        Ok(())
    }
}
