//! Named invariant suites, runnable from the command line as a quick
//! health check of the numerics.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expectation::{penalty_moments, PenaltyArgs, PriorKind};
use crate::prox::{moreau_envelope, prox_rho, prox_rho_derivative, Envelope, Regularizer};
use crate::scalar_math::{gauss_hermite, rho_prime, rho_second, DEFAULT_QUAD_ORDER};
use crate::theory::{sparse_l1_closed_form, FixedPoint, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    /// Quadrature order for the suites that integrate.
    pub quad_order: usize,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            quad_order: DEFAULT_QUAD_ORDER,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub description: &'static str,
    pub passed: bool,
    /// Largest discrepancy seen.
    pub worst: f64,
    pub tolerance: f64,
    pub checks: usize,
    pub elapsed: Duration,
    /// Set when a check could not be evaluated at all.
    pub error: Option<String>,
}

type SuiteFn = fn(&SelftestOptions, &mut ChaCha8Rng) -> Result<(f64, usize)>;

struct Suite {
    name: &'static str,
    description: &'static str,
    tolerance: f64,
    run: SuiteFn,
}

const SUITES: &[Suite] = &[
    Suite {
        name: "moreau-derivatives",
        description: "Moreau envelope partials in v and t vs central differences",
        tolerance: 1e-5,
        run: moreau_derivatives,
    },
    Suite {
        name: "prox-reflection-identity",
        description: "prox_{tρ}(x + t) = −prox_{tρ}(−x) at 100 random points",
        tolerance: 1e-10,
        run: prox_reflection,
    },
    Suite {
        name: "prox-derivative",
        description: "d/dx prox_{tρ}(x) = 1/(1 + tρ''(prox)) vs central differences",
        tolerance: 1e-6,
        run: prox_derivative,
    },
    Suite {
        name: "stein-identity",
        description: "E[Z f(Z)] = E[f'(Z)] under Gauss-Hermite quadrature",
        tolerance: 1e-8,
        run: stein_identity,
    },
    Suite {
        name: "sparse-closed-forms",
        description: "Q-function forms of the l1 moments vs direct quadrature",
        tolerance: 1e-8,
        run: sparse_closed_forms,
    },
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

/// Run every suite in order. Each suite gets its own generator seeded from
/// `options.seed`, so reports do not depend on which suites ran before.
pub fn run_selftest(options: &SelftestOptions) -> Vec<SuiteReport> {
    SUITES
        .iter()
        .enumerate()
        .map(|(i, suite)| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(i as u64));
            let start = Instant::now();
            let outcome = (suite.run)(options, &mut rng);
            let elapsed = start.elapsed();
            let (worst, checks, error) = match outcome {
                Ok((worst, checks)) => (worst, checks, None),
                Err(e) => (f64::INFINITY, 0, Some(e.to_string())),
            };
            SuiteReport {
                name: suite.name,
                description: suite.description,
                passed: error.is_none() && worst <= suite.tolerance,
                worst,
                tolerance: suite.tolerance,
                checks,
                elapsed,
                error,
            }
        })
        .collect()
}

fn moreau_derivatives(_: &SelftestOptions, rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut checks = 0;
    let envelopes = [
        Envelope::Link,
        Envelope::Penalty(Regularizer::L1),
        Envelope::Penalty(Regularizer::L2Sq),
    ];
    for _ in 0..100 {
        let x: f64 = rng.random_range(-5.0..5.0);
        let t: f64 = rng.random_range(0.2..3.0);
        for f in envelopes {
            let p = f.prox(x, t)?;
            let dx = (moreau_envelope(f, x + h, t)? - moreau_envelope(f, x - h, t)?) / (2.0 * h);
            let dt = (moreau_envelope(f, x, t + h)? - moreau_envelope(f, x, t - h)?) / (2.0 * h);
            worst = worst.max((dx - (x - p) / t).abs());
            worst = worst.max((dt + (x - p) * (x - p) / (2.0 * t * t)).abs());
            checks += 2;
        }
    }
    Ok((worst, checks))
}

fn prox_reflection(_: &SelftestOptions, rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let x: f64 = rng.random_range(-10.0..10.0);
        let t: f64 = rng.random_range(0.01..5.0);
        let lhs = prox_rho(x + t, t)?;
        let rhs = -prox_rho(-x, t)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok((worst, 100))
}

fn prox_derivative(_: &SelftestOptions, rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let x: f64 = rng.random_range(-10.0..10.0);
        let t: f64 = rng.random_range(0.01..5.0);
        let fd = (prox_rho(x + h, t)? - prox_rho(x - h, t)?) / (2.0 * h);
        worst = worst.max((fd - prox_rho_derivative(x, t)?).abs());
    }
    Ok((worst, 100))
}

fn stein_identity(options: &SelftestOptions, rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let rule = gauss_hermite(options.quad_order)?;
    let mut worst = 0.0_f64;
    let mut checks = 0;
    for _ in 0..20 {
        let a: f64 = rng.random_range(0.2..2.0);
        let b: f64 = rng.random_range(-2.0..2.0);
        let t: f64 = rng.random_range(0.1..3.0);

        // f(z) = ρ'(az + b)
        let lhs = rule.integrate(|z| z * rho_prime(a * z + b));
        let rhs = rule.integrate(|z| a * rho_second(a * z + b));
        worst = worst.max((lhs - rhs).abs());

        // f(z) = prox_{tρ}(az + b), differentiated through the prox
        let mut failure = None;
        let mut prox = |z: f64| {
            prox_rho(a * z + b, t).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        };
        let lhs = rule.integrate(|z| z * prox(z));
        let rhs = rule.integrate(|z| a / (1.0 + t * rho_second(prox(z))));
        if let Some(e) = failure {
            return Err(e);
        }
        worst = worst.max((lhs - rhs).abs());
        checks += 2;
    }
    Ok((worst, checks))
}

fn sparse_closed_forms(options: &SelftestOptions, rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let rule = gauss_hermite(options.quad_order)?;
    let spec = ProblemSpec::new(1.0, 4.0, 0.8, Regularizer::L1, PriorKind::Sparse { sparsity: 0.25 })?;
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let v = FixedPoint::from_array(std::array::from_fn(|_| rng.random_range(0.1..3.0)));
        let args = PenaltyArgs {
            regularizer: spec.regularizer,
            lambda: spec.lambda,
            delta: spec.delta,
            sigma: v.sigma,
            tau: v.tau,
            theta: v.theta,
            r: v.r,
        };
        let quad = penalty_moments(&args, &spec.prior, &rule)?;
        let closed = sparse_l1_closed_form(&v, &spec)?;
        worst = worst
            .max((quad.beta_prox - closed.beta_prox).abs())
            .max((quad.z_prox - closed.z_prox).abs())
            .max((quad.prox_sq - closed.prox_sq).abs());
    }
    Ok((worst, 60))
}
