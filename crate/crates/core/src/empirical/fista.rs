//! Accelerated proximal gradient for
//! `(1/n) Σ [ρ(x_iᵀβ) − y_i x_iᵀβ] + (λ/p) f(β)`.

use ndarray::{Array1, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::scalar_math::{rho, rho_prime};
use crate::theory::ProblemSpec;

/// Optimizer controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FistaKnobs {
    /// Bound on both the relative objective decrease and the norm of the
    /// prox-gradient mapping at termination.
    pub tol: f64,
    pub max_iter: usize,
    /// First trial step. `None` uses `1/L` for the global bound
    /// `L = ‖X‖²/(4n)` on the curvature of the smooth part.
    pub initial_step: Option<f64>,
}

impl Default for FistaKnobs {
    fn default() -> Self {
        FistaKnobs {
            tol: 1e-9,
            max_iter: 20_000,
            initial_step: None,
        }
    }
}

impl FistaKnobs {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("fista tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSpec("fista max_iter must be positive".into()));
        }
        if let Some(step) = self.initial_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidSpec(format!("initial step must be positive, got {step}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub beta: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Norm of `(β − prox(β − s∇g(β)))/s` at the returned `β`.
    pub gradient_map_norm: f64,
    pub converged: bool,
    /// The unregularized estimate does not exist: the iterate norm passed
    /// `10⁶·κ√p`, or the stopping rule fired at a point that separates the
    /// data.
    pub diverged: bool,
}

/// Smooth part `g(β) = (1/n) Σ [ρ(m_i) − y_i m_i]` given margins `m = Xβ`.
fn smooth_value(margins: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = margins.len() as f64;
    Zip::from(margins).and(y).fold(0.0, |acc, &m, &yi| acc + rho(m) - yi * m) / n
}

/// `∇g = (1/n) Xᵀ(ρ'(m) − y)`, accumulated row by row.
fn smooth_gradient(x: ArrayView2<f64>, margins: ArrayView1<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    let mut grad = Array1::zeros(x.ncols());
    for ((row, &m), &yi) in x.rows().into_iter().zip(margins).zip(y) {
        grad.scaled_add((rho_prime(m) - yi) / n, &row);
    }
    grad
}

fn penalty_value(beta: ArrayView1<f64>, spec: &ProblemSpec) -> f64 {
    let p = beta.len() as f64;
    if spec.lambda == 0.0 {
        return 0.0;
    }
    spec.lambda / p * beta.iter().map(|&b| spec.regularizer.value(b)).sum::<f64>()
}

fn prox_step(point: &Array1<f64>, grad: &Array1<f64>, step: f64, spec: &ProblemSpec) -> Array1<f64> {
    let p = point.len() as f64;
    let threshold = step * spec.lambda / p;
    Zip::from(point)
        .and(grad)
        .map_collect(|&v, &g| spec.regularizer.prox(v - step * g, threshold))
}

/// Largest singular value squared of `X`, by power iteration on `XᵀX`.
fn spectral_norm_sq(x: ArrayView2<f64>) -> f64 {
    let p = x.ncols();
    let mut v = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..100 {
        let xv = x.dot(&v);
        let mut w = Array1::zeros(p);
        for (row, &a) in x.rows().into_iter().zip(&xv) {
            w.scaled_add(a, &row);
        }
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - estimate).abs() <= 1e-3 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Every label is on the correct side of the hyperplane with `m = Xβ`.
fn separates(margins: ArrayView1<f64>, y: ArrayView1<f64>) -> bool {
    Zip::from(margins)
        .and(y)
        .all(|&m, &yi| if yi > 0.5 { m > 0.0 } else { m < 0.0 })
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// FISTA with backtracking (step halving) and gradient-based adaptive
/// restart, started from `β = 0`.
///
/// Stops once the relative objective decrease and the prox-gradient
/// mapping norm are both below `knobs.tol`.
pub fn fit_rlr(x: ArrayView2<f64>, y: ArrayView1<f64>, spec: &ProblemSpec, knobs: &FistaKnobs) -> Result<Fit> {
    spec.validate()?;
    knobs.validate()?;
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::InvalidSpec(format!("{} labels for {n} rows", y.len())));
    }
    let blowup = 1e6 * spec.kappa * (p as f64).sqrt();
    let mut step = match knobs.initial_step {
        Some(s) => s,
        None => {
            let curvature = 0.25 * spectral_norm_sq(x) / n as f64;
            if curvature > 0.0 {
                // Power iteration approaches the norm from below; the
                // backtracking absorbs the remaining slack.
                1.0 / curvature
            } else {
                1.0
            }
        }
    };

    let objective_at = |beta: &Array1<f64>, margins: &Array1<f64>| {
        smooth_value(margins.view(), y) + penalty_value(beta.view(), spec)
    };

    let mut beta = Array1::<f64>::zeros(p);
    let mut margins = Array1::<f64>::zeros(n);
    let mut objective = objective_at(&beta, &margins);
    // Extrapolated point and its margins.
    let mut z = beta.clone();
    let mut z_margins = margins.clone();
    let mut momentum = 1.0_f64;

    for iter in 1..=knobs.max_iter {
        let z_value = smooth_value(z_margins.view(), y);
        let grad = smooth_gradient(x, z_margins.view(), y);
        let (next, next_margins, next_smooth) = loop {
            let candidate = prox_step(&z, &grad, step, spec);
            let cand_margins = x.dot(&candidate);
            let value = smooth_value(cand_margins.view(), y);
            let diff = &candidate - &z;
            let model = z_value + grad.dot(&diff) + diff.dot(&diff) / (2.0 * step);
            if value <= model + 1e-12 * value.abs() || step < 1e-300 {
                break (candidate, cand_margins, value);
            }
            step *= 0.5;
        };
        let next_objective = next_smooth + penalty_value(next.view(), spec);

        if norm(&next) > blowup {
            return Ok(Fit {
                beta: next,
                objective: next_objective,
                iterations: iter,
                gradient_map_norm: f64::INFINITY,
                converged: false,
                diverged: true,
            });
        }

        // Restart momentum when the step points against the last move.
        let restart = (&z - &next).dot(&(&next - &beta)) > 0.0;
        let next_momentum = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt())
        };
        let weight = if restart { 0.0 } else { (momentum - 1.0) / next_momentum };
        z = &next + &((&next - &beta) * weight);
        z_margins = &next_margins + &((&next_margins - &margins) * weight);
        momentum = next_momentum;

        let decrease = (objective - next_objective).abs() / next_objective.abs().max(1.0);
        beta = next;
        margins = next_margins;
        objective = next_objective;

        if decrease < knobs.tol {
            let grad_at = smooth_gradient(x, margins.view(), y);
            let mapped = prox_step(&beta, &grad_at, step, spec);
            let gradient_map_norm = norm(&(&beta - &mapped)) / step;
            if gradient_map_norm < knobs.tol {
                // Without a penalty the gradient can vanish numerically along
                // a separating direction, where no minimizer exists.
                let separated = spec.lambda == 0.0 && separates(margins.view(), y);
                return Ok(Fit {
                    beta,
                    objective,
                    iterations: iter,
                    gradient_map_norm,
                    converged: !separated,
                    diverged: separated,
                });
            }
        }
    }

    let grad_at = smooth_gradient(x, margins.view(), y);
    let mapped = prox_step(&beta, &grad_at, step, spec);
    let gradient_map_norm = norm(&(&beta - &mapped)) / step;
    Ok(Fit {
        beta,
        objective,
        iterations: knobs.max_iter,
        gradient_map_norm,
        converged: false,
        diverged: false,
    })
}
