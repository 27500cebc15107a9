use std::cell::Cell;

use roots::{find_root_brent, SimpleConvergency};

use crate::error::{Error, Result};
use crate::expectation::link_moments;
use crate::prox::Regularizer;
use crate::scalar_math::{gauss_hermite, QuadratureRule};

use super::system::{l2_closed_form, system_map_with};
use super::{FixedPoint, ProblemSpec, SolverKnobs};

const DAMPING_FLOOR: f64 = 1.0 / 64.0;
const MAX_INCREASES: usize = 5;
/// Iterations without a `STALL_PROGRESS` improvement of the best residual
/// before damping is tightened; catches oscillation that never increases
/// five times in a row.
const STALL_WINDOW: usize = 50;
const STALL_PROGRESS: f64 = 0.9;
/// Relative residual, as a multiple of the best so far, treated as divergence.
const RUNAWAY: f64 = 100.0;

/// A fixed point together with the evidence that it is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub point: FixedPoint,
    /// `‖v − S(v)‖∞` at `point`; for the reduced solver, the sup-norm
    /// change of `(α, σ, γ)` under one undamped update.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relaxation weight in force when the iteration stopped.
    pub damping: f64,
}

/// Tracks the damping schedule: halve on infeasibility, on a run of
/// residual increases, or on a stall. Progress is judged on the
/// scale-relative residual `max |S(v)ᵢ − vᵢ| / max(1, |vᵢ|)`, since `τ` can
/// grow by orders of magnitude on the way to a well-behaved fixed point.
struct Damping {
    omega: f64,
    increases: usize,
    prev: f64,
    best: f64,
    best_at: usize,
}

impl Damping {
    fn new(omega: f64) -> Self {
        Damping {
            omega,
            increases: 0,
            prev: f64::INFINITY,
            best: f64::INFINITY,
            best_at: 0,
        }
    }

    /// Returns false when the floor has already been reached.
    fn tighten(&mut self, iter: usize) -> bool {
        if self.omega <= DAMPING_FLOOR {
            return false;
        }
        self.omega = (self.omega / 2.0).max(DAMPING_FLOOR);
        self.increases = 0;
        self.prev = f64::INFINITY;
        self.best = f64::INFINITY;
        self.best_at = iter;
        true
    }

    fn observe(&mut self, iter: usize, residual: f64) {
        if residual > self.prev {
            self.increases += 1;
        } else {
            self.increases = 0;
        }
        self.prev = residual;
        if residual < STALL_PROGRESS * self.best {
            self.best_at = iter;
        }
        self.best = self.best.min(residual);
        if self.increases >= MAX_INCREASES || iter - self.best_at >= STALL_WINDOW {
            self.tighten(iter);
        }
    }
}

struct Iterate<const N: usize> {
    point: [f64; N],
    residual: f64,
    iterations: usize,
    converged: bool,
    damping: f64,
}

/// `v ← (1 − ω)v + ω map(v)` until `‖v − map(v)‖∞ ≤ tol`. After an
/// infeasible or runaway update the iteration restarts, more heavily
/// damped, from the point with the smallest relative residual seen so far.
fn damped_iteration<const N: usize, M>(init: [f64; N], knobs: &SolverKnobs, mut map: M) -> Result<Iterate<N>>
where
    M: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let mut damping = Damping::new(knobs.damping);
    let mut v = init;
    // Best point by relative residual, with its image.
    let mut retreat: Option<([f64; N], [f64; N], f64)> = None;
    let mut best = Iterate {
        point: v,
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
        damping: knobs.damping,
    };

    for iter in 0..knobs.max_iter {
        let sv = match map(&v).map_err(as_infeasible) {
            Ok(sv) => sv,
            Err(Error::Infeasible(msg)) => {
                let Some((a, sa, _)) = retreat else {
                    return Err(Error::Infeasible(format!("initial point: {msg}")));
                };
                if !damping.tighten(iter) {
                    return Err(Error::Infeasible(format!("at damping floor after {iter} iterations: {msg}")));
                }
                v = mix(&a, &sa, damping.omega);
                continue;
            }
            Err(e) => return Err(e),
        };
        let residual = v.iter().zip(&sv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= knobs.tol {
            return Ok(Iterate {
                point: v,
                residual,
                iterations: iter,
                converged: true,
                damping: damping.omega,
            });
        }
        if residual < best.residual {
            best = Iterate {
                point: v,
                residual,
                iterations: iter,
                converged: false,
                damping: damping.omega,
            };
        }
        let relative = relative_change(&v, &sv);
        match retreat {
            Some((a, sa, r)) if relative > RUNAWAY * r => {
                // Runaway: back off to the best point instead of following it.
                if !damping.tighten(iter) {
                    break;
                }
                v = mix(&a, &sa, damping.omega);
                continue;
            }
            Some((_, _, r)) if relative >= r => {}
            _ => retreat = Some((v, sv, relative)),
        }
        damping.observe(iter, relative);
        v = mix(&v, &sv, damping.omega);
    }
    best.iterations = knobs.max_iter;
    Ok(best)
}

/// Damped iteration `v ← (1 − ω)v + ω S(v)`. Unregularized problems go to
/// [`solve_l2_reduced`], where the identity prox makes the six-equation
/// map degenerate.
///
/// Running out of iterations is not an error: the best iterate is returned
/// with `converged = false`.
pub fn solve_fixed_point(spec: &ProblemSpec, knobs: &SolverKnobs) -> Result<Solution> {
    spec.validate()?;
    knobs.validate()?;
    if spec.is_unregularized() {
        return solve_l2_reduced(spec, knobs);
    }
    let rule = gauss_hermite(knobs.quad_order)?;
    let it = damped_iteration(knobs.init.to_array(), knobs, |v| {
        system_map_with(&FixedPoint::from_array(*v), spec, &rule, knobs.route).map(FixedPoint::to_array)
    })?;
    Ok(Solution {
        point: FixedPoint::from_array(it.point),
        residual: it.residual,
        iterations: it.iterations,
        converged: it.converged,
        damping: it.damping,
    })
}

/// Three-equation system in `(α, σ, γ)` for rescaling proxes:
///
/// ```text
/// σ²/(2δ)          = E[ρ'(−κZ₁)(X − prox_{γρ}(X))²]
/// −α/(2δ)          = E[ρ''(−κZ₁) prox_{γρ}(X)]
/// 1 − 1/δ + λγ     = E[2ρ'(−κZ₁) / (1 + γρ''(prox_{γρ}(X)))]
/// ```
///
/// Each sweep solves the last line for `γ` at the current `(α, σ)` by
/// bracketed root finding, then refreshes `σ` and `α` from the first two.
/// `(θ, τ, r)` are reconstructed at the end.
pub fn solve_l2_reduced(spec: &ProblemSpec, knobs: &SolverKnobs) -> Result<Solution> {
    spec.validate()?;
    knobs.validate()?;
    if spec.regularizer == Regularizer::L1 {
        return Err(Error::InvalidSpec("the reduced system needs the l2sq penalty or none".into()));
    }
    let rule = gauss_hermite(knobs.quad_order)?;
    let init = [knobs.init.alpha, knobs.init.sigma, knobs.init.gamma];
    let it = damped_iteration(init, knobs, |&[alpha, sigma, gamma]| {
        reduced_update(spec, alpha, sigma, gamma, &rule)
    })?;
    let [alpha, sigma, gamma] = it.point;
    let (theta, tau, r) = l2_closed_form(alpha, sigma, gamma, spec)?;
    Ok(Solution {
        point: FixedPoint::new(alpha, sigma, gamma, theta, tau, r),
        residual: it.residual,
        iterations: it.iterations,
        converged: it.converged,
        damping: it.damping,
    })
}

/// A prox that fails to converge only happens at runaway arguments, so it
/// is handled like any other infeasible update.
fn as_infeasible(e: Error) -> Error {
    match e {
        Error::ProxNonConvergence { x, t } => Error::Infeasible(format!("prox diverged at x = {x:e}, t = {t:e}")),
        e => e,
    }
}

fn relative_change(v: &[f64], sv: &[f64]) -> f64 {
    v.iter()
        .zip(sv)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn mix<const N: usize>(a: &[f64; N], b: &[f64; N], omega: f64) -> [f64; N] {
    std::array::from_fn(|i| (1.0 - omega) * a[i] + omega * b[i])
}

/// One sweep of the reduced system. `gamma` is only used to seed the bracket.
fn reduced_update(
    spec: &ProblemSpec,
    alpha: f64,
    sigma: f64,
    gamma: f64,
    rule: &QuadratureRule,
) -> Result<[f64; 3]> {
    let (kappa, delta, lambda) = (spec.kappa, spec.delta, spec.lambda);
    let failure: Cell<Option<Error>> = Cell::new(None);
    let mut h = |g: f64| match link_moments(kappa, alpha, sigma, g, rule) {
        Ok(m) => lambda * g + m.slack - 1.0 / delta,
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };

    // h(0⁺) = −1/δ and h increases in γ; walk a bracket out from the seed.
    let mut lo = gamma / 2.0;
    while h(lo) > 0.0 {
        lo /= 4.0;
        if lo < 1e-300 {
            return Err(Error::Infeasible("could not bracket gamma from below".into()));
        }
    }
    let mut hi = gamma.max(lo * 2.0);
    let mut doublings = 0;
    while !(h(hi) > 0.0) {
        if let Some(e) = failure.take() {
            return Err(e);
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::Infeasible(format!(
                "no gamma solves the slope equation at alpha {alpha}, sigma {sigma}; \
                 the estimator may not exist at delta {delta}"
            )));
        }
    }
    let mut conv = SimpleConvergency {
        eps: 1e-15,
        max_iter: 200,
    };
    let root = find_root_brent(lo, hi, &mut h, &mut conv);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let gamma_new = root.map_err(|e| Error::Infeasible(format!("gamma root search failed: {e:?}")))?;

    let m = link_moments(kappa, alpha, sigma, gamma_new, rule)?;
    let sigma_sq = 2.0 * delta * m.residual_sq;
    if !(sigma_sq > 0.0) {
        return Err(Error::Infeasible(format!("sigma² = {sigma_sq:e} is not positive")));
    }
    let alpha_new = -2.0 * delta * m.curvature_prox;
    Ok([alpha_new, sigma_sq.sqrt(), gamma_new])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectation::PriorKind;
    use crate::theory::PenaltyRoute;

    fn ridge(delta: f64, lambda: f64) -> ProblemSpec {
        ProblemSpec::new(1.0, delta, lambda, Regularizer::L2Sq, PriorKind::Gaussian).unwrap()
    }

    #[test]
    fn ridge_fixed_point_is_a_fixed_point() {
        let spec = ridge(4.0, 0.5);
        let knobs = SolverKnobs::default();
        let sol = solve_fixed_point(&spec, &knobs).unwrap();
        assert!(sol.converged);
        let rule = gauss_hermite(knobs.quad_order).unwrap();
        let image = system_map_with(&sol.point, &spec, &rule, knobs.route).unwrap();
        let residual = sol.point.max_abs_diff(&image);
        assert_eq!(residual, sol.residual);
        assert!(residual < 1e-8);

        let v = sol.point;
        let (theta, tau, r) = l2_closed_form(v.alpha, v.sigma, v.gamma, &spec).unwrap();
        assert!((theta - v.theta).abs() < 1e-6);
        assert!((tau - v.tau).abs() < 1e-6);
        assert!((r - v.r).abs() < 1e-6);
    }

    #[test]
    fn reduced_agrees_with_full_system() {
        let knobs = SolverKnobs::default();
        for delta in [2.0, 4.0, 8.0] {
            for lambda in [0.1, 0.5, 1.0] {
                let spec = ridge(delta, lambda);
                let full = solve_fixed_point(&spec, &knobs).unwrap();
                let reduced = solve_l2_reduced(&spec, &knobs).unwrap();
                assert!(full.converged && reduced.converged);
                let diff = full.point.max_abs_diff(&reduced.point);
                assert!(diff < 1e-7, "delta {delta} lambda {lambda}: {diff:e}");
            }
        }
    }

    #[test]
    fn sparse_l1_routes_agree() {
        let spec = ProblemSpec::new(1.0, 4.0, 0.8, Regularizer::L1, PriorKind::Sparse { sparsity: 0.25 }).unwrap();
        let quad = solve_fixed_point(&spec, &SolverKnobs::default()).unwrap();
        let closed = solve_fixed_point(
            &spec,
            &SolverKnobs {
                route: PenaltyRoute::ClosedForm,
                ..SolverKnobs::default()
            },
        )
        .unwrap();
        assert!(quad.converged && closed.converged);
        assert!(quad.point.max_abs_diff(&closed.point) < 1e-6);
    }

    #[test]
    fn unregularized_routes_to_reduced_system() {
        let spec = ProblemSpec::new(1.0, 8.0, 0.0, Regularizer::None, PriorKind::Gaussian).unwrap();
        let knobs = SolverKnobs::default();
        let sol = solve_fixed_point(&spec, &knobs).unwrap();
        assert!(sol.converged);
        // Slope equation of the reduced system at the solution.
        let rule = gauss_hermite(knobs.quad_order).unwrap();
        let v = sol.point;
        let m = link_moments(1.0, v.alpha, v.sigma, v.gamma, &rule).unwrap();
        assert!((1.0 - 1.0 / 8.0 - m.slope).abs() < 1e-9);
        assert!((v.sigma * v.sigma / 16.0 - m.residual_sq).abs() < 1e-9);
        assert!((-v.alpha / 16.0 - m.curvature_prox).abs() < 1e-9);
        // The maximum-likelihood estimate is inflated: α > 1.
        assert!(v.alpha > 1.0);
    }

    #[test]
    fn correlation_decreases_with_lambda() {
        let knobs = SolverKnobs::default();
        for delta in [2.0, 8.0] {
            let alphas: Vec<f64> = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0]
                .iter()
                .map(|&l| solve_fixed_point(&ridge(delta, l), &knobs).unwrap().point.alpha)
                .collect();
            assert!(alphas.windows(2).all(|w| w[1] <= w[0]), "{alphas:?}");
        }
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let knobs = SolverKnobs {
            max_iter: 3,
            ..SolverKnobs::default()
        };
        let sol = solve_fixed_point(&ridge(4.0, 0.5), &knobs).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
        assert!(sol.residual.is_finite());
    }

    #[test]
    fn reduced_rejects_l1() {
        let spec = ProblemSpec::new(1.0, 4.0, 0.8, Regularizer::L1, PriorKind::Gaussian).unwrap();
        assert!(solve_l2_reduced(&spec, &SolverKnobs::default()).is_err());
    }

    #[test]
    fn solves_are_deterministic() {
        let spec = ProblemSpec::new(1.0, 2.0, 0.4, Regularizer::L1, PriorKind::Sparse { sparsity: 0.25 }).unwrap();
        let a = solve_fixed_point(&spec, &SolverKnobs::default()).unwrap();
        let b = solve_fixed_point(&spec, &SolverKnobs::default()).unwrap();
        assert_eq!(a, b);
    }
}
