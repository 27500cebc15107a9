//! The system map `S(v)`: each equation is solved for one designated
//! unknown, with every expectation evaluated at the current `v`.
//!
//! | line | unknown | update                                  |
//! |------|---------|-----------------------------------------|
//! | 1    | α       | `E[βP] / κ²`                            |
//! | 2    | γ       | `E[ZP] / (r√δ)`                         |
//! | 3    | σ       | `√(E[P²] − κ²α_new²)`, floored          |
//! | 4    | r       | `√(2 E[ρ'(−κZ₁)(X − prox)²]) / γ`       |
//! | 5    | θ       | `−2 E[ρ''(−κZ₁) prox] / γ`              |
//! | 6    | τ       | `γ / (σ (1 − E[2ρ'/(1 + γρ'')]))`       |

use crate::error::{Error, Result};
use crate::expectation::{link_moments, penalty_moments, PenaltyArgs, PenaltyMoments};
use crate::prox::Regularizer;
use crate::scalar_math::{normal_pdf, q_function, QuadratureRule};

use super::{FixedPoint, ProblemSpec};

const SIGMA_SQ_FLOOR: f64 = 1e-12;

/// How the penalty-side expectations (first three lines) are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyRoute {
    /// Tensor quadrature over `(β, Z)`, split at soft-threshold kinks.
    #[default]
    Quadrature,
    /// Closed forms: `Q`-function expressions for `l1`, linear rescaling
    /// for `l2sq` and `none`.
    ClosedForm,
}

/// `S(v)` using quadrature for every expectation.
pub fn system_map(v: &FixedPoint, spec: &ProblemSpec, rule: &QuadratureRule) -> Result<FixedPoint> {
    system_map_with(v, spec, rule, PenaltyRoute::Quadrature)
}

pub fn system_map_with(
    v: &FixedPoint,
    spec: &ProblemSpec,
    rule: &QuadratureRule,
    route: PenaltyRoute,
) -> Result<FixedPoint> {
    if !v.is_interior() {
        return Err(Error::Infeasible(format!("point outside the domain: {v:?}")));
    }
    let kappa = spec.kappa;
    let kappa_sq = kappa * kappa;

    let pen = penalty_side(v, spec, rule, route)?;
    let alpha = pen.beta_prox / kappa_sq;
    let gamma = pen.z_prox / (v.r * spec.delta.sqrt());
    let sigma = (pen.prox_sq - kappa_sq * alpha * alpha).max(SIGMA_SQ_FLOOR).sqrt();

    let link = link_moments(kappa, v.alpha, v.sigma, v.gamma, rule)?;
    let r_sq = 2.0 * link.residual_sq / (v.gamma * v.gamma);
    if !(r_sq > 0.0) {
        return Err(Error::Infeasible(format!("r² = {r_sq:e} is not positive")));
    }
    let theta = -2.0 * link.curvature_prox / v.gamma;
    let slack = link.slack;
    if !(slack > 0.0) {
        return Err(Error::Infeasible(format!(
            "slope expectation {} ≥ 1 makes tau nonpositive",
            link.slope
        )));
    }
    let tau = v.gamma / (v.sigma * slack);

    let out = FixedPoint::new(alpha, sigma, gamma, theta, tau, r_sq.sqrt());
    if !out.is_interior() {
        return Err(Error::Infeasible(format!("update left the domain: {out:?}")));
    }
    Ok(out)
}

fn penalty_side(
    v: &FixedPoint,
    spec: &ProblemSpec,
    rule: &QuadratureRule,
    route: PenaltyRoute,
) -> Result<PenaltyMoments> {
    match route {
        PenaltyRoute::Quadrature => {
            let args = PenaltyArgs {
                regularizer: spec.regularizer,
                lambda: spec.lambda,
                delta: spec.delta,
                sigma: v.sigma,
                tau: v.tau,
                theta: v.theta,
                r: v.r,
            };
            penalty_moments(&args, &spec.prior, rule)
        }
        PenaltyRoute::ClosedForm => match spec.regularizer {
            Regularizer::L1 => sparse_l1_closed_form(v, spec),
            Regularizer::L2Sq | Regularizer::None => Ok(linear_prox_moments(v, spec)),
        },
    }
}

/// Moments for proxes that are a rescaling `x / (1 + t)` (`t = 0` for
/// `none`): with `E[β²] = κ²` and `E[βZ] = 0` everything is explicit.
fn linear_prox_moments(v: &FixedPoint, spec: &ProblemSpec) -> PenaltyMoments {
    let st = v.sigma * v.tau;
    let shrink = match spec.regularizer {
        Regularizer::L2Sq => 1.0 + spec.lambda * st,
        _ => 1.0,
    };
    let c = st / shrink;
    let noise = v.r / spec.delta.sqrt();
    let kappa_sq = spec.kappa * spec.kappa;
    PenaltyMoments {
        beta_prox: c * v.theta * kappa_sq,
        z_prox: c * noise,
        prox_sq: c * c * (v.theta * v.theta * kappa_sq + noise * noise),
    }
}

/// First three expectations for the soft threshold under the
/// spike-and-slab prior, in terms of the normal tail `Q`.
///
/// With on-support scale `a₁ = √(r²/δ + θ²κ²/s)`, off-support scale
/// `a₀ = r/√δ` and thresholds `t_on = λ/a₁`, `t_off = λ/a₀`:
///
/// ```text
/// α / (2στ)            = θ Q(t_on)
/// δγ / (2στ)           = s Q(t_on) + (1 − s) Q(t_off)
/// (κ²α² + σ²)/(2σ²τ²)  = δγλ²/(2στ) + γr²/(2στ) + κ²θ² Q(t_on)
///                        − λ² (s φ(t_on)/t_on + (1 − s) φ(t_off)/t_off)
/// ```
///
/// Returned as the equivalent raw moments `E[βP]`, `E[ZP]`, `E[P²]`.
pub fn sparse_l1_closed_form(v: &FixedPoint, spec: &ProblemSpec) -> Result<PenaltyMoments> {
    if spec.regularizer != Regularizer::L1 || !(spec.lambda > 0.0) {
        return Err(Error::InvalidSpec("closed forms need the l1 penalty with lambda > 0".into()));
    }
    let s = spec.prior.sparsity();
    let (kappa, delta, lambda) = (spec.kappa, spec.delta, spec.lambda);
    let st = v.sigma * v.tau;
    let on_scale = (v.r * v.r / delta + v.theta * v.theta * kappa * kappa / s).sqrt();
    let off_scale = v.r / delta.sqrt();
    let t_on = lambda / on_scale;
    let t_off = lambda / off_scale;
    let q_on = q_function(t_on);
    let q_off = q_function(t_off);
    let off_mass = 1.0 - s;
    let (off_q, off_mills) = if off_mass > 0.0 {
        (off_mass * q_off, off_mass * normal_pdf(t_off) / t_off)
    } else {
        (0.0, 0.0)
    };

    let alpha = 2.0 * st * v.theta * q_on;
    let gamma = 2.0 * st / delta * (s * q_on + off_q);
    let rhs3 = delta * gamma * lambda * lambda / (2.0 * st) + gamma * v.r * v.r / (2.0 * st)
        + kappa * kappa * v.theta * v.theta * q_on
        - lambda * lambda * (s * normal_pdf(t_on) / t_on + off_mills);
    let prox_sq = 2.0 * st * st * rhs3;

    Ok(PenaltyMoments {
        beta_prox: kappa * kappa * alpha,
        z_prox: gamma * v.r * delta.sqrt(),
        prox_sq,
    })
}

/// `(θ, τ, r)` from `(α, σ, γ)` for the ridge penalty:
/// `θ = α/(γδ)`, `τ = δγ / (σ(1 − λδγ))`, `r = σ/(γ√δ)`.
pub fn l2_closed_form(alpha: f64, sigma: f64, gamma: f64, spec: &ProblemSpec) -> Result<(f64, f64, f64)> {
    let delta = spec.delta;
    let slack = 1.0 - spec.lambda * delta * gamma;
    if !(slack > 0.0) {
        return Err(Error::Infeasible(format!(
            "lambda·delta·gamma = {} ≥ 1 leaves tau undefined",
            spec.lambda * delta * gamma
        )));
    }
    let theta = alpha / (gamma * delta);
    let tau = delta * gamma / (sigma * slack);
    let r = sigma / (gamma * delta.sqrt());
    Ok((theta, tau, r))
}
