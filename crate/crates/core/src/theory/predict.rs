use crate::error::{Error, Result};
use crate::expectation::{expect_prior_z_kinked, expect_prior_z_many, KinkLine, PenaltyArgs, PriorKind};
use crate::prox::Regularizer;
use crate::scalar_math::{gauss_hermite, q_function, QuadratureRule};

use super::solver::{solve_fixed_point, Solution};
use super::{FixedPoint, ProblemSpec, SolverKnobs};

/// Limiting false-alarm and misdetection rates of the support estimate
/// `{j : |β̂_j| > ε}` as `ε → 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRecoveryPrediction {
    /// `λ / (r/√δ)`
    pub t_offsupport: f64,
    /// `λ / √(r²/δ + θ²κ²/s)`
    pub t_onsupport: f64,
    /// `P(j ∈ Ω̂ | j ∉ Ω) = 2Q(t_offsupport)`
    pub e1: f64,
    /// `P(j ∉ Ω̂ | j ∈ Ω) = 1 − 2Q(t_onsupport)`
    pub e2: f64,
}

/// Asymptotic performance read off a solved fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryReport {
    pub fixed_point: FixedPoint,
    /// `ᾱ`, the limit of `β̂ᵀβ*/‖β*‖²`.
    pub correlation: f64,
    /// `σ̄²`
    pub variance: f64,
    /// `E[(Γ(β, Z) − β)²]`
    pub mse_raw: f64,
    /// `σ̄² / ᾱ²`, the per-coordinate error of `β̂/ᾱ`.
    pub mse_debiased: f64,
    pub support: Option<SupportRecoveryPrediction>,
    pub residual: f64,
    pub converged: bool,
}

/// `Γ(β, z) = prox_{λστ f̃}(στ(θβ + (r/√δ)z))`, the limiting law of one
/// coordinate of `β̂` given the matching coordinate of `β*`.
pub fn gamma_map(beta: f64, z: f64, v: &FixedPoint, spec: &ProblemSpec) -> f64 {
    penalty_args(v, spec).prox_at(beta, z)
}

fn penalty_args(v: &FixedPoint, spec: &ProblemSpec) -> PenaltyArgs {
    PenaltyArgs {
        regularizer: spec.regularizer,
        lambda: spec.lambda,
        delta: spec.delta,
        sigma: v.sigma,
        tau: v.tau,
        theta: v.theta,
        r: v.r,
    }
}

/// `E[Ψ(Γ(β, Z), β)]` with `β ~ Π` and `Z ~ N(0, 1)` independent.
pub fn predict_functional<F>(psi: F, v: &FixedPoint, spec: &ProblemSpec, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let args = penalty_args(v, spec);
    let g = |beta: f64, z: f64| [psi(args.prox_at(beta, z), beta)];
    let [value] = match spec.regularizer {
        Regularizer::L1 if spec.lambda > 0.0 => {
            let line = KinkLine {
                a_beta: v.theta,
                a_z: v.r / spec.delta.sqrt(),
                kinks: vec![-spec.lambda, spec.lambda],
            };
            expect_prior_z_kinked(g, &line, &spec.prior, rule)?
        }
        _ => expect_prior_z_many(g, &spec.prior, rule),
    };
    Ok(value)
}

/// Support-recovery rates; only meaningful for the `l1` penalty on a
/// sparse prior.
pub fn predict_support_recovery(v: &FixedPoint, spec: &ProblemSpec) -> Result<SupportRecoveryPrediction> {
    let PriorKind::Sparse { sparsity } = spec.prior.kind else {
        return Err(Error::InvalidSpec("support recovery needs the sparse prior".into()));
    };
    if spec.regularizer != Regularizer::L1 || !(spec.lambda > 0.0) {
        return Err(Error::InvalidSpec("support recovery needs the l1 penalty with lambda > 0".into()));
    }
    let (kappa, delta, lambda) = (spec.kappa, spec.delta, spec.lambda);
    let t_offsupport = lambda / (v.r / delta.sqrt());
    let t_onsupport = lambda / (v.r * v.r / delta + v.theta * v.theta * kappa * kappa / sparsity).sqrt();
    Ok(SupportRecoveryPrediction {
        t_offsupport,
        t_onsupport,
        e1: 2.0 * q_function(t_offsupport),
        // 1 − 2Q(t) = erf(t/√2), which keeps precision for small t
        e2: libm::erf(t_onsupport / std::f64::consts::SQRT_2),
    })
}

/// Solve and summarize.
pub fn predict(spec: &ProblemSpec, knobs: &SolverKnobs) -> Result<TheoryReport> {
    let solution = solve_fixed_point(spec, knobs)?;
    let rule = gauss_hermite(knobs.quad_order)?;
    report_from_solution(&solution, spec, &rule)
}

pub fn report_from_solution(solution: &Solution, spec: &ProblemSpec, rule: &QuadratureRule) -> Result<TheoryReport> {
    let v = solution.point;
    let mse_raw = predict_functional(|u, b| (u - b) * (u - b), &v, spec, rule)?;
    let variance = v.sigma * v.sigma;
    let mse_debiased = if v.alpha != 0.0 {
        variance / (v.alpha * v.alpha)
    } else {
        f64::INFINITY
    };
    let support = match (spec.prior.kind, spec.regularizer) {
        (PriorKind::Sparse { .. }, Regularizer::L1) => Some(predict_support_recovery(&v, spec)?),
        _ => None,
    };
    Ok(TheoryReport {
        fixed_point: v,
        correlation: v.alpha,
        variance,
        mse_raw,
        mse_debiased,
        support,
        residual: solution.residual,
        converged: solution.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse_l1(delta: f64, lambda: f64) -> ProblemSpec {
        ProblemSpec::new(1.0, delta, lambda, Regularizer::L1, PriorKind::Sparse { sparsity: 0.25 }).unwrap()
    }

    #[test]
    fn gamma_map_examples() {
        let v = FixedPoint::new(0.3, 0.5, 0.4, 0.2, 6.0, 0.45);
        let spec = ProblemSpec::new(1.0, 4.0, 0.5, Regularizer::L2Sq, PriorKind::Gaussian).unwrap();
        let st = v.sigma * v.tau;
        let expected = |b: f64, z: f64| st * (v.theta * b + v.r / 2.0 * z) / (1.0 + 0.5 * st);
        for (b, z) in [(1.0, 0.0), (0.0, 1.0), (-0.7, 2.3)] {
            assert!((gamma_map(b, z, &v, &spec) - expected(b, z)).abs() < 1e-14);
        }

        let none = ProblemSpec::new(1.0, 4.0, 0.0, Regularizer::None, PriorKind::Gaussian).unwrap();
        assert!((gamma_map(0.7, -0.2, &v, &none) - st * (v.theta * 0.7 - v.r / 2.0 * 0.2)).abs() < 1e-14);

        let heavy = sparse_l1(4.0, 50.0);
        assert_eq!(gamma_map(0.3, 0.1, &v, &heavy), 0.0);
    }

    #[test]
    fn functional_examples() {
        let rule = gauss_hermite(80).unwrap();
        for spec in [
            ProblemSpec::new(1.0, 4.0, 0.5, Regularizer::L2Sq, PriorKind::Gaussian).unwrap(),
            sparse_l1(4.0, 0.8),
        ] {
            let report = predict(&spec, &SolverKnobs::default()).unwrap();
            let v = report.fixed_point;
            let one = predict_functional(|_, _| 1.0, &v, &spec, &rule).unwrap();
            assert!((one - 1.0).abs() < 1e-12);
            let corr = predict_functional(|u, b| u * b, &v, &spec, &rule).unwrap();
            assert!((corr - v.alpha).abs() < 1e-9, "{corr} vs {}", v.alpha);
            let var = predict_functional(|u, b| (u - v.alpha * b).powi(2), &v, &spec, &rule).unwrap();
            assert!((var - v.sigma * v.sigma).abs() < 1e-9);
            let second = predict_functional(|u, _| u * u, &v, &spec, &rule).unwrap();
            assert!((second - v.alpha * v.alpha - v.sigma * v.sigma).abs() < 1e-9);
        }
    }

    #[test]
    fn report_fields_are_consistent() {
        let spec = sparse_l1(2.0, 0.4);
        let report = predict(&spec, &SolverKnobs::default()).unwrap();
        assert!(report.converged);
        let v = report.fixed_point;
        assert_eq!(report.correlation, v.alpha);
        assert!((report.mse_debiased - report.variance / (v.alpha * v.alpha)).abs() < 1e-15);
        // E[(Γ − β)²] = σ² + κ²(1 − α)² at the fixed point.
        assert!((report.mse_raw - report.variance - (1.0 - v.alpha).powi(2)).abs() < 1e-8);
        let support = report.support.expect("sparse l1 reports support recovery");
        assert!(support.e1 > 0.0 && support.e1 < 1.0);
        assert!(support.e2 > 0.0 && support.e2 < 1.0);

        let ridge = ProblemSpec::new(1.0, 2.0, 0.4, Regularizer::L2Sq, PriorKind::Gaussian).unwrap();
        assert!(predict(&ridge, &SolverKnobs::default()).unwrap().support.is_none());
    }

    #[test]
    fn support_recovery_limits() {
        let v = FixedPoint::new(0.3, 0.5, 0.4, 0.2, 6.0, 0.45);
        let tiny = predict_support_recovery(&v, &sparse_l1(4.0, 1e-12)).unwrap();
        assert!((tiny.e1 - 1.0).abs() < 1e-10);
        assert!(tiny.e2 < 1e-10);

        // Both thresholds at least 8.
        let big = predict_support_recovery(&v, &sparse_l1(4.0, 10.0)).unwrap();
        assert!(big.t_offsupport >= 8.0 && big.t_onsupport >= 8.0);
        assert!(big.e1 < 1e-14);
        assert!(big.e2 > 1.0 - 1e-13);

        let gaussian = ProblemSpec::new(1.0, 4.0, 0.5, Regularizer::L1, PriorKind::Gaussian).unwrap();
        assert!(predict_support_recovery(&v, &gaussian).is_err());
    }

    #[test]
    fn false_alarms_fall_with_lambda() {
        let knobs = SolverKnobs::default();
        let e1: Vec<f64> = [0.2, 0.4, 0.8]
            .iter()
            .map(|&l| predict(&sparse_l1(4.0, l), &knobs).unwrap().support.unwrap().e1)
            .collect();
        assert!(e1.windows(2).all(|w| w[1] < w[0]), "{e1:?}");
    }
}
