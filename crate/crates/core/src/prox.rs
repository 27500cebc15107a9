//! Scalar proximal operators and Moreau envelopes.
//!
//! `prox_f(x, t) = argmin_y f(y) + (y − x)² / (2t)` and the Moreau envelope is
//! the attained minimum.

use crate::error::{Error, Result};
use crate::scalar_math::{rho, rho_prime, rho_second};

const PROX_RHO_TOL: f64 = 1e-12;
const PROX_RHO_MAX_ITER: usize = 100;

/// Separable penalty `f(w) = Σ f̃(w_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularizer {
    /// `f̃ = 0`
    None,
    /// `f̃(w) = |w|`
    L1,
    /// `f̃(w) = w² / 2`
    L2Sq,
}

impl Regularizer {
    pub fn value(self, w: f64) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::L1 => w.abs(),
            Regularizer::L2Sq => 0.5 * w * w,
        }
    }

    pub fn prox(self, x: f64, t: f64) -> f64 {
        match self {
            Regularizer::None => x,
            Regularizer::L1 => prox_l1(x, t),
            Regularizer::L2Sq => prox_l2sq(x, t),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::L1 => "l1",
            Regularizer::L2Sq => "l2sq",
        }
    }
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Regularizer::None),
            "l1" => Ok(Regularizer::L1),
            "l2sq" | "l2" => Ok(Regularizer::L2Sq),
            other => Err(Error::InvalidSpec(format!(
                "unknown regularizer `{other}` (expected none, l1 or l2sq)"
            ))),
        }
    }
}

/// Soft threshold `sign(x)·max(|x| − t, 0)`.
pub fn prox_l1(x: f64, t: f64) -> f64 {
    let mag = x.abs() - t;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

pub fn prox_l2sq(x: f64, t: f64) -> f64 {
    x / (1.0 + t)
}

/// Solves `z + t·ρ'(z) = x` by Newton steps safeguarded to the bracket
/// `[x − t, x]`.
pub fn prox_rho(x: f64, t: f64) -> Result<f64> {
    prox_rho_from(x, t, x - 0.5 * t)
}

/// [`prox_rho`] seeded with a starting guess, used for warm starts across
/// neighbouring quadrature nodes.
pub fn prox_rho_from(x: f64, t: f64, guess: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(x);
    }
    if !(x.is_finite() && t.is_finite() && t > 0.0) {
        return Err(Error::ProxNonConvergence { x, t });
    }
    let (mut lo, mut hi) = (x - t, x);
    let mut z = if guess > lo && guess < hi { guess } else { x - 0.5 * t };
    let tol = PROX_RHO_TOL * x.abs().max(1.0);
    for _ in 0..PROX_RHO_MAX_ITER {
        let resid = z + t * rho_prime(z) - x;
        if resid.abs() <= tol {
            // one more quadratic step takes the root to working precision
            let polished = z - resid / (1.0 + t * rho_second(z));
            return Ok(if polished >= lo && polished <= hi { polished } else { z });
        }
        if resid > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let newton = z - resid / (1.0 + t * rho_second(z));
        z = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * z.abs().max(1.0) {
            return Ok(z);
        }
    }
    Err(Error::ProxNonConvergence { x, t })
}

/// `d/dx prox_{tρ}(x) = 1 / (1 + t ρ''(prox))`.
pub fn prox_rho_derivative(x: f64, t: f64) -> Result<f64> {
    let p = prox_rho(x, t)?;
    Ok(1.0 / (1.0 + t * rho_second(p)))
}

/// Function whose Moreau envelope is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    Penalty(Regularizer),
    Link,
}

impl From<Regularizer> for Envelope {
    fn from(r: Regularizer) -> Self {
        Envelope::Penalty(r)
    }
}

impl Envelope {
    pub fn prox(self, x: f64, t: f64) -> Result<f64> {
        match self {
            Envelope::Penalty(r) => Ok(r.prox(x, t)),
            Envelope::Link => prox_rho(x, t),
        }
    }

    fn value(self, z: f64) -> f64 {
        match self {
            Envelope::Penalty(r) => r.value(z),
            Envelope::Link => rho(z),
        }
    }
}

/// `M_f(x, t) = f(p) + (x − p)² / (2t)` with `p = prox_{tf}(x)`.
pub fn moreau_envelope(f: impl Into<Envelope>, x: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidSpec(format!("Moreau envelope needs t > 0, got {t}")));
    }
    let f = f.into();
    let p = f.prox(x, t)?;
    Ok(f.value(p) + (x - p) * (x - p) / (2.0 * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Bisection on the strictly increasing `z + tρ'(z) − x`.
    fn bisect_prox_rho(x: f64, t: f64) -> f64 {
        let (mut lo, mut hi) = (x - t - 1.0, x + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + t * rho_prime(mid) - x > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(prox_l1(0.5, 1.0), 0.0);
        assert_eq!(prox_l1(3.0, 1.0), 2.0);
        assert_eq!(prox_l1(-3.0, 1.0), -2.0);
        assert_eq!(prox_l1(-0.7, 1.0), 0.0);
    }

    #[test]
    fn ridge_examples() {
        assert_eq!(prox_l2sq(4.0, 1.0), 2.0);
        assert_eq!(prox_l2sq(-7.3, 0.0), -7.3);
        assert_eq!(prox_l2sq(0.0, 5.0), 0.0);
    }

    #[test]
    fn prox_rho_examples() {
        assert_eq!(prox_rho(2.5, 0.0).unwrap(), 2.5);
        let oracle = bisect_prox_rho(0.0, 1.0);
        assert_abs_diff_eq!(oracle, -0.40106, epsilon = 1e-5);
        assert_abs_diff_eq!(prox_rho(0.0, 1.0).unwrap(), oracle, epsilon = 1e-12);
        let mirrored = bisect_prox_rho(1.0, 1.0);
        assert_abs_diff_eq!(mirrored, 0.40106, epsilon = 1e-5);
        assert_abs_diff_eq!(prox_rho(1.0, 1.0).unwrap(), mirrored, epsilon = 1e-12);
        assert_abs_diff_eq!(prox_rho(1.0, 1.0).unwrap(), -prox_rho(0.0, 1.0).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn prox_rho_extreme_arguments() {
        for &(x, t) in &[(700.0, 3.0), (-700.0, 3.0), (50.0, 1e4), (-1e3, 1e-8), (0.3, 1e6)] {
            let z = prox_rho(x, t).unwrap();
            assert!(z >= x - t && z <= x);
            assert!((z + t * rho_prime(z) - x).abs() <= 1e-12 * x.abs().max(1.0) * 10.0);
        }
        assert!(prox_rho(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn prox_rho_derivative_examples() {
        assert_eq!(prox_rho_derivative(3.3, 0.0).unwrap(), 1.0);
        let p = bisect_prox_rho(0.0, 1.0);
        assert_abs_diff_eq!(
            prox_rho_derivative(0.0, 1.0).unwrap(),
            1.0 / (1.0 + rho_second(p)),
            epsilon = 1e-12
        );
        let h = 1e-5;
        let fd = (prox_rho(1.3 + h, 0.7).unwrap() - prox_rho(1.3 - h, 0.7).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(prox_rho_derivative(1.3, 0.7).unwrap(), fd, epsilon = 1e-6);
    }

    #[test]
    fn envelope_examples() {
        assert_abs_diff_eq!(moreau_envelope(Regularizer::L1, 0.5, 1.0).unwrap(), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(moreau_envelope(Regularizer::L2Sq, 4.0, 1.0).unwrap(), 4.0, epsilon = 1e-15);
        assert_eq!(moreau_envelope(Regularizer::None, 17.0, 0.3).unwrap(), 0.0);
        assert!(moreau_envelope(Envelope::Link, 1.0, 0.0).is_err());
    }

    #[test]
    fn parses_regularizer_names() {
        assert_eq!("L1".parse::<Regularizer>().unwrap(), Regularizer::L1);
        assert_eq!("l2sq".parse::<Regularizer>().unwrap(), Regularizer::L2Sq);
        assert!("elastic".parse::<Regularizer>().is_err());
    }

    proptest! {
        #[test]
        fn prox_first_order_optimality(x in -10.0f64..10.0, t in 1e-3f64..5.0) {
            let p = prox_l1(x, t);
            // (x − p)/t ∈ ∂|p|
            let g = (x - p) / t;
            if p != 0.0 {
                prop_assert!((g - p.signum()).abs() < 1e-10);
            } else {
                prop_assert!(g.abs() <= 1.0 + 1e-12);
            }
            let q = prox_l2sq(x, t);
            prop_assert!((q + (q - x) / t).abs() < 1e-10);
            let z = prox_rho(x, t).unwrap();
            prop_assert!((rho_prime(z) + (z - x) / t).abs() < 1e-10);
            prop_assert!(z > x - t && z < x);
        }

        #[test]
        fn prox_rho_reflection_identity(x in -10.0f64..10.0, t in 1e-3f64..5.0) {
            let lhs = prox_rho(x + t, t).unwrap();
            let rhs = -prox_rho(-x, t).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn proxes_are_nonexpansive(x in -10.0f64..10.0, y in -10.0f64..10.0, t in 1e-3f64..5.0) {
            let d = (x - y).abs() + 1e-12;
            prop_assert!((prox_l1(x, t) - prox_l1(y, t)).abs() <= d);
            prop_assert!((prox_l2sq(x, t) - prox_l2sq(y, t)).abs() <= d);
            prop_assert!((prox_rho(x, t).unwrap() - prox_rho(y, t).unwrap()).abs() <= d);
        }

        #[test]
        fn moreau_partials_match_finite_differences(x in -5.0f64..5.0, t in 0.2f64..3.0) {
            let h = 1e-5;
            for f in [Envelope::Link, Envelope::Penalty(Regularizer::L2Sq), Envelope::Penalty(Regularizer::L1)] {
                let p = f.prox(x, t).unwrap();
                let dx = (moreau_envelope(f, x + h, t).unwrap() - moreau_envelope(f, x - h, t).unwrap()) / (2.0 * h);
                let dt = (moreau_envelope(f, x, t + h).unwrap() - moreau_envelope(f, x, t - h).unwrap()) / (2.0 * h);
                prop_assert!((dx - (x - p) / t).abs() < 1e-5);
                prop_assert!((dt + (x - p) * (x - p) / (2.0 * t * t)).abs() < 1e-5);
            }
        }
    }
}
