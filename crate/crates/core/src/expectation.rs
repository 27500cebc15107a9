//! Deterministic quadrature for the expectations of the asymptotic system.
//!
//! Two families of integrals appear:
//!
//! * over `(β, Z)` with `β ~ Π` independent of `Z ~ N(0, 1)`, through the
//!   penalty proximal operator (the first three equations);
//! * over independent `(Z₁, Z₂)`, through the proximal operator of the link
//!   (the last three).
//!
//! The sparse prior's point mass at zero is integrated exactly as a 1-D rule
//! over `Z`; it is never sampled. When the integrand has kinks in `Z` (soft
//! thresholding) the `Z` integral is split at the kinks and each smooth piece
//! gets its own Gauss–Legendre rule.

use crate::error::{Error, Result};
use crate::prox::{prox_rho_from, Regularizer};
use crate::scalar_math::{gauss_legendre, normal_pdf, rho_prime, rho_second, QuadratureRule};

/// Half-width of the truncated `Z` range used by kink-split integration.
/// `Q(12) ≈ 1.8e-33`, far below every tolerance in the crate.
const Z_TRUNCATION: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    /// `β ~ N(0, κ²)`
    Gaussian,
    /// `β = 0` with probability `1 − s`, else `N(0, κ²/s)`.
    Sparse { sparsity: f64 },
}

/// Distribution `Π` of the true coefficients. Both kinds have `E[β²] = κ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub kind: PriorKind,
    pub kappa: f64,
}

impl Prior {
    pub fn gaussian(kappa: f64) -> Self {
        Prior {
            kind: PriorKind::Gaussian,
            kappa,
        }
    }

    pub fn sparse(kappa: f64, sparsity: f64) -> Self {
        Prior {
            kind: PriorKind::Sparse { sparsity },
            kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidSpec(format!("kappa must be positive, got {}", self.kappa)));
        }
        if let PriorKind::Sparse { sparsity } = self.kind {
            if !(sparsity > 0.0 && sparsity <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "sparsity must lie in (0, 1], got {sparsity}"
                )));
            }
        }
        Ok(())
    }

    /// Fraction of nonzero coordinates.
    pub fn sparsity(&self) -> f64 {
        match self.kind {
            PriorKind::Gaussian => 1.0,
            PriorKind::Sparse { sparsity } => sparsity,
        }
    }

    /// Mixture components as `(mass, scale)`: `β = scale · U` with
    /// `U ~ N(0, 1)`. A zero scale is the point mass at the origin.
    pub fn components(&self) -> impl Iterator<Item = (f64, f64)> {
        let (first, second) = match self.kind {
            PriorKind::Gaussian => ((1.0, self.kappa), None),
            PriorKind::Sparse { sparsity } if sparsity >= 1.0 => ((1.0, self.kappa), None),
            PriorKind::Sparse { sparsity } => (
                (1.0 - sparsity, 0.0),
                Some((sparsity, self.kappa / sparsity.sqrt())),
            ),
        };
        std::iter::once(first).chain(second)
    }
}

/// `E[g(β, Z)]` by tensor Gauss–Hermite quadrature.
pub fn expect_prior_z<G>(g: G, prior: &Prior, rule: &QuadratureRule) -> f64
where
    G: Fn(f64, f64) -> f64,
{
    expect_prior_z_many(|b, z| [g(b, z)], prior, rule)[0]
}

/// Several integrands sharing one sweep over the nodes.
pub fn expect_prior_z_many<G, const N: usize>(g: G, prior: &Prior, rule: &QuadratureRule) -> [f64; N]
where
    G: Fn(f64, f64) -> [f64; N],
{
    let mut total = [0.0; N];
    for (mass, scale) in prior.components() {
        let mut part = [0.0; N];
        if scale == 0.0 {
            for (z, wz) in rule.iter() {
                accumulate(&mut part, wz, g(0.0, z));
            }
        } else {
            for (u, wu) in rule.iter() {
                let beta = scale * u;
                for (z, wz) in rule.iter() {
                    accumulate(&mut part, wu * wz, g(beta, z));
                }
            }
        }
        accumulate(&mut total, mass, part);
    }
    total
}

/// Direction `U = a_β·β + a_z·Z` along which an integrand may have kinks,
/// and the values of `U` where they sit.
#[derive(Debug, Clone, PartialEq)]
pub struct KinkLine {
    pub a_beta: f64,
    pub a_z: f64,
    pub kinks: Vec<f64>,
}

/// Like [`expect_prior_z_many`] for integrands that are smooth except where
/// `U = a_β·β + a_z·Z` crosses one of `line.kinks`.
///
/// Each Gaussian component is rotated so that `U` is a multiple of one
/// standard normal `W₁`; the orthogonal `W₂` integral uses `rule`, and the
/// `W₁` integral over `[-12, 12]` is split at the kinks, each piece
/// integrated with a Gauss–Legendre rule of order `2·rule.order` (capped
/// at 200) against the normal density.
pub fn expect_prior_z_kinked<G, const N: usize>(
    g: G,
    line: &KinkLine,
    prior: &Prior,
    rule: &QuadratureRule,
) -> Result<[f64; N]>
where
    G: Fn(f64, f64) -> [f64; N],
{
    let piece_rule = gauss_legendre((2 * rule.order).clamp(8, 200))?;
    // ∫ h(w) φ(w) dw over [-12, 12], split where `scale·w` hits a kink.
    let split = |scale: f64, h: &dyn Fn(f64) -> [f64; N]| -> [f64; N] {
        let mut cuts = vec![-Z_TRUNCATION];
        if scale != 0.0 {
            let mut ks: Vec<f64> = line
                .kinks
                .iter()
                .map(|k| k / scale)
                .filter(|k| k.is_finite() && k.abs() < Z_TRUNCATION)
                .collect();
            ks.sort_by(|a, b| a.total_cmp(b));
            cuts.extend(ks);
        }
        cuts.push(Z_TRUNCATION);
        let mut acc = [0.0; N];
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, wx) in piece_rule.iter() {
                let t = mid + half * x;
                accumulate(&mut acc, wx * half * normal_pdf(t), h(t));
            }
        }
        acc
    };

    let mut total = [0.0; N];
    for (mass, scale) in prior.components() {
        let part = if scale == 0.0 {
            split(line.a_z, &|z| g(0.0, z))
        } else {
            // β = scale·u; U = (a_β·scale)·u + a_z·z = norm·w₁.
            let (p, q) = (line.a_beta * scale, line.a_z);
            let norm = p.hypot(q);
            if norm == 0.0 {
                expect_prior_z_many(&g, &Prior::gaussian(scale), rule)
            } else {
                let (c, s) = (p / norm, q / norm);
                let mut part = [0.0; N];
                for (w2, ww) in rule.iter() {
                    let inner = split(norm, &|w1| {
                        let u = c * w1 - s * w2;
                        let z = s * w1 + c * w2;
                        g(scale * u, z)
                    });
                    accumulate(&mut part, ww, inner);
                }
                part
            }
        };
        accumulate(&mut total, mass, part);
    }
    Ok(total)
}

/// `E[g(Z₁, Z₂)]` for independent standard normals.
pub fn expect_z1z2<G>(g: G, rule: &QuadratureRule) -> f64
where
    G: Fn(f64, f64) -> f64,
{
    let mut total = 0.0;
    for (z1, w1) in rule.iter() {
        let mut row = 0.0;
        for (z2, w2) in rule.iter() {
            row += w2 * g(z1, z2);
        }
        total += w1 * row;
    }
    total
}

fn accumulate<const N: usize>(acc: &mut [f64; N], weight: f64, values: [f64; N]) {
    for (a, v) in acc.iter_mut().zip(values) {
        *a += weight * v;
    }
}

/// Expectations through the penalty prox, at
/// `P = prox_{λστ f̃}(στ(θβ + (r/√δ) Z))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyMoments {
    /// `E[β P]`
    pub beta_prox: f64,
    /// `E[Z P]`
    pub z_prox: f64,
    /// `E[P²]`
    pub prox_sq: f64,
}

/// Scalars entering the penalty-side expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyArgs {
    pub regularizer: Regularizer,
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub r: f64,
}

impl PenaltyArgs {
    fn scale(&self) -> f64 {
        self.sigma * self.tau
    }

    fn noise(&self) -> f64 {
        self.r / self.delta.sqrt()
    }

    /// The prox argument and threshold for one `(β, Z)` node.
    pub fn prox_at(&self, beta: f64, z: f64) -> f64 {
        let st = self.scale();
        self.regularizer
            .prox(st * (self.theta * beta + self.noise() * z), self.lambda * st)
    }
}

/// Quadrature route for the first three equations. Kinked penalties are
/// split at their kinks so the result is accurate to the rule's precision.
pub fn penalty_moments(args: &PenaltyArgs, prior: &Prior, rule: &QuadratureRule) -> Result<PenaltyMoments> {
    let g = |beta: f64, z: f64| {
        let p = args.prox_at(beta, z);
        [beta * p, z * p, p * p]
    };
    let [beta_prox, z_prox, prox_sq] = match args.regularizer {
        Regularizer::L1 if args.lambda > 0.0 => {
            // The soft threshold bends where θβ + noise·Z = ±λ.
            let line = KinkLine {
                a_beta: args.theta,
                a_z: args.noise(),
                kinks: vec![-args.lambda, args.lambda],
            };
            expect_prior_z_kinked(g, &line, prior, rule)?
        }
        _ => expect_prior_z_many(g, prior, rule),
    };
    Ok(PenaltyMoments {
        beta_prox,
        z_prox,
        prox_sq,
    })
}

/// Expectations through the link prox at `X = κα Z₁ + σ Z₂`,
/// `P = prox_{γρ}(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMoments {
    /// `E[ρ'(−κZ₁)(X − P)²]`
    pub residual_sq: f64,
    /// `E[ρ''(−κZ₁) P]`
    pub curvature_prox: f64,
    /// `E[2ρ'(−κZ₁) / (1 + γρ''(P))]`
    pub slope: f64,
    /// `1 − slope`, accumulated as `E[2ρ'(−κZ₁) γρ''(P) / (1 + γρ''(P))]`
    /// so it keeps full relative precision when the slope is close to one.
    pub slack: f64,
}

/// Tensor quadrature over `(Z₁, Z₂)`. For each `Z₁` node the `Z₂` nodes are
/// swept in increasing order so `X` increases and each prox solve starts
/// from its neighbour's solution.
pub fn link_moments(kappa: f64, alpha: f64, sigma: f64, gamma: f64, rule: &QuadratureRule) -> Result<LinkMoments> {
    let mut residual_sq = 0.0;
    let mut curvature_prox = 0.0;
    let mut slope = 0.0;
    let mut slack = 0.0;
    for (z1, w1) in rule.iter() {
        let label_weight = rho_prime(-kappa * z1);
        let curvature = rho_second(-kappa * z1);
        let (mut a, mut b, mut c, mut e) = (0.0, 0.0, 0.0, 0.0);
        let mut guess = f64::NAN;
        for (z2, w2) in rule.iter() {
            let x = kappa * alpha * z1 + sigma * z2;
            let p = prox_rho_from(x, gamma, guess)?;
            guess = p;
            let d = x - p;
            a += w2 * d * d;
            b += w2 * p;
            let gc = gamma * rho_second(p);
            c += w2 / (1.0 + gc);
            e += w2 * gc / (1.0 + gc);
        }
        residual_sq += w1 * label_weight * a;
        curvature_prox += w1 * curvature * b;
        slope += w1 * 2.0 * label_weight * c;
        slack += w1 * 2.0 * label_weight * e;
    }
    Ok(LinkMoments {
        residual_sq,
        curvature_prox,
        slope,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_math::gauss_hermite;
    use approx::assert_abs_diff_eq;

    #[test]
    fn prior_second_moments() {
        let rule = gauss_hermite(80).unwrap();
        let g = Prior::gaussian(1.0);
        assert_abs_diff_eq!(expect_prior_z(|b, _| b * b, &g, &rule), 1.0, epsilon = 1e-12);
        let s = Prior::sparse(1.0, 0.25);
        assert_abs_diff_eq!(expect_prior_z(|b, _| b * b, &s, &rule), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expect_prior_z(|b, z| b * z, &s, &rule), 0.0, epsilon = 1e-14);
        let k = Prior::gaussian(2.5);
        assert_abs_diff_eq!(expect_prior_z(|b, _| b * b, &k, &rule), 6.25, epsilon = 1e-11);
    }

    #[test]
    fn z1z2_examples() {
        let rule = gauss_hermite(80).unwrap();
        assert_abs_diff_eq!(expect_z1z2(|z1, _| rho_prime(-z1), &rule), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(expect_z1z2(|z1, z2| z1 * z2, &rule), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(expect_z1z2(|_, z2| z2 * z2, &rule), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sparse_prior_limits_to_gaussian() {
        let rule = gauss_hermite(80).unwrap();
        let g = |b: f64, z: f64| (0.7 * b + 0.3 * z).abs().powf(1.5) + (b - z).cos();
        let gauss = expect_prior_z(g, &Prior::gaussian(1.3), &rule);
        assert_eq!(expect_prior_z(g, &Prior::sparse(1.3, 1.0), &rule), gauss);
        let near = expect_prior_z(g, &Prior::sparse(1.3, 0.999), &rule);
        assert!((near - gauss).abs() < 1e-3);
    }

    #[test]
    fn kink_split_matches_smooth_rule_on_smooth_integrand() {
        let rule = gauss_hermite(80).unwrap();
        let prior = Prior::sparse(1.0, 0.3);
        let g = |b: f64, z: f64| [b * b * z * z, (b + z).sin().powi(2)];
        let smooth = expect_prior_z_many(g, &prior, &rule);
        let line = KinkLine {
            a_beta: 0.8,
            a_z: -0.5,
            kinks: vec![-0.4, 1.7],
        };
        let split = expect_prior_z_kinked(g, &line, &prior, &rule).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(smooth[i], split[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn kink_split_handles_abs_exactly() {
        // E|Z| = √(2/π)
        let rule = gauss_hermite(40).unwrap();
        let prior = Prior::sparse(1.0, 0.5);
        let line = KinkLine {
            a_beta: 0.0,
            a_z: 1.0,
            kinks: vec![0.0],
        };
        let [v] = expect_prior_z_kinked(|_, z| [z.abs()], &line, &prior, &rule).unwrap();
        assert_abs_diff_eq!(v, (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn link_moments_match_generic_tensor_rule() {
        let rule = gauss_hermite(40).unwrap();
        let (kappa, alpha, sigma, gamma) = (1.0, 0.7, 0.9, 1.3);
        let lm = link_moments(kappa, alpha, sigma, gamma, &rule).unwrap();
        let p = |z1: f64, z2: f64| crate::prox::prox_rho(kappa * alpha * z1 + sigma * z2, gamma).unwrap();
        let a = expect_z1z2(
            |z1, z2| {
                let x = kappa * alpha * z1 + sigma * z2;
                rho_prime(-kappa * z1) * (x - p(z1, z2)).powi(2)
            },
            &rule,
        );
        let b = expect_z1z2(|z1, z2| rho_second(-kappa * z1) * p(z1, z2), &rule);
        assert_abs_diff_eq!(lm.residual_sq, a, epsilon = 1e-13);
        assert_abs_diff_eq!(lm.curvature_prox, b, epsilon = 1e-13);
        assert!(lm.slope > 0.0 && lm.slope < 1.0);
        assert_abs_diff_eq!(lm.slope + lm.slack, 1.0, epsilon = 1e-14);
    }
}
