//! Gauss rules from the Golub–Welsch construction.
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of the
//! orthogonal-polynomial family, refined by Newton steps on the three-term
//! recurrence. Weights come from the Christoffel function
//! `w_i = 1 / Σ_k ψ_k(x_i)²`, which equals the squared first eigenvector
//! component but stays accurate for tiny tail weights.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 200;

/// Nodes and weights of an `order`-point Gauss rule.
///
/// For [`gauss_hermite`] the weights are normalised against the standard
/// normal measure, so `Σ w_i g(x_i) ≈ E[g(Z)]`. For [`gauss_legendre`] they
/// integrate against Lebesgue measure on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// `Σ w_i g(x_i)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Hermite,
    Legendre,
}

impl Family {
    /// Off-diagonal Jacobi entry coupling degrees `k-1` and `k` (k ≥ 1).
    fn offdiag(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Family::Hermite => k.sqrt(),
            Family::Legendre => k / (4.0 * k * k - 1.0).sqrt(),
        }
    }

    fn mass(self) -> f64 {
        match self {
            Family::Hermite => 1.0,
            Family::Legendre => 2.0,
        }
    }
}

type Cache = Mutex<HashMap<(Family, usize), Arc<QuadratureRule>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(family: Family, order: usize) -> Result<Arc<QuadratureRule>> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(Error::QuadratureOrder(order));
    }
    let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
    Ok(map
        .entry((family, order))
        .or_insert_with(|| Arc::new(build(family, order)))
        .clone())
}

/// Gauss–Hermite rule for the standard normal measure. Exact for
/// polynomials of degree `≤ 2·order − 1`.
pub fn gauss_hermite(order: usize) -> Result<Arc<QuadratureRule>> {
    cached(Family::Hermite, order)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Result<Arc<QuadratureRule>> {
    cached(Family::Legendre, order)
}

fn build(family: Family, n: usize) -> QuadratureRule {
    let mut diag = vec![0.0; n];
    let mut off: Vec<f64> = (1..n).map(|k| family.offdiag(k)).collect();
    off.push(0.0);
    tridiagonal_eigenvalues(&mut diag, &mut off);
    diag.sort_by(|a, b| a.total_cmp(b));

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &x0 in &diag {
        let mut x = x0;
        for _ in 0..3 {
            let (psi_n, dpsi_n, _) = recurrence(family, n, x);
            if dpsi_n == 0.0 {
                break;
            }
            let step = psi_n / dpsi_n;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, christoffel) = recurrence(family, n, x);
        nodes.push(x);
        weights.push(1.0 / christoffel);
    }
    // exact symmetry of the even weight functions
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule {
        nodes,
        weights,
        order: n,
    }
}

/// Evaluates the orthonormal polynomial `ψ_n(x)`, its derivative, and
/// `Σ_{k<n} ψ_k(x)²`.
fn recurrence(family: Family, n: usize, x: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0 / family.mass().sqrt();
    let mut d_prev = 0.0;
    let mut d = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += p * p;
        let b_next = family.offdiag(k + 1);
        let b_cur = if k == 0 { 0.0 } else { family.offdiag(k) };
        let p_next = (x * p - b_cur * p_prev) / b_next;
        let d_next = (p + x * d - b_cur * d_prev) / b_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d, sum_sq)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// `d` holds the diagonal and is overwritten by the eigenvalues; `e[i]`
/// couples rows `i` and `i + 1`.
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_math::rho_prime;
    use approx::assert_abs_diff_eq;

    fn double_factorial_odd(k: u32) -> f64 {
        (1..=k).step_by(2).map(f64::from).product()
    }

    #[test]
    fn rejects_out_of_range_orders() {
        assert_eq!(gauss_hermite(1).unwrap_err(), Error::QuadratureOrder(1));
        assert_eq!(gauss_hermite(201).unwrap_err(), Error::QuadratureOrder(201));
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn hermite_structure() {
        for &n in &[2usize, 3, 10, 80, 150, 200] {
            let rule = gauss_hermite(n).unwrap();
            assert_eq!(rule.order, n);
            assert_eq!(rule.nodes.len(), n);
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_moments_exact() {
        for &n in &[2usize, 5, 20, 80] {
            let rule = gauss_hermite(n).unwrap();
            for deg in 0..(2 * n).min(24) as u32 {
                let got = rule.integrate(|x| x.powi(deg as i32));
                let (want, scale) = if deg % 2 == 1 {
                    (0.0, double_factorial_odd(deg))
                } else {
                    let m = double_factorial_odd(deg.saturating_sub(1));
                    (m, m)
                };
                let tol = 1e-10 * scale.max(1.0);
                assert!((got - want).abs() <= tol, "n={n} deg={deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn second_moment_and_logistic_mean() {
        let rule = gauss_hermite(80).unwrap();
        assert_abs_diff_eq!(rule.integrate(|z| z * z), 1.0, epsilon = 1e-12);
        for &kappa in &[0.3, 1.0, 2.0, 5.0] {
            assert_abs_diff_eq!(rule.integrate(|z| rho_prime(kappa * z)), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(40).unwrap();
        assert_abs_diff_eq!(rule.integrate(|_| 1.0), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.integrate(|x| x.powi(10)), 2.0 / 11.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.integrate(|x| x.exp()), 1f64.exp() - (-1f64).exp(), epsilon = 1e-14);
    }
}
