use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SOFTPLUS_BRANCH: f64 = 30.0;

/// Logistic link `ρ(z) = log(1 + e^z)`.
pub fn rho(z: f64) -> f64 {
    if z > SOFTPLUS_BRANCH {
        z + (-z).exp()
    } else if z < -SOFTPLUS_BRANCH {
        z.exp()
    } else {
        z.max(0.0) + (-z.abs()).exp().ln_1p()
    }
}

/// Standard logistic function, `ρ'(z) = e^z / (1 + e^z)`.
pub fn rho_prime(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ρ''(z) = ρ'(z) ρ'(-z)`, bounded by 1/4.
pub fn rho_second(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Standard normal tail probability `Q(t) = P(Z > t)`.
pub fn q_function(t: f64) -> f64 {
    0.5 * libm::erfc(t * FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trapezoid_tail(t: f64) -> f64 {
        // ∫_t^{t+40} φ, fine grid
        let n = 400_000;
        let h = 40.0 / n as f64;
        let mut acc = 0.5 * (normal_pdf(t) + normal_pdf(t + 40.0));
        for i in 1..n {
            acc += normal_pdf(t + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn rho_known_values() {
        assert_abs_diff_eq!(rho(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_prime(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_second(0.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_prime(-3.7) + rho_prime(3.7), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rho_is_overflow_safe() {
        for &z in &[-700.0, -100.0, -30.5, 30.5, 100.0, 700.0] {
            assert!(rho(z).is_finite() && rho(z) >= 0.0);
            assert!(rho_prime(z).is_finite());
            assert!(rho_second(z).is_finite() && rho_second(z) >= 0.0);
        }
        assert_abs_diff_eq!(rho(700.0), 700.0, epsilon = 1e-12);
        // branch continuity
        for &z in &[-SOFTPLUS_BRANCH, SOFTPLUS_BRANCH] {
            let lo = rho(z - 1e-9);
            let hi = rho(z + 1e-9);
            assert!((lo - hi).abs() < 1e-8);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        let mut z = -20.0;
        while z <= 20.0 {
            let fd1 = (rho(z + h) - rho(z - h)) / (2.0 * h);
            let fd2 = (rho_prime(z + h) - rho_prime(z - h)) / (2.0 * h);
            assert!((fd1 - rho_prime(z)).abs() < 1e-6, "rho' at {z}");
            assert!((fd2 - rho_second(z)).abs() < 1e-6, "rho'' at {z}");
            z += 0.37;
        }
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) < 1e-300);
        let oracle = trapezoid_tail(1.0);
        assert_abs_diff_eq!(oracle, 0.158_655_3, epsilon = 1e-7);
        // trapezoid error is O(h²) ≈ 1e-9 at this grid
        assert_abs_diff_eq!(q_function(1.0), oracle, epsilon = 1e-8);
        for &t in &[-3.0, -0.2, 0.7, 2.5] {
            assert_abs_diff_eq!(q_function(t) + q_function(-t), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn q_function_monotone_and_mills_bound() {
        let mut prev = q_function(-10.0);
        let mut t = -10.0;
        while t < 30.0 {
            t += 0.05;
            let q = q_function(t);
            assert!(q <= prev);
            if t > 1.0 {
                assert!(q < normal_pdf(t) / t);
            }
            prev = q;
        }
    }
}
