use ndarray::ArrayView1;

use crate::error::{Error, Result};

/// Empirical counterparts of the predicted quantities for one fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `β̂ᵀβ* / ‖β*‖²`
    pub alpha_hat: f64,
    /// `(1/p)‖β̂ − α̂β*‖²`
    pub sigma2_hat: f64,
    /// `(1/p)‖β̂ − β*‖²`
    pub mse_raw: f64,
    /// `(1/p)‖β̂/α̂ − β*‖²`; infinite when `α̂ = 0`.
    pub mse_debiased: f64,
    /// `|Ω̂ \ Ω| / |Ωᶜ|`, absent when `β*` has no zero entries.
    pub e1_hat: Option<f64>,
    /// `|Ω \ Ω̂| / |Ω|`
    pub e2_hat: f64,
}

/// Compare an estimate with the truth; `Ω̂ = {j : |β̂_j| > ε}` and
/// `Ω = {j : β*_j ≠ 0}`.
pub fn measure_trial(beta_hat: ArrayView1<f64>, beta_star: ArrayView1<f64>, epsilon: f64) -> Result<Metrics> {
    if beta_hat.len() != beta_star.len() {
        return Err(Error::InvalidSpec(format!(
            "estimate has {} coordinates, truth has {}",
            beta_hat.len(),
            beta_star.len()
        )));
    }
    let p = beta_star.len() as f64;
    let energy = beta_star.dot(&beta_star);
    let support = beta_star.iter().filter(|&&b| b != 0.0).count();
    if support == 0 {
        return Err(Error::EmptySupport);
    }
    let alpha_hat = beta_hat.dot(&beta_star) / energy;
    let sq = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
        beta_hat.iter().zip(&beta_star).map(|(&h, &s)| f(h, s).powi(2)).sum::<f64>() / p
    };
    let sigma2_hat = sq(&|h, s| h - alpha_hat * s);
    let mse_raw = sq(&|h, s| h - s);
    let mse_debiased = if alpha_hat != 0.0 {
        sq(&|h, s| h / alpha_hat - s)
    } else {
        f64::INFINITY
    };

    let off = beta_star.len() - support;
    let (mut false_alarms, mut misses) = (0usize, 0usize);
    for (&h, &s) in beta_hat.iter().zip(&beta_star) {
        let detected = h.abs() > epsilon;
        match (s != 0.0, detected) {
            (false, true) => false_alarms += 1,
            (true, false) => misses += 1,
            _ => {}
        }
    }
    Ok(Metrics {
        alpha_hat,
        sigma2_hat,
        mse_raw,
        mse_debiased,
        e1_hat: (off > 0).then(|| false_alarms as f64 / off as f64),
        e2_hat: misses as f64 / support as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn perfect_recovery() {
        let star = array![0.0, 1.5, -2.0, 0.0, 0.3];
        let m = measure_trial(star.view(), star.view(), 1e-3).unwrap();
        assert_eq!(m.alpha_hat, 1.0);
        assert_eq!(m.sigma2_hat, 0.0);
        assert_eq!(m.mse_raw, 0.0);
        assert_eq!(m.e1_hat, Some(0.0));
        assert_eq!(m.e2_hat, 0.0);
    }

    #[test]
    fn null_estimate() {
        let star = array![0.0, 1.5, -2.0, 0.0, 0.3];
        let m = measure_trial(Array1::zeros(5).view(), star.view(), 1e-3).unwrap();
        assert_eq!(m.alpha_hat, 0.0);
        assert_eq!(m.e1_hat, Some(0.0));
        assert_eq!(m.e2_hat, 1.0);
        assert!(m.mse_debiased.is_infinite());
    }

    #[test]
    fn scaling_is_removed_by_debiasing() {
        let star = array![0.0, 1.5, -2.0, 0.0, 0.3];
        let m = measure_trial((&star * 2.0).view(), star.view(), 1e-3).unwrap();
        assert_eq!(m.alpha_hat, 2.0);
        assert!(m.mse_debiased.abs() < 1e-30);
        assert!(m.sigma2_hat.abs() < 1e-30);
    }

    #[test]
    fn debiasing_identity() {
        let star = array![0.4, 1.5, -2.0, 0.7, 0.3, -0.1];
        let hat = array![0.1, 0.9, -1.1, 0.2, 0.4, 0.05];
        let m = measure_trial(hat.view(), star.view(), 1e-3).unwrap();
        let expected = m.sigma2_hat / (m.alpha_hat * m.alpha_hat);
        assert!((m.mse_debiased - expected).abs() < 1e-14 * expected.max(1.0));
        assert_eq!(m.e1_hat, None);
    }

    #[test]
    fn rates_count_the_threshold() {
        let star = array![0.0, 0.0, 0.0, 0.0, 1.0, -1.0];
        let hat = array![0.002, 0.0005, 0.0, -0.5, 0.0, -0.7];
        let m = measure_trial(hat.view(), star.view(), 1e-3).unwrap();
        assert_eq!(m.e1_hat, Some(0.5));
        assert_eq!(m.e2_hat, 0.5);
    }

    #[test]
    fn empty_support_is_an_error() {
        let zero = Array1::<f64>::zeros(4);
        assert_eq!(measure_trial(zero.view(), zero.view(), 1e-3), Err(Error::EmptySupport));
    }
}
