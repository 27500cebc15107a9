use ndarray::{Array1, Array2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::expectation::PriorKind;
use crate::scalar_math::rho_prime;

use super::ExperimentConfig;

/// One synthetic logistic-regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// `n × p` design with i.i.d. `N(0, 1/p)` entries.
    pub x: Array2<f64>,
    /// Labels in `{0, 1}`.
    pub y: Array1<f64>,
    pub beta_star: Array1<f64>,
}

/// Seed of trial `index`: the first word of the ChaCha stream `index`
/// keyed by `master_seed`, so trials are independent of execution order.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Draws `β*` from the prior, then `X`, then `y_i ~ Bernoulli(ρ'(x_iᵀβ*))`.
pub fn generate_instance(config: &ExperimentConfig, seed: u64) -> Instance {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let p = config.p;
    let n = config.n();
    let kappa = config.spec.kappa;

    let beta_star = match config.spec.prior.kind {
        PriorKind::Gaussian => Array1::from_shape_fn(p, |_| kappa * rng.sample::<f64, _>(StandardNormal)),
        PriorKind::Sparse { sparsity } => {
            let scale = kappa / sparsity.sqrt();
            Array1::from_shape_fn(p, |_| {
                let on = rng.random_bool(sparsity);
                let g: f64 = rng.sample(StandardNormal);
                if on {
                    scale * g
                } else {
                    0.0
                }
            })
        }
    };

    let row_scale = 1.0 / (p as f64).sqrt();
    let x = Array2::from_shape_fn((n, p), |_| row_scale * rng.sample::<f64, _>(StandardNormal));
    let margins = x.dot(&beta_star);
    let y = margins.mapv(|m| {
        let u: f64 = rng.random();
        if u < rho_prime(m) {
            1.0
        } else {
            0.0
        }
    });
    Instance { x, y, beta_star }
}
