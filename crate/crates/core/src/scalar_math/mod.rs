//! Elementary special functions and Gaussian quadrature rules.

mod link;
mod quadrature;

pub use link::{normal_pdf, q_function, rho, rho_prime, rho_second};
pub use quadrature::{gauss_hermite, gauss_legendre, QuadratureRule, MAX_ORDER, MIN_ORDER};

/// Default number of Gauss–Hermite nodes per dimension.
pub const DEFAULT_QUAD_ORDER: usize = 80;
