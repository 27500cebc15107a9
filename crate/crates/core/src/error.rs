use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature order {0} outside supported range [2, 200]")]
    QuadratureOrder(usize),

    #[error("proximal solve for rho did not converge (x = {x}, t = {t})")]
    ProxNonConvergence { x: f64, t: f64 },

    #[error("invalid problem: {0}")]
    InvalidSpec(String),

    #[error("infeasible update: {0}")]
    Infeasible(String),

    #[error("coefficient vector has empty support; misdetection rate undefined")]
    EmptySupport,
}
