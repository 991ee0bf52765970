//! Maximum-likelihood estimation.

mod classify;
mod delta;
mod estep;
mod fit;
mod hessian;
mod index;
mod mstep;
mod wald;

pub use classify::classify;
pub use delta::crp_standard_errors;
pub use estep::{e_step, fast_loglik, Posteriors};
pub use fit::{fit, random_start, start_rng, FitDiagnostics, FitOrigin, FitOptions, FitResult};
pub use hessian::{
    hessian_asymmetry, loglik_gradient, numerical_hessian, standard_errors, StandardErrors,
};
pub use mstep::{
    m_step, regression_coefficients, weighted_logit_gradient, weighted_logit_objective,
    with_regression_coefficients,
};
pub use wald::{significance_stars, wald_tests, WaldTest};
