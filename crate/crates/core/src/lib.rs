#![no_std]
//! Generalized S-divergences over discrete densities: evaluation, minimum
//! divergence estimation, influence functions and model adequacy statistics.

extern crate alloc;

pub mod density;
pub mod divergence;
pub mod error;
pub mod estimation;
pub mod models;
pub mod optimize;
pub mod mat;
pub mod math;
pub mod params;
pub mod robustness;

pub use density::{DiscreteDensity, GridDensity};
pub use divergence::{
    c_residual, gsd, gsd_limit_gamma, gsd_limit_tau, s_divergence, special_divergence,
    DivergenceSpec, GammaLimit, TauLimit,
};
pub use error::{Error, Result};
pub use params::{lambda_of_tau, tau_of_lambda, TuningParams};
pub use models::{Binomial, Fixed, Geometric, NormalGrid, ParametricModel, Poisson, DEFAULT_TAIL};
pub use estimation::{
    estimating_equation, k_function, k_prime, mgsde, msde, relative_frequency, EstimationResult, FitOptions,
};
pub use robustness::{
    asymptotic_variance, if_at_model, if_general, j_matrix, v_matrix, xi_vector, AsymptoticVariance, InfluenceCurve,
};
pub use mat::{decomposition_identity_check, f_hat_tau, mat_statistic, tau_from_c, MatResult, TauSolution};
