//! The tuning triple `(alpha, gamma, tau)` and the affine `tau <-> lambda` maps.

use crate::error::{domain, Result};

/// Distance below which a parameter is treated as sitting on a removable
/// singularity of the closed form (`gamma = -1`, `gamma = alpha`, `tau ∈ {0, 1}`,
/// `A = 0`, `B = 0`).
pub const LIMIT_EPS: f64 = 1e-8;

/// Which closed form evaluates the divergence at a given parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `tau -> 0`: the S-divergence with `A = 1 + gamma`.
    TauZero,
    /// `tau -> 1`: the S-divergence with `A = alpha - gamma`.
    TauOne,
    /// `gamma -> -1`: the S-divergence with `A = tau (1 + alpha)`.
    GammaNegOne,
    /// `gamma -> alpha`: the logarithmic generalization of GKL.
    GammaAlpha,
    Interior,
}

/// Tuning parameters of the generalized S-divergence.
///
/// `alpha` and `tau` live in `[0, 1]`; `gamma` is any finite real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningParams {
    alpha: f64,
    gamma: f64,
    tau: f64,
}

impl TuningParams {
    pub fn new(alpha: f64, gamma: f64, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(domain!("alpha = {alpha} outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(domain!("tau = {tau} outside [0, 1]"));
        }
        if !gamma.is_finite() {
            return Err(domain!("gamma = {gamma} is not finite"));
        }
        Ok(Self { alpha, gamma, tau })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_bar(&self) -> f64 {
        1.0 - self.tau
    }

    pub fn regime(&self) -> Regime {
        if self.tau < LIMIT_EPS {
            Regime::TauZero
        } else if 1.0 - self.tau < LIMIT_EPS {
            Regime::TauOne
        } else if (self.gamma + 1.0).abs() < LIMIT_EPS {
            Regime::GammaNegOne
        } else if (self.gamma - self.alpha).abs() < LIMIT_EPS {
            Regime::GammaAlpha
        } else {
            Regime::Interior
        }
    }

    /// `lambda_tau = (alpha tau - (1 - tau)) / (1 - alpha)`.
    pub fn lambda_tau(&self) -> Result<f64> {
        lambda_of_tau(self.alpha, self.tau)
    }

    /// The S-divergence exponent `A` the triple collapses to on a limiting
    /// edge, or `None` in the interior and on the `gamma = alpha` edge.
    pub fn s_exponent(&self) -> Option<f64> {
        match self.regime() {
            Regime::TauZero => Some(1.0 + self.gamma),
            Regime::TauOne => Some(self.alpha - self.gamma),
            Regime::GammaNegOne => Some(self.tau * (1.0 + self.alpha)),
            Regime::GammaAlpha | Regime::Interior => None,
        }
    }
}

/// Exponents `(A, B)` of the S-divergence `S_(alpha, lambda)`.
///
/// `A + B = 1 + alpha` for every `lambda`.
pub fn s_exponents(alpha: f64, lambda: f64) -> (f64, f64) {
    let a = 1.0 + lambda * (1.0 - alpha);
    let b = alpha - lambda * (1.0 - alpha);
    (a, b)
}

pub fn lambda_of_tau(alpha: f64, tau: f64) -> Result<f64> {
    if alpha >= 1.0 {
        return Err(domain!("lambda_tau is undefined at alpha = {alpha} (needs alpha < 1)"));
    }
    Ok((alpha * tau - (1.0 - tau)) / (1.0 - alpha))
}

pub fn tau_of_lambda(alpha: f64, lambda: f64) -> Result<f64> {
    if alpha >= 1.0 {
        return Err(domain!("tau(lambda) is undefined at alpha = {alpha} (needs alpha < 1)"));
    }
    Ok((lambda * (1.0 - alpha) + 1.0) / (1.0 + alpha))
}
