//! Model adequacy test construction: the blend density `f_hat_tau`, the
//! `tau <-> c` correspondence and the statistic `T_n`.

use alloc::vec::Vec;

use crate::density::{align, DiscreteDensity};
use crate::divergence::{gsd_masses, s_divergence_masses, Kernel};
use crate::error::{domain, Error, Result};
use crate::estimation::{mgsde, minimize_divergence, msde, relative_frequency, EstimationResult, FitOptions};
use crate::math::pow;
use crate::models::ParametricModel;
use crate::params::{TuningParams, LIMIT_EPS};

/// Bisection steps allowed when solving for `tau`.
pub const MAX_BISECTION: usize = 61;
/// Accuracy of the boundary condition `phi(tau) = c`.
pub const BOUNDARY_TOL: f64 = 1e-7;

/// `[tau g^{1+gamma} + (1 - tau) f0^{1+gamma}]^{1/(1+gamma)}` cell by cell, or
/// `g^tau f0^{1-tau}` at `gamma = -1`. Not renormalized.
pub fn f_hat_tau(g: &DiscreteDensity, f0: &DiscreteDensity, gamma: f64, tau: f64) -> Result<DiscreteDensity> {
    let (start, gs, fs) = align(g, f0);
    DiscreteDensity::unnormalized(start, f_hat_masses(&gs, &fs, gamma, tau)?)
}

pub fn f_hat_masses(g: &[f64], f0: &[f64], gamma: f64, tau: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau) || !gamma.is_finite() {
        return Err(domain!("blend needs tau in [0, 1] and finite gamma, got tau = {tau}, gamma = {gamma}"));
    }
    if tau == 0.0 {
        return Ok(f0.to_vec());
    }
    if tau == 1.0 {
        return Ok(g.to_vec());
    }
    let c1 = 1.0 + gamma;
    let geometric = c1.abs() < LIMIT_EPS;
    g.iter()
        .zip(f0)
        .map(|(&g, &f)| {
            let v = if geometric {
                pow(g, tau) * pow(f, 1.0 - tau)
            } else {
                pow(tau * pow(g, c1) + (1.0 - tau) * pow(f, c1), 1.0 / c1)
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(domain!("blend is not finite for g = {g}, f0 = {f}"))
            }
        })
        .collect()
}

/// Both sides of
/// `tau S_{A=1+gamma}(g, f_hat) + tau_bar S_{A=alpha-gamma}(f_hat, f) = tau tau_bar Q(g, f)`.
pub fn decomposition_identity_check(g: &DiscreteDensity, f: &DiscreteDensity, p: &TuningParams) -> Result<(f64, f64)> {
    let (alpha, gamma, tau) = (p.alpha(), p.gamma(), p.tau());
    if !(tau > 0.0 && tau < 1.0) {
        return Err(domain!("the decomposition needs tau strictly inside (0, 1), got {tau}"));
    }
    let (_, gs, fs) = align(g, f);
    let fh = f_hat_masses(&gs, &fs, gamma, tau)?;
    let lhs = tau * s_divergence_masses(&gs, &fh, alpha, 1.0 + gamma)?
        + (1.0 - tau) * s_divergence_masses(&fh, &fs, alpha, alpha - gamma)?;
    let rhs = tau * (1.0 - tau) * gsd_masses(&gs, &fs, p)?;
    Ok((lhs, rhs))
}

/// The fit `theta_hat(tau)` the test is built around: the minimum GSD
/// estimator, or at `gamma = -1` the minimum S-divergence estimator with
/// `A = tau (1 + alpha)`.
pub fn fit_at_tau(
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    alpha: f64,
    gamma: f64,
    tau: f64,
    opts: &FitOptions,
) -> Result<EstimationResult> {
    if (gamma + 1.0).abs() < LIMIT_EPS {
        msde(g, model, alpha, tau * (1.0 + alpha), opts)
    } else {
        mgsde(g, model, &TuningParams::new(alpha, gamma, tau)?, opts)
    }
}

/// `phi(tau) = min_theta S_{A=alpha-gamma}(f_hat_tau(g, f_{theta_hat(tau)}), f_theta)`
/// together with the fit `theta_hat(tau)` and the blend.
pub fn phi(
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    alpha: f64,
    gamma: f64,
    tau: f64,
    opts: &FitOptions,
) -> Result<PhiValue> {
    let fit = fit_at_tau(g, model, alpha, gamma, tau, opts)?;
    let f_theta = model.density(&fit.theta_hat, opts.tail)?;
    let f_hat = f_hat_tau(g, &f_theta, gamma, tau)?;
    let inner = minimize_divergence(&f_hat, model, Kernel::S { alpha, a: alpha - gamma }, opts)?;
    Ok(PhiValue {
        tau,
        value: inner.objective_value,
        fit,
        f_hat,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiValue {
    pub tau: f64,
    pub value: f64,
    pub fit: EstimationResult,
    pub f_hat: DiscreteDensity,
}

/// Solution of the boundary condition `phi(tau) = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSolution {
    pub tau: f64,
    pub phi: PhiValue,
    /// Some bisection midpoint fell outside the bracketing values.
    pub non_monotone: bool,
    pub iterations: usize,
}

/// Solves `phi(tau) = c` by bisection on `[0, 1]`, anchored at `phi(0) = 0`.
pub fn tau_from_c(
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    alpha: f64,
    gamma: f64,
    c: f64,
    opts: &FitOptions,
) -> Result<TauSolution> {
    let top = phi(g, model, alpha, gamma, 1.0, opts)?;
    if c.is_nan() || c < 0.0 || c > top.value + BOUNDARY_TOL {
        return Err(Error::OutOfRange { c, max: top.value });
    }
    if c <= BOUNDARY_TOL {
        return Ok(TauSolution {
            tau: 0.0,
            phi: phi(g, model, alpha, gamma, 0.0, opts)?,
            non_monotone: false,
            iterations: 0,
        });
    }
    if (top.value - c).abs() < BOUNDARY_TOL {
        return Ok(TauSolution {
            tau: 1.0,
            phi: top,
            non_monotone: false,
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut phi_lo, mut phi_hi) = (0.0, top.value);
    let mut non_monotone = false;
    let mut best: Option<PhiValue> = None;
    let mut iterations = 0;
    while iterations < MAX_BISECTION {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let v = phi(g, model, alpha, gamma, mid, opts)?;
        if v.value < phi_lo - BOUNDARY_TOL || v.value > phi_hi + BOUNDARY_TOL {
            non_monotone = true;
        }
        let gap = v.value - c;
        let done = gap.abs() < BOUNDARY_TOL;
        if gap < 0.0 {
            lo = mid;
            phi_lo = v.value;
        } else {
            hi = mid;
            phi_hi = v.value;
        }
        best = Some(v);
        if done {
            break;
        }
    }
    let phi = best.expect("at least one bisection step");
    if (phi.value - c).abs() >= BOUNDARY_TOL {
        return Err(Error::NonConvergence { iterations });
    }
    Ok(TauSolution {
        tau: phi.tau,
        phi,
        non_monotone,
        iterations,
    })
}

/// Output of the adequacy test construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MatResult {
    pub c: f64,
    pub tau_star: f64,
    pub theta_tau: Vec<f64>,
    pub f_hat: DiscreteDensity,
    pub f_hat_mass: f64,
    /// `2 n S_{A=1+gamma}(r_n, f_hat)`.
    pub statistic: f64,
    /// `2 n S_{A=1+gamma}(r_n, f_{theta_tau})`; `None` where it is infinite.
    pub statistic_model: Option<f64>,
    pub non_monotone: bool,
}

/// Builds the statistic for `H0: S_{A=alpha-gamma}(g, F) <= c` from a sample.
pub fn mat_statistic(
    data: &[i64],
    model: &dyn ParametricModel,
    alpha: f64,
    gamma: f64,
    c: f64,
    opts: &FitOptions,
) -> Result<MatResult> {
    let r = relative_frequency(data)?;
    let sol = tau_from_c(&r, model, alpha, gamma, c, opts)?;
    let n = data.len() as f64;
    let a = 1.0 + gamma;
    let (_, rs, fh) = align(&r, &sol.phi.f_hat);
    let statistic = 2.0 * n * s_divergence_masses(&rs, &fh, alpha, a)?;
    let f_theta = model.density(&sol.phi.fit.theta_hat, opts.tail)?;
    let (_, rs, fs) = align(&r, &f_theta);
    let statistic_model = s_divergence_masses(&rs, &fs, alpha, a).ok().map(|v| 2.0 * n * v);
    Ok(MatResult {
        c,
        tau_star: sol.tau,
        theta_tau: sol.phi.fit.theta_hat.clone(),
        f_hat_mass: sol.phi.f_hat.total_mass(),
        f_hat: sol.phi.f_hat,
        statistic,
        statistic_model,
        non_monotone: sol.non_monotone,
    })
}
