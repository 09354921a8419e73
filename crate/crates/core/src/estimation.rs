//! Minimum divergence estimation: the objective `Q(r_n, f_theta)`, the
//! function `K` of the estimating equation and a grid-then-refine minimizer.

use alloc::vec;
use alloc::vec::Vec;

use crate::density::DiscreteDensity;
use crate::divergence::{Kernel, EQUALITY_TOL};
use crate::error::{domain, Error, Result};
use crate::math::{expm1, ln, log1p, norm2, pow, Matrix, MAX_CONDITION};
use crate::models::{ParametricModel, DEFAULT_TAIL};
use crate::optimize::{golden_section, nelder_mead};
use crate::params::{TuningParams, LIMIT_EPS};

/// Largest relative estimating-equation residual a converged fit may carry.
pub const EE_TOLERANCE: f64 = 1e-7;

/// `r_n(x) = #{i : X_i = x} / n` on `[min(data), max(data)]`.
pub fn relative_frequency(data: &[i64]) -> Result<DiscreteDensity> {
    let (&lo, &hi) = match (data.iter().min(), data.iter().max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::EmptyData),
    };
    let mut counts = vec![0usize; (hi - lo) as usize + 1];
    for &x in data {
        counts[(x - lo) as usize] += 1;
    }
    let n = data.len() as f64;
    DiscreteDensity::new(lo, counts.into_iter().map(|c| c as f64 / n).collect(), 0.0)
}

impl Kernel {
    pub fn alpha(&self) -> f64 {
        match *self {
            Kernel::S { alpha, .. } | Kernel::GammaAlpha { alpha, .. } | Kernel::Interior { alpha, .. } => alpha,
        }
    }

    /// `K(delta)`, normalized so that `K(0) = 0` and `K'(0) = 1`; the
    /// derivative of the objective in `theta` is `-(1 + alpha) sum K(delta) f^{1+alpha} u`.
    pub fn k(&self, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let d = 1.0 + delta;
        match *self {
            Kernel::S { a, .. } => {
                if d == 0.0 {
                    return if a > LIMIT_EPS {
                        Ok(-1.0 / a)
                    } else {
                        Err(domain!("K is infinite at delta = -1 for A = {a}"))
                    };
                }
                if a.abs() < LIMIT_EPS {
                    Ok(ln(d))
                } else {
                    Ok(expm1(a * ln(d)) / a)
                }
            }
            Kernel::GammaAlpha { alpha, tau } => {
                let a1 = 1.0 + alpha;
                Ok(log1p(tau * expm1(a1 * ln(d))) / (tau * a1))
            }
            Kernel::Interior { alpha, gamma, tau } => {
                let c1 = 1.0 + gamma;
                let e = (alpha - gamma) / c1;
                // log(tau d^{1+gamma} + tau_bar), exact at d = 0 through IEEE infinities
                let lm = log1p(tau * expm1(c1 * ln(d)));
                Ok(expm1(e * lm) / (tau * (alpha - gamma)))
            }
        }
    }

    /// `K'(delta)`.
    pub fn k_prime(&self, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let d = 1.0 + delta;
        let err = || Err(domain!("K' is infinite at delta = -1"));
        match *self {
            Kernel::S { a, .. } => {
                if d == 0.0 {
                    return if (a - 1.0).abs() < LIMIT_EPS {
                        Ok(1.0)
                    } else if a > 1.0 {
                        Ok(0.0)
                    } else {
                        err()
                    };
                }
                Ok(pow(d, a - 1.0))
            }
            Kernel::GammaAlpha { alpha, tau } => {
                if d == 0.0 {
                    return Ok(if alpha > 0.0 { 0.0 } else { 1.0 / (1.0 - tau) });
                }
                Ok(pow(d, alpha) / (tau * pow(d, 1.0 + alpha) + 1.0 - tau))
            }
            Kernel::Interior { alpha, gamma, tau } => {
                let c1 = 1.0 + gamma;
                let e = (alpha - 2.0 * gamma - 1.0) / c1;
                if d == 0.0 {
                    if c1 > 0.0 {
                        return if gamma > 0.0 {
                            Ok(0.0)
                        } else if gamma == 0.0 {
                            Ok(pow(1.0 - tau, e))
                        } else {
                            err()
                        };
                    }
                    let ex = alpha - gamma - 1.0;
                    return if ex > 0.0 {
                        Ok(0.0)
                    } else if ex == 0.0 {
                        Ok(pow(tau, e))
                    } else {
                        err()
                    };
                }
                let mix = tau * pow(d, c1) + 1.0 - tau;
                Ok(pow(mix, e) * pow(d, gamma))
            }
        }
    }

    /// `(1 + delta) K'(delta)`, finite at `delta = -1` whenever the divergence is.
    pub fn dk_prime(&self, delta: f64) -> Result<f64> {
        if delta == -1.0 {
            return match *self {
                Kernel::S { a, .. } if a <= 0.0 => Err(domain!("K' diverges at delta = -1 for A = {a}")),
                _ => Ok(0.0),
            };
        }
        Ok((1.0 + delta) * self.k_prime(delta)?)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= -1.0 && !delta.is_nan() {
        Ok(())
    } else {
        Err(domain!("Pearson residual {delta} below -1"))
    }
}

/// `K(delta)` for the triple `p`.
pub fn k_function(delta: f64, p: &TuningParams) -> Result<f64> {
    Kernel::from_params(p).k(delta)
}

/// `K'(delta)` for the triple `p`.
pub fn k_prime(delta: f64, p: &TuningParams) -> Result<f64> {
    Kernel::from_params(p).k_prime(delta)
}

/// Summation range covering the data support and the model window at `theta`.
fn union_window(dens: &DiscreteDensity, model: &dyn ParametricModel, theta: &[f64], tail: f64) -> Result<(i64, i64)> {
    let (lo, hi) = model.window(theta, tail)?;
    Ok((lo.min(dens.support_start()), hi.max(dens.support_end())))
}

/// `sum_x K(delta(x)) f^{1+alpha}(x) u(x)` over `lo..=hi`, plus the sum of the
/// norms of the terms (used to scale the residual).
fn ee_sum(
    theta: &[f64],
    dens: &DiscreteDensity,
    model: &dyn ParametricModel,
    kernel: &Kernel,
    (lo, hi): (i64, i64),
) -> Result<(Vec<f64>, f64)> {
    let p = model.dim();
    let a1 = 1.0 + kernel.alpha();
    let mut out = vec![0.0; p];
    let mut u = vec![0.0; p];
    let mut scale = 0.0;
    for x in lo..=hi {
        let f = model.pmf(theta, x);
        if f == 0.0 {
            continue;
        }
        let delta = dens.get(x) / f - 1.0;
        let w = kernel.k(delta)? * pow(f, a1);
        model.score(theta, x, &mut u);
        for (o, ui) in out.iter_mut().zip(&u) {
            *o += w * ui;
        }
        scale += w.abs() * norm2(&u);
    }
    Ok((out, scale))
}

/// Left-hand side of the estimating equation
/// `sum_x K(delta(x)) f_theta^{1+alpha}(x) u_theta(x)`, summed over the data
/// support together with the model window.
pub fn estimating_equation(
    theta: &[f64],
    dens: &DiscreteDensity,
    model: &dyn ParametricModel,
    p: &TuningParams,
) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    let window = union_window(dens, model, theta, DEFAULT_TAIL)?;
    Ok(ee_sum(theta, dens, model, &Kernel::from_params(p), window)?.0)
}

/// Tuning of the minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Search box, one interval per parameter; `None` uses the model default.
    pub bracket: Option<Vec<(f64, f64)>>,
    /// Probe points per parameter in the initial scan; `None` means 50 for
    /// one parameter and 15 per parameter otherwise.
    pub grid_points: Option<usize>,
    /// Target accuracy in `theta`.
    pub tol: f64,
    pub max_iter: usize,
    pub tail: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bracket: None,
            grid_points: None,
            tol: 1e-9,
            max_iter: 500,
            tail: DEFAULT_TAIL,
        }
    }
}

/// Fitted parameter with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub objective_value: f64,
    /// `|EE(theta_hat)| / max(1, sum_x |K f^{1+alpha} u|)`.
    pub ee_residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The minimizer sits on the edge of the search box.
    pub boundary_hit: bool,
}

impl EstimationResult {
    /// Turns a boundary or non-converged fit into the matching error.
    pub fn check(self) -> Result<Self> {
        if self.boundary_hit {
            return Err(Error::BoundaryHit { theta: self.theta_hat });
        }
        if !self.converged {
            return Err(Error::NonConvergence {
                iterations: self.iterations,
            });
        }
        Ok(self)
    }
}

/// Divergence between a fixed data density and the model, summed over a
/// window that does not move with `theta`.
pub struct Objective<'a> {
    dens: &'a DiscreteDensity,
    model: &'a dyn ParametricModel,
    kernel: Kernel,
    window: (i64, i64),
    data: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(dens: &'a DiscreteDensity, model: &'a dyn ParametricModel, kernel: Kernel, window: (i64, i64)) -> Self {
        let data = (window.0..=window.1).map(|x| dens.get(x)).collect();
        Self {
            dens,
            model,
            kernel,
            window,
            data,
        }
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    /// Divergence at `theta`, or `+inf` outside the parameter space.
    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        if self.model.check_theta(theta).is_err() {
            return Ok(f64::INFINITY);
        }
        let f: Vec<f64> = (self.window.0..=self.window.1)
            .map(|x| self.model.pmf(theta, x))
            .collect();
        let sup = self
            .data
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if sup <= EQUALITY_TOL {
            return Ok(0.0);
        }
        self.kernel.sum(&self.data, &f)
    }

    /// Scale of the summands, for judging ties between objective values.
    fn magnitude(&self, theta: &[f64]) -> f64 {
        let a1 = 1.0 + self.kernel.alpha();
        (self.window.0..=self.window.1)
            .map(|x| pow(self.dens.get(x), a1) + pow(self.model.pmf(theta, x), a1))
            .sum()
    }

    pub fn estimating_equation(&self, theta: &[f64]) -> Result<(Vec<f64>, f64)> {
        ee_sum(theta, self.dens, self.model, &self.kernel, self.window)
    }

    fn residual(&self, theta: &[f64]) -> Result<f64> {
        let (ee, scale) = self.estimating_equation(theta)?;
        Ok(norm2(&ee) / scale.max(1.0))
    }
}

/// Minimizes the divergence given by `kernel` between `dens` and the model.
///
/// The estimator is the global minimizer over the search box: a grid scan,
/// golden-section (one parameter) or Nelder-Mead (several) refinement around
/// the best probe, then a root polish of the estimating equation that is
/// kept only if the objective does not rise.
pub fn minimize_divergence(
    dens: &DiscreteDensity,
    model: &dyn ParametricModel,
    kernel: Kernel,
    opts: &FitOptions,
) -> Result<EstimationResult> {
    let p = model.dim();
    if p == 0 {
        let window = union_window(dens, model, &[], opts.tail)?;
        let obj = Objective::new(dens, model, kernel, window);
        return Ok(EstimationResult {
            theta_hat: Vec::new(),
            objective_value: obj.value(&[])?,
            ee_residual_norm: 0.0,
            iterations: 0,
            converged: true,
            boundary_hit: false,
        });
    }
    let bracket = opts.bracket.clone().unwrap_or_else(|| model.default_bracket(dens));
    if bracket.len() != p || bracket.iter().any(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
        return Err(domain!("invalid search box {bracket:?} for a {p}-parameter model"));
    }
    let k = opts.grid_points.unwrap_or(if p == 1 { 50 } else { 15 }).max(3);
    let probes = grid_probes(&bracket, k);

    // one summation window for the whole search
    let (mut lo, mut hi) = (dens.support_start(), dens.support_end());
    for theta in &probes {
        if let Ok((a, b)) = model.window(theta, opts.tail) {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    let obj = Objective::new(dens, model, kernel, (lo, hi));

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut first_err = None;
    let mut probe_values = Vec::with_capacity(probes.len());
    for theta in &probes {
        let v = match obj.value(theta) {
            Ok(v) => v,
            Err(e) => {
                first_err.get_or_insert(e);
                f64::INFINITY
            }
        };
        probe_values.push(v);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((theta.clone(), v));
        }
    }
    let (start, start_value) = best.expect("probe grid is nonempty");
    if !start_value.is_finite() {
        return Err(first_err.unwrap_or_else(|| domain!("objective is infinite over the whole search box")));
    }
    let eval = |theta: &[f64]| -> f64 {
        let clamped: Vec<f64> = theta
            .iter()
            .zip(&bracket)
            .map(|(t, (lo, hi))| t.clamp(*lo, *hi))
            .collect();
        obj.value(&clamped).unwrap_or(f64::INFINITY)
    };

    let min = if p == 1 {
        let (lo, hi) = bracket[0];
        let h = (hi - lo) / (k - 1) as f64;
        let a = (start[0] - h).max(lo);
        let b = (start[0] + h).min(hi);
        golden_section(|t| eval(&[t]), a, b, opts.tol, opts.max_iter)
    } else {
        let step: Vec<f64> = bracket.iter().map(|(lo, hi)| (hi - lo) / (k - 1) as f64).collect();
        nelder_mead(eval, &start, &step, opts.tol, 1e-15, opts.max_iter)
    };
    let mut theta: Vec<f64> = min.x.iter().zip(&bracket).map(|(t, (lo, hi))| t.clamp(*lo, *hi)).collect();
    let mut value = min.value;
    if start_value < value {
        theta = start;
        value = start_value;
    }

    if let Some((t, v)) = polish(&obj, &theta, &bracket, opts.tol) {
        let slack = 1e-13 * obj.magnitude(&theta);
        if v <= value + slack {
            theta = t;
            value = v.min(value);
        }
    }

    let boundary_hit = theta
        .iter()
        .zip(&bracket)
        .any(|(t, (lo, hi))| (t - lo).abs() <= 1e-6 * (hi - lo) || (hi - t).abs() <= 1e-6 * (hi - lo));
    let ee_residual_norm = obj.residual(&theta)?;
    Ok(EstimationResult {
        theta_hat: theta,
        objective_value: value,
        ee_residual_norm,
        iterations: min.iterations,
        converged: min.converged && !boundary_hit && ee_residual_norm < EE_TOLERANCE,
        boundary_hit,
    })
}

fn grid_probes(bracket: &[(f64, f64)], k: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bracket
        .iter()
        .map(|(lo, hi)| (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect())
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut t = prefix.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

/// Newton iterations on the estimating equation with a finite-difference
/// Jacobian; returns the final point and its objective value.
fn polish(obj: &Objective<'_>, theta: &[f64], bracket: &[(f64, f64)], tol: f64) -> Option<(Vec<f64>, f64)> {
    let p = theta.len();
    let mut t = theta.to_vec();
    let ee = |t: &[f64]| obj.estimating_equation(t).ok().map(|(e, _)| e);
    let mut current = ee(&t)?;
    for _ in 0..8 {
        if norm2(&current) == 0.0 {
            break;
        }
        let mut jac = Matrix::zeros(p);
        for j in 0..p {
            let h = 1e-6 * t[j].abs().max(1e-3);
            let mut tp = t.clone();
            let mut tm = t.clone();
            tp[j] += h;
            tm[j] -= h;
            let (ep, em) = (ee(&tp)?, ee(&tm)?);
            for i in 0..p {
                jac[(i, j)] = (ep[i] - em[i]) / (2.0 * h);
            }
        }
        let step = jac.inverse(MAX_CONDITION).ok()?.mul_vec(&current);
        let next: Vec<f64> = t.iter().zip(&step).map(|(a, s)| a - s).collect();
        // the polish is local: it may not wander away from the refined point
        if next
            .iter()
            .zip(theta)
            .zip(bracket)
            .any(|((n, t0), (lo, hi))| (n - t0).abs() > 1e3 * tol.max(1e-9) * (1.0 + t0.abs()) || n < lo || n > hi)
        {
            return None;
        }
        let small = step.iter().zip(&t).all(|(s, a)| s.abs() <= 1e-15 * (1.0 + a.abs()));
        t = next;
        current = ee(&t)?;
        if small {
            break;
        }
    }
    let v = obj.value(&t).ok()?;
    Some((t, v))
}

/// Minimum generalized S-divergence estimator.
///
/// `gamma <= -1` is rejected: empty cells of `r_n` make the objective
/// infinite there. The `gamma = -1` edge is reachable through [`msde`] with
/// `A = tau (1 + alpha)`.
pub fn mgsde(
    dens: &DiscreteDensity,
    model: &dyn ParametricModel,
    p: &TuningParams,
    opts: &FitOptions,
) -> Result<EstimationResult> {
    if p.gamma() <= -1.0 + LIMIT_EPS {
        return Err(domain!(
            "estimation needs gamma > -1 (got {}); for gamma = -1 use the S-divergence estimator with A = tau (1 + alpha)",
            p.gamma()
        ));
    }
    minimize_divergence(dens, model, Kernel::from_params(p), opts)
}

/// Minimum S-divergence estimator indexed by the exponent `A`
/// (`B = 1 + alpha - A`).
pub fn msde(
    dens: &DiscreteDensity,
    model: &dyn ParametricModel,
    alpha: f64,
    a: f64,
    opts: &FitOptions,
) -> Result<EstimationResult> {
    if !((0.0..=1.0).contains(&alpha) && a.is_finite()) {
        return Err(domain!("invalid S-divergence parameters alpha = {alpha}, A = {a}"));
    }
    minimize_divergence(dens, model, Kernel::S { alpha, a }, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Poisson;

    #[test]
    fn relative_frequency_examples() {
        let r = relative_frequency(&[2, 2, 3]).unwrap();
        assert_eq!(r.support_start(), 2);
        assert!((r.get(2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.get(3) - 1.0 / 3.0).abs() < 1e-15);
        let r = relative_frequency(&[7]).unwrap();
        assert_eq!((r.support_start(), r.masses()), (7, &[1.0][..]));
        assert_eq!(relative_frequency(&[]), Err(Error::EmptyData));
    }

    #[test]
    fn k_at_zero() {
        for &(a, g, t) in &[(0.3, 0.7, 0.4), (0.0, 0.0, 0.0), (0.5, 0.5, 0.3), (0.2, -1.0, 0.5), (0.1, 1.5, 1.0)] {
            let p = TuningParams::new(a, g, t).unwrap();
            assert_eq!(k_function(0.0, &p).unwrap(), 0.0);
            assert!((k_prime(0.0, &p).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mle_is_the_sample_mean() {
        let data = [3, 5, 4, 7, 6, 2, 5, 5, 9, 1];
        let r = relative_frequency(&data).unwrap();
        let p = TuningParams::new(0.0, 0.0, 0.0).unwrap();
        let fit = mgsde(&r, &Poisson, &p, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.theta_hat[0] - 4.7).abs() < 1e-9, "{:?}", fit);
    }

    #[test]
    fn rejects_gamma_at_or_below_minus_one() {
        let r = relative_frequency(&[1, 2, 3]).unwrap();
        let p = TuningParams::new(0.2, -1.0, 0.5).unwrap();
        assert!(matches!(mgsde(&r, &Poisson, &p, &FitOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_data_hits_the_floor() {
        let r = relative_frequency(&[0; 50]).unwrap();
        let p = TuningParams::new(0.0, 0.0, 0.0).unwrap();
        let fit = mgsde(&r, &Poisson, &p, &FitOptions::default()).unwrap();
        assert!(fit.boundary_hit);
        assert!(!fit.converged);
        assert!(matches!(fit.check(), Err(Error::BoundaryHit { .. })));
    }
}
