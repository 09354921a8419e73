//! Influence functions and the sandwich asymptotic variance of the minimum
//! divergence estimator.

use alloc::vec;
use alloc::vec::Vec;

use crate::density::DiscreteDensity;
use crate::divergence::Kernel;
use crate::error::Result;
use crate::estimation::{mgsde, FitOptions};
use crate::math::{pow, Matrix, MAX_CONDITION};
use crate::models::ParametricModel;
use crate::params::TuningParams;

/// Tail left out of the sums; far below `DEFAULT_TAIL` because the score
/// weights the tail cells heavily.
pub const MOMENT_TAIL: f64 = 1e-20;

/// Per-cell quantities shared by `J`, `xi` and `V`.
struct Cell {
    g: f64,
    f: f64,
    delta: f64,
    u: Vec<f64>,
}

fn cells<'a>(
    g: &'a DiscreteDensity,
    model: &'a dyn ParametricModel,
    theta: &'a [f64],
) -> Result<impl Iterator<Item = (i64, Cell)> + 'a> {
    model.check_theta(theta)?;
    let (lo, hi) = model.window(theta, MOMENT_TAIL)?;
    let (lo, hi) = (lo.min(g.support_start()), hi.max(g.support_end()));
    let p = model.dim();
    Ok((lo..=hi).filter_map(move |x| {
        let f = model.pmf(theta, x);
        if f == 0.0 {
            return None;
        }
        let gx = g.get(x);
        let mut u = vec![0.0; p];
        model.score(theta, x, &mut u);
        Some((
            x,
            Cell {
                g: gx,
                f,
                delta: gx / f - 1.0,
                u,
            },
        ))
    }))
}

/// `h(x) = K'(delta(x)) f^alpha(x) u(x)`.
fn h_value(kernel: &Kernel, delta: f64, f: f64, u: &[f64]) -> Result<Vec<f64>> {
    let w = kernel.k_prime(delta)? * pow(f, kernel.alpha());
    Ok(u.iter().map(|ui| w * ui).collect())
}

pub(crate) fn j_matrix_kernel(
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    theta: &[f64],
    kernel: &Kernel,
) -> Result<Matrix> {
    let p = model.dim();
    let a1 = 1.0 + kernel.alpha();
    let mut j = Matrix::zeros(p);
    let mut grad = vec![0.0; p * p];
    for (x, c) in cells(g, model, theta)? {
        let fa1 = pow(c.f, a1);
        // u u^T K'(delta) g f^alpha, written with g = (1 + delta) f
        j.add_outer(kernel.dk_prime(c.delta)? * fa1, &c.u, &c.u);
        let k = kernel.k(c.delta)?;
        if k != 0.0 {
            j.add_outer(-a1 * k * fa1, &c.u, &c.u);
            model.score_gradient(theta, x, &mut grad);
            j.add_scaled(-k * fa1, &grad);
        }
    }
    Ok(j)
}

pub(crate) fn xi_vector_kernel(
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    theta: &[f64],
    kernel: &Kernel,
) -> Result<Vec<f64>> {
    let mut xi = vec![0.0; model.dim()];
    for (_, c) in cells(g, model, theta)? {
        if c.g == 0.0 {
            continue;
        }
        let h = h_value(kernel, c.delta, c.f, &c.u)?;
        for (s, hi) in xi.iter_mut().zip(&h) {
            *s += c.g * hi;
        }
    }
    Ok(xi)
}

pub(crate) fn v_matrix_kernel(
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    theta: &[f64],
    kernel: &Kernel,
) -> Result<Matrix> {
    let p = model.dim();
    let mut v = Matrix::zeros(p);
    let mut xi = vec![0.0; p];
    for (_, c) in cells(g, model, theta)? {
        if c.g == 0.0 {
            continue;
        }
        let h = h_value(kernel, c.delta, c.f, &c.u)?;
        v.add_outer(c.g, &h, &h);
        for (s, hi) in xi.iter_mut().zip(&h) {
            *s += c.g * hi;
        }
    }
    v.add_outer(-1.0, &xi, &xi);
    Ok(v)
}

/// `J_g = sum u u^T K'(delta) g f^alpha - sum ((1 + alpha) u u^T + ∇u) K(delta) f^{1+alpha}`.
pub fn j_matrix(g: &DiscreteDensity, model: &dyn ParametricModel, theta: &[f64], p: &TuningParams) -> Result<Matrix> {
    j_matrix_kernel(g, model, theta, &Kernel::from_params(p))
}

/// `xi_g = E_g[K'(delta) f^alpha u]`.
pub fn xi_vector(g: &DiscreteDensity, model: &dyn ParametricModel, theta: &[f64], p: &TuningParams) -> Result<Vec<f64>> {
    xi_vector_kernel(g, model, theta, &Kernel::from_params(p))
}

/// `V_g = Var_g[K'(delta) f^alpha u]`.
pub fn v_matrix(g: &DiscreteDensity, model: &dyn ParametricModel, theta: &[f64], p: &TuningParams) -> Result<Matrix> {
    v_matrix_kernel(g, model, theta, &Kernel::from_params(p))
}

/// Influence function at `y` when the truth is `g`.
///
/// `theta_g` is the best-fitting parameter for `g`; when `None` it is
/// recomputed with [`mgsde`].
pub fn if_general(
    y: i64,
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    theta_g: Option<&[f64]>,
    p: &TuningParams,
) -> Result<Vec<f64>> {
    let fitted;
    let theta = match theta_g {
        Some(t) => t,
        None => {
            fitted = mgsde(g, model, p, &FitOptions::default())?.theta_hat;
            &fitted
        }
    };
    if_general_kernel(y, g, model, theta, &Kernel::from_params(p))
}

pub(crate) fn if_general_kernel(
    y: i64,
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    theta: &[f64],
    kernel: &Kernel,
) -> Result<Vec<f64>> {
    let j_inv = j_matrix_kernel(g, model, theta, kernel)?.inverse(MAX_CONDITION)?;
    let xi = xi_vector_kernel(g, model, theta, kernel)?;
    let f = model.pmf(theta, y);
    let mut u = vec![0.0; model.dim()];
    model.score(theta, y, &mut u);
    let h = if f == 0.0 {
        vec![0.0; model.dim()]
    } else {
        h_value(kernel, g.get(y) / f - 1.0, f, &u)?
    };
    let centered: Vec<f64> = h.iter().zip(&xi).map(|(a, b)| a - b).collect();
    Ok(j_inv.mul_vec(&centered))
}

/// Influence function at the model:
/// `(sum u u^T f^{1+alpha})^{-1} [u(y) f^alpha(y) - sum u f^{1+alpha}]`.
pub fn if_at_model(y: i64, model: &dyn ParametricModel, theta: &[f64], alpha: f64) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    let p = model.dim();
    let (lo, hi) = model.window(theta, MOMENT_TAIL)?;
    let mut j = Matrix::zeros(p);
    let mut xi = vec![0.0; p];
    let mut u = vec![0.0; p];
    for x in lo..=hi {
        let fa1 = pow(model.pmf(theta, x), 1.0 + alpha);
        model.score(theta, x, &mut u);
        j.add_outer(fa1, &u, &u);
        for (s, ui) in xi.iter_mut().zip(&u) {
            *s += fa1 * ui;
        }
    }
    model.score(theta, y, &mut u);
    let fy = pow(model.pmf(theta, y), alpha);
    let centered: Vec<f64> = u.iter().zip(&xi).map(|(a, b)| a * fy - b).collect();
    Ok(j.inverse(MAX_CONDITION)?.mul_vec(&centered))
}

/// Influence function tabulated at a list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceCurve {
    pub points: Vec<i64>,
    pub values: Vec<Vec<f64>>,
    pub params: TuningParams,
    pub theta: Vec<f64>,
}

impl InfluenceCurve {
    /// Curve of [`if_general`] at the given points, fitting `theta_g` once.
    pub fn general(
        points: &[i64],
        g: &DiscreteDensity,
        model: &dyn ParametricModel,
        theta_g: Option<&[f64]>,
        p: &TuningParams,
    ) -> Result<Self> {
        let theta = match theta_g {
            Some(t) => t.to_vec(),
            None => mgsde(g, model, p, &FitOptions::default())?.theta_hat,
        };
        let values = points
            .iter()
            .map(|&y| if_general(y, g, model, Some(&theta), p))
            .collect::<Result<_>>()?;
        Ok(Self {
            points: points.to_vec(),
            values,
            params: *p,
            theta,
        })
    }

    /// Curve of [`if_at_model`]; the result does not depend on `gamma` or `tau`.
    pub fn at_model(points: &[i64], model: &dyn ParametricModel, theta: &[f64], p: &TuningParams) -> Result<Self> {
        let values = points
            .iter()
            .map(|&y| if_at_model(y, model, theta, p.alpha()))
            .collect::<Result<_>>()?;
        Ok(Self {
            points: points.to_vec(),
            values,
            params: *p,
            theta: theta.to_vec(),
        })
    }
}

/// The sandwich `J^{-1} V J^{-1}` with its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticVariance {
    pub j: Matrix,
    pub v: Matrix,
    pub avar: Matrix,
}

pub fn asymptotic_variance(
    g: &DiscreteDensity,
    model: &dyn ParametricModel,
    theta: &[f64],
    p: &TuningParams,
) -> Result<AsymptoticVariance> {
    let kernel = Kernel::from_params(p);
    let j = j_matrix_kernel(g, model, theta, &kernel)?;
    let v = v_matrix_kernel(g, model, theta, &kernel)?;
    let j_inv = j.inverse(MAX_CONDITION)?;
    let avar = j_inv.mul(&v).mul(&j_inv);
    Ok(AsymptoticVariance { j, v, avar })
}
