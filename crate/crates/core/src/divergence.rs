//! The generalized S-divergence `Q_(alpha, gamma, tau)`, its limiting forms and
//! the named members of the family.
//!
//! Every evaluator works cell by cell on the union of the two supports,
//! padding with zeros. Cells where both masses vanish contribute nothing;
//! `0 · log 0 = 0` and `0^a = 0` for `a > 0`. A domain error is raised only
//! when a cell is genuinely infinite.

use alloc::vec::Vec;

use crate::density::{align, DiscreteDensity, GridDensity};
use crate::error::{domain, Result};
use crate::math::{exp, expm1, ln, log1p, pow, sqrt, xlogy_ratio};
use crate::params::{s_exponents, Regime, TuningParams, LIMIT_EPS};

/// Two densities closer than this in sup norm have divergence exactly zero.
pub const EQUALITY_TOL: f64 = 1e-12;

/// Which removable singularity in `gamma` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaLimit {
    ToNegOne,
    ToAlpha,
}

/// Which end of the `tau` range to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauLimit {
    ToZero,
    ToOne,
}

/// Cell-wise integrand of a member of the family, normalized so that the
/// divergence is the plain sum of cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// S-divergence with exponents `A` and `B = 1 + alpha - A`.
    S { alpha: f64, a: f64 },
    /// The `gamma = alpha` edge of the GSD.
    GammaAlpha { alpha: f64, tau: f64 },
    Interior { alpha: f64, gamma: f64, tau: f64 },
}

impl Kernel {
    pub fn from_params(p: &TuningParams) -> Self {
        let (alpha, gamma, tau) = (p.alpha(), p.gamma(), p.tau());
        match p.regime() {
            Regime::GammaAlpha => Kernel::GammaAlpha { alpha, tau },
            Regime::Interior => Kernel::Interior { alpha, gamma, tau },
            _ => Kernel::S {
                alpha,
                a: p.s_exponent().expect("edge regimes carry an S exponent"),
            },
        }
    }

    /// Contribution of one support point with masses `g` (data side) and `f`
    /// (model side).
    pub fn cell(&self, g: f64, f: f64) -> Result<f64> {
        if g == 0.0 && f == 0.0 {
            return Ok(0.0);
        }
        match *self {
            Kernel::S { alpha, a } => s_cell(g, f, alpha, a),
            Kernel::GammaAlpha { alpha, tau } => Ok(gamma_alpha_cell(g, f, alpha, tau)),
            Kernel::Interior { alpha, gamma, tau } => Ok(interior_cell(g, f, alpha, gamma, tau)),
        }
    }

    /// Sum of cells over two aligned mass vectors.
    pub fn sum(&self, g: &[f64], f: &[f64]) -> Result<f64> {
        debug_assert_eq!(g.len(), f.len());
        let mut total = 0.0;
        for (&gi, &fi) in g.iter().zip(f) {
            total += self.cell(gi, fi)?;
        }
        Ok(total)
    }
}

/// `base * expm1(c l) / c`, switching to the direct difference `(top - base) / c`
/// when `c l` is large and to the `c -> 0` limit `base * l` near zero.
fn expm1_ratio(base: f64, c: f64, l: f64, top: f64) -> f64 {
    if c.abs() < LIMIT_EPS {
        base * l
    } else if (c * l).abs() < 1.0 {
        base * expm1(c * l) / c
    } else {
        (top - base) / c
    }
}

fn s_cell(g: f64, f: f64, alpha: f64, a: f64) -> Result<f64> {
    let a1 = 1.0 + alpha;
    let b = a1 - a;
    if g == 0.0 {
        return if a > LIMIT_EPS {
            Ok(pow(f, a1) / a)
        } else {
            Err(domain!("S-divergence with A = {a} is infinite where g = 0 < f = {f}"))
        };
    }
    if f == 0.0 {
        return if b > LIMIT_EPS {
            Ok(pow(g, a1) / b)
        } else {
            Err(domain!("S-divergence with B = {b} is infinite where f = 0 < g = {g}"))
        };
    }
    // [f^B g^A expm1(B l)] / B - [f^{1+a} expm1(A l)] / A, l = log(g / f)
    let (lg, lf) = (ln(g), ln(f));
    let l = lg - lf;
    let cross = exp(b * lf + a * lg);
    let fa = pow(f, a1);
    let ga = pow(g, a1);
    let tb = expm1_ratio(cross, b, l, ga);
    let ta = expm1_ratio(fa, a, l, cross);
    Ok((tb - ta).max(0.0))
}

fn gamma_alpha_cell(g: f64, f: f64, alpha: f64, tau: f64) -> f64 {
    let a1 = 1.0 + alpha;
    let tb = 1.0 - tau;
    if g == 0.0 {
        return -pow(f, a1) * ln(tb) / (a1 * tau);
    }
    if f == 0.0 {
        return -pow(g, a1) * ln(tau) / (a1 * tb);
    }
    let l = ln(g) - ln(f);
    let x = a1 * l;
    // w = log(tau (g/f)^{1+alpha} + tau_bar)
    let w = if x.abs() < 1.0 {
        log1p(tau * expm1(x))
    } else if x > 0.0 {
        x + ln(tau + tb * exp(-x))
    } else {
        ln(tb + tau * exp(x))
    };
    let (ga, fa) = (pow(g, a1), pow(f, a1));
    (ga * l / tb - (ga / tb + fa / tau) * w / a1).max(0.0)
}

fn interior_cell(g: f64, f: f64, alpha: f64, gamma: f64, tau: f64) -> f64 {
    // homogeneous of degree 1 + alpha: rescale so the larger mass is 1
    let s = g.max(f);
    let (g, f) = (g / s, f / s);
    let (a1, c1) = (1.0 + alpha, 1.0 + gamma);
    let tb = 1.0 - tau;
    let mix = tau * pow(g, c1) + tb * pow(f, c1);
    let num = tau * pow(g, a1) + tb * pow(f, a1) - pow(mix, a1 / c1);
    let v = num / (tau * tb * (alpha - gamma));
    pow(s, a1) * v.max(0.0)
}

fn sup_distance(g: &[f64], f: &[f64]) -> f64 {
    g.iter()
        .zip(f)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// GSD between two aligned mass vectors.
pub fn gsd_masses(g: &[f64], f: &[f64], p: &TuningParams) -> Result<f64> {
    if g.len() != f.len() {
        return Err(domain!("mass vectors of different lengths {} and {}", g.len(), f.len()));
    }
    if sup_distance(g, f) <= EQUALITY_TOL {
        return Ok(0.0);
    }
    Kernel::from_params(p).sum(g, f)
}

/// `Q_(alpha, gamma, tau)(g, f)`, dispatching to the analytic limit on the
/// edges `tau ∈ {0, 1}`, `gamma = -1` and `gamma = alpha`.
pub fn gsd(g: &DiscreteDensity, f: &DiscreteDensity, p: &TuningParams) -> Result<f64> {
    let (_, gs, fs) = align(g, f);
    gsd_masses(&gs, &fs, p)
}

/// GSD between two densities tabulated on the same grid, integrated with
/// weight `h`.
pub fn gsd_grid(g: &GridDensity, f: &GridDensity, p: &TuningParams) -> Result<f64> {
    if g.values().len() != f.values().len()
        || g.spacing() != f.spacing()
        || g.origin() != f.origin()
    {
        return Err(domain!("grid densities live on different grids"));
    }
    Ok(g.spacing() * gsd_masses(g.values(), f.values(), p)?)
}

/// The `gamma -> -1` or `gamma -> alpha` limit at an interior `tau`.
pub fn gsd_limit_gamma(
    g: &DiscreteDensity,
    f: &DiscreteDensity,
    alpha: f64,
    tau: f64,
    target: GammaLimit,
) -> Result<f64> {
    if !(LIMIT_EPS..=1.0 - LIMIT_EPS).contains(&tau) {
        return Err(domain!(
            "gamma limits need tau strictly inside (0, 1), got {tau}; use the tau limits"
        ));
    }
    let gamma = match target {
        GammaLimit::ToNegOne => -1.0,
        GammaLimit::ToAlpha => alpha,
    };
    gsd(g, f, &TuningParams::new(alpha, gamma, tau)?)
}

/// The `tau -> 0` and `tau -> 1` edges, S-divergences with
/// `lambda = gamma / (1 - alpha)` and `lambda = (alpha - 1 - gamma) / (1 - alpha)`.
pub fn gsd_limit_tau(
    g: &DiscreteDensity,
    f: &DiscreteDensity,
    alpha: f64,
    gamma: f64,
    target: TauLimit,
) -> Result<f64> {
    if alpha >= 1.0 {
        return Err(domain!("tau limits are indexed by lambda, undefined at alpha = {alpha}"));
    }
    let tau = match target {
        TauLimit::ToZero => 0.0,
        TauLimit::ToOne => 1.0,
    };
    gsd(g, f, &TuningParams::new(alpha, gamma, tau)?)
}

fn check_s_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(domain!("alpha = {alpha} outside [0, 1]"))
    }
}

/// `S_(alpha, A)` between aligned mass vectors, indexed by the exponent `A`
/// (so that `alpha = 1` is reachable).
pub fn s_divergence_masses(g: &[f64], f: &[f64], alpha: f64, a: f64) -> Result<f64> {
    if g.len() != f.len() {
        return Err(domain!("mass vectors of different lengths {} and {}", g.len(), f.len()));
    }
    if !(alpha >= 0.0 && a.is_finite()) {
        return Err(domain!("invalid S-divergence parameters alpha = {alpha}, A = {a}"));
    }
    if sup_distance(g, f) <= EQUALITY_TOL {
        return Ok(0.0);
    }
    Kernel::S { alpha, a }.sum(g, f)
}

/// `S_(alpha, lambda)(g, f)`.
pub fn s_divergence(g: &DiscreteDensity, f: &DiscreteDensity, alpha: f64, lambda: f64) -> Result<f64> {
    check_s_alpha(alpha)?;
    let (a, _) = s_exponents(alpha, lambda);
    let (_, gs, fs) = align(g, f);
    s_divergence_masses(&gs, &fs, alpha, a)
}

/// Named members of the family, each with its own closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceSpec {
    Gsd(TuningParams),
    Sd { alpha: f64, lambda: f64 },
    Pd { lambda: f64 },
    Dpd { alpha: f64 },
    Gkl { tau: f64 },
    Skl { alpha: f64 },
    Sld { alpha: f64 },
    Shd { alpha: f64 },
    Kld,
    Ld,
    Hd,
}

/// Evaluates `spec` through its own closed form rather than through the GSD.
pub fn special_divergence(g: &DiscreteDensity, f: &DiscreteDensity, spec: DivergenceSpec) -> Result<f64> {
    let (_, gs, fs) = align(g, f);
    special_divergence_masses(&gs, &fs, spec)
}

pub fn special_divergence_masses(g: &[f64], f: &[f64], spec: DivergenceSpec) -> Result<f64> {
    if g.len() != f.len() {
        return Err(domain!("mass vectors of different lengths {} and {}", g.len(), f.len()));
    }
    let cells = g.iter().zip(f).map(|(&g, &f)| (g, f));
    match spec {
        DivergenceSpec::Gsd(p) => gsd_masses(g, f, &p),
        DivergenceSpec::Sd { alpha, lambda } => {
            check_s_alpha(alpha)?;
            s_divergence_masses(g, f, alpha, s_exponents(alpha, lambda).0)
        }
        DivergenceSpec::Kld => sum_cells(cells, kld_cell),
        DivergenceSpec::Ld => sum_cells(cells, |g, f| kld_cell(f, g)),
        DivergenceSpec::Skl { alpha } => {
            check_nonneg_alpha(alpha)?;
            sum_cells(cells, |g, f| skl_cell(g, f, alpha))
        }
        DivergenceSpec::Sld { alpha } => {
            check_nonneg_alpha(alpha)?;
            sum_cells(cells, |g, f| skl_cell(f, g, alpha))
        }
        DivergenceSpec::Pd { lambda } => pd(g, f, lambda),
        DivergenceSpec::Dpd { alpha } => {
            check_s_alpha(alpha)?;
            if alpha < LIMIT_EPS {
                return sum_cells(cells, |g, f| kld_cell(f, g));
            }
            sum_cells(cells, |g, f| {
                Ok(pow(f, 1.0 + alpha) - (1.0 + alpha) / alpha * pow(f, alpha) * g
                    + pow(g, 1.0 + alpha) / alpha)
            })
        }
        DivergenceSpec::Gkl { tau } => {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(domain!("GKL needs tau in (0, 1), got {tau}"));
            }
            sum_cells(cells, |g, f| gkl_cell(g, f, tau))
        }
        DivergenceSpec::Shd { alpha } => {
            check_s_alpha(alpha)?;
            let e = (1.0 + alpha) / 2.0;
            sum_cells(cells, |g, f| {
                let d = pow(g, e) - pow(f, e);
                Ok(2.0 / (1.0 + alpha) * d * d)
            })
        }
        DivergenceSpec::Hd => sum_cells(cells, |g, f| {
            let d = sqrt(g) - sqrt(f);
            Ok(2.0 * d * d)
        }),
    }
}

fn check_nonneg_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(domain!("alpha = {alpha} must be a finite non-negative number"))
    }
}

fn sum_cells(cells: impl Iterator<Item = (f64, f64)>, cell: impl Fn(f64, f64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (g, f) in cells {
        total += cell(g, f)?;
    }
    Ok(total)
}

/// `f log(f / g)`.
fn kld_cell(g: f64, f: f64) -> Result<f64> {
    if f > 0.0 && g == 0.0 {
        return Err(domain!("log(f / g) with g = 0 < f = {f}"));
    }
    Ok(xlogy_ratio(f, g))
}

/// `f^{1+a} log(f / g) - (f^{1+a} - g^{1+a}) / (1 + a)`.
fn skl_cell(g: f64, f: f64, alpha: f64) -> Result<f64> {
    let a1 = 1.0 + alpha;
    if f > 0.0 && g == 0.0 {
        return Err(domain!("log(f / g) with g = 0 < f = {f}"));
    }
    let fa = pow(f, a1);
    let log_term = if f == 0.0 { 0.0 } else { fa * (ln(f) - ln(g)) };
    Ok(log_term - (fa - pow(g, a1)) / a1)
}

/// `g / tau_bar log(g / f) - (g / tau_bar + f / tau) log(tau g / f + tau_bar)`.
fn gkl_cell(g: f64, f: f64, tau: f64) -> Result<f64> {
    let tb = 1.0 - tau;
    if g == 0.0 {
        return Ok(-f / tau * ln(tb));
    }
    if f == 0.0 {
        // (g / tb) [log g - log f - log(tau g / f + tb)] -> -(g / tb) log tau
        return Ok(-g / tb * ln(tau));
    }
    Ok(g / tb * ln(g / f) - (g / tb + f / tau) * ln(tau * g / f + tb))
}

/// Cressie-Read `PD_lambda = (1 / (lambda (lambda + 1))) sum g [(g / f)^lambda - 1]`,
/// with the LD and KLD limits at `lambda = 0` and `lambda = -1`.
fn pd(g: &[f64], f: &[f64], lambda: f64) -> Result<f64> {
    let cells = g.iter().zip(f).map(|(&g, &f)| (g, f));
    if lambda.abs() < LIMIT_EPS {
        return sum_cells(cells, |g, f| kld_cell(f, g));
    }
    if (lambda + 1.0).abs() < LIMIT_EPS {
        return sum_cells(cells, kld_cell);
    }
    let scale = lambda * (lambda + 1.0);
    sum_cells(cells, |g, f| {
        if g == 0.0 {
            return if lambda > -1.0 || f == 0.0 {
                Ok(0.0)
            } else {
                Err(domain!("PD with lambda = {lambda} is infinite where g = 0 < f = {f}"))
            };
        }
        if f == 0.0 {
            return if lambda < 0.0 {
                Ok(-g / scale)
            } else {
                Err(domain!("PD with lambda = {lambda} is infinite where f = 0 < g = {g}"))
            };
        }
        Ok(g * expm1(lambda * (ln(g) - ln(f))) / scale)
    })
}

/// The residual adjustment `C(delta)`: the GSD integrand at `g = (1 + delta) f`
/// divided by `f^{1+alpha}`.
pub fn c_residual(delta: f64, p: &TuningParams) -> Result<f64> {
    if delta.is_nan() || delta < -1.0 || delta.is_infinite() {
        return Err(domain!("Pearson residual {delta} below -1"));
    }
    Kernel::from_params(p).cell(1.0 + delta, 1.0)
}

/// Aligned mass vectors, for callers assembling their own sums.
pub fn aligned_masses(g: &DiscreteDensity, f: &DiscreteDensity) -> (i64, Vec<f64>, Vec<f64>) {
    align(g, f)
}
