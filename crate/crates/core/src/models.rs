//! Parametric families `theta -> f_theta` with analytic scores.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_core::RngCore;

use crate::density::{DiscreteDensity, GridDensity};
use crate::error::{domain, Result};
use crate::math::{ceil, exp, floor, lgamma, ln, sqrt};

/// Tail mass a model window may leave out.
pub const DEFAULT_TAIL: f64 = 1e-12;

/// Uniform draw on `[0, 1)` from the top 53 bits of one `u64`.
pub fn uniform(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A family of mass functions on the integers indexed by `theta ∈ R^p`.
pub trait ParametricModel {
    /// Number of parameters `p`.
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    fn check_theta(&self, theta: &[f64]) -> Result<()>;

    /// Inclusive integer window holding all but at most `tail` of the mass.
    fn window(&self, theta: &[f64], tail: f64) -> Result<(i64, i64)>;

    fn pmf(&self, theta: &[f64], x: i64) -> f64;

    /// `u_theta(x)`, the gradient of `log f_theta(x)`, written into `out` (length `p`).
    fn score(&self, theta: &[f64], x: i64, out: &mut [f64]);

    /// `∇u_theta(x)`, row-major `p × p`.
    fn score_gradient(&self, theta: &[f64], x: i64, out: &mut [f64]);

    /// One draw, consuming a fixed number of uniforms per call.
    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> i64;

    /// Search box for the minimizer given the data density, one interval per parameter.
    fn default_bracket(&self, data: &DiscreteDensity) -> Vec<(f64, f64)>;

    fn sample_n(&self, theta: &[f64], n: usize, rng: &mut dyn RngCore) -> Vec<i64> {
        (0..n).map(|_| self.sample(theta, rng)).collect()
    }

    /// `f_theta` tabulated over its window.
    fn density(&self, theta: &[f64], tail: f64) -> Result<DiscreteDensity> {
        self.check_theta(theta)?;
        let (lo, hi) = self.window(theta, tail)?;
        DiscreteDensity::unnormalized(lo, (lo..=hi).map(|x| self.pmf(theta, x)).collect())
    }
}

fn scalar(theta: &[f64], what: &str) -> Result<f64> {
    match theta {
        [t] if t.is_finite() => Ok(*t),
        _ => Err(domain!("{what} takes one finite parameter, got {theta:?}")),
    }
}

fn ln_choose(m: u64, x: u64) -> f64 {
    lgamma(m as f64 + 1.0) - lgamma(x as f64 + 1.0) - lgamma((m - x) as f64 + 1.0)
}

/// Inversion over `lo..=hi`; the last point absorbs any remaining mass.
fn invert(u: f64, lo: i64, hi: i64, pmf: impl Fn(i64) -> f64) -> i64 {
    let mut cdf = 0.0;
    for x in lo..hi {
        cdf += pmf(x);
        if u < cdf {
            return x;
        }
    }
    hi
}

/// Poisson with mean `theta > 0`; `u(x) = x / theta - 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Poisson;

impl Poisson {
    fn mean(theta: &[f64]) -> Result<f64> {
        let t = scalar(theta, "poisson")?;
        if t <= 0.0 {
            return Err(domain!("poisson mean must be positive, got {t}"));
        }
        Ok(t)
    }

    fn log_pmf(t: f64, x: i64) -> f64 {
        x as f64 * ln(t) - t - lgamma(x as f64 + 1.0)
    }
}

impl ParametricModel for Poisson {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "poisson"
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        Self::mean(theta).map(|_| ())
    }

    fn window(&self, theta: &[f64], tail: f64) -> Result<(i64, i64)> {
        let t = Self::mean(theta)?;
        // past the mode the terms fall geometrically with ratio t / (x + 2)
        let mut x = ceil(t) as i64;
        loop {
            let ratio = t / (x as f64 + 2.0);
            if ratio < 1.0 && exp(Self::log_pmf(t, x + 1)) / (1.0 - ratio) < tail {
                return Ok((0, x));
            }
            x += 1;
        }
    }

    fn pmf(&self, theta: &[f64], x: i64) -> f64 {
        if x < 0 {
            return 0.0;
        }
        exp(Self::log_pmf(theta[0], x))
    }

    fn score(&self, theta: &[f64], x: i64, out: &mut [f64]) {
        out[0] = x as f64 / theta[0] - 1.0;
    }

    fn score_gradient(&self, theta: &[f64], x: i64, out: &mut [f64]) {
        out[0] = -(x as f64) / (theta[0] * theta[0]);
    }

    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> i64 {
        let u = uniform(rng);
        let t = theta[0];
        let (_, hi) = self.window(theta, DEFAULT_TAIL).expect("valid poisson mean");
        // p(x + 1) = p(x) t / (x + 1), started in log space
        let mut p = exp(-t);
        let mut cdf = 0.0;
        for x in 0..hi {
            cdf += p;
            if u < cdf {
                return x;
            }
            p *= t / (x as f64 + 1.0);
        }
        hi
    }

    fn default_bracket(&self, data: &DiscreteDensity) -> Vec<(f64, f64)> {
        let m = data.mean().max(0.0);
        vec![((0.5 * m).max(1e-3), 2.0 * m + 1.0)]
    }
}

/// Geometric on `{0, 1, ...}` with success probability `p = theta`:
/// `f(x) = p (1 - p)^x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Geometric;

impl Geometric {
    fn prob(theta: &[f64]) -> Result<f64> {
        let p = scalar(theta, "geometric")?;
        if !(p > 0.0 && p < 1.0) {
            return Err(domain!("geometric probability must lie in (0, 1), got {p}"));
        }
        Ok(p)
    }
}

impl ParametricModel for Geometric {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "geometric"
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        Self::prob(theta).map(|_| ())
    }

    fn window(&self, theta: &[f64], tail: f64) -> Result<(i64, i64)> {
        let p = Self::prob(theta)?;
        // P(X > x) = (1 - p)^{x + 1}
        let x = ceil(ln(tail) / ln(1.0 - p)) as i64 - 1;
        Ok((0, x.max(0)))
    }

    fn pmf(&self, theta: &[f64], x: i64) -> f64 {
        if x < 0 {
            return 0.0;
        }
        let p = theta[0];
        p * exp(x as f64 * ln(1.0 - p))
    }

    fn score(&self, theta: &[f64], x: i64, out: &mut [f64]) {
        let p = theta[0];
        out[0] = 1.0 / p - x as f64 / (1.0 - p);
    }

    fn score_gradient(&self, theta: &[f64], x: i64, out: &mut [f64]) {
        let p = theta[0];
        out[0] = -1.0 / (p * p) - x as f64 / ((1.0 - p) * (1.0 - p));
    }

    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> i64 {
        let u = uniform(rng);
        floor(ln(1.0 - u) / ln(1.0 - theta[0])) as i64
    }

    fn default_bracket(&self, _data: &DiscreteDensity) -> Vec<(f64, f64)> {
        vec![(1e-4, 1.0 - 1e-4)]
    }
}

/// Binomial with `m` trials and success probability `theta`.
#[derive(Debug, Clone, Copy)]
pub struct Binomial {
    m: u64,
}

impl Binomial {
    pub fn new(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(domain!("binomial needs at least one trial"));
        }
        Ok(Self { m })
    }

    pub fn trials(&self) -> u64 {
        self.m
    }

    fn prob(theta: &[f64]) -> Result<f64> {
        let p = scalar(theta, "binomial")?;
        if !(p > 0.0 && p < 1.0) {
            return Err(domain!("binomial probability must lie in (0, 1), got {p}"));
        }
        Ok(p)
    }
}

impl ParametricModel for Binomial {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "binomial"
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        Self::prob(theta).map(|_| ())
    }

    fn window(&self, theta: &[f64], _tail: f64) -> Result<(i64, i64)> {
        Self::prob(theta)?;
        Ok((0, self.m as i64))
    }

    fn pmf(&self, theta: &[f64], x: i64) -> f64 {
        if x < 0 || x as u64 > self.m {
            return 0.0;
        }
        let p = theta[0];
        let x = x as u64;
        exp(ln_choose(self.m, x) + x as f64 * ln(p) + (self.m - x) as f64 * ln(1.0 - p))
    }

    fn score(&self, theta: &[f64], x: i64, out: &mut [f64]) {
        let p = theta[0];
        out[0] = x as f64 / p - (self.m as f64 - x as f64) / (1.0 - p);
    }

    fn score_gradient(&self, theta: &[f64], x: i64, out: &mut [f64]) {
        let p = theta[0];
        out[0] = -(x as f64) / (p * p) - (self.m as f64 - x as f64) / ((1.0 - p) * (1.0 - p));
    }

    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> i64 {
        let u = uniform(rng);
        invert(u, 0, self.m as i64, |x| self.pmf(theta, x))
    }

    fn default_bracket(&self, _data: &DiscreteDensity) -> Vec<(f64, f64)> {
        vec![(1e-4, 1.0 - 1e-4)]
    }
}

/// Normal location model `N(theta, sigma^2)` discretized on the grid
/// `origin + i h`, `i = 0..len`. Support point `i` carries mass `phi(x_i) h`.
#[derive(Debug, Clone, Copy)]
pub struct NormalGrid {
    sigma: f64,
    origin: f64,
    h: f64,
    len: usize,
}

impl NormalGrid {
    /// Grid covering `[lo, hi]` with spacing `h`.
    pub fn new(sigma: f64, lo: f64, hi: f64, h: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain!("normal scale must be positive, got {sigma}"));
        }
        if !(h > 0.0 && hi > lo && h.is_finite() && lo.is_finite() && hi.is_finite()) {
            return Err(domain!("invalid grid [{lo}, {hi}] with spacing {h}"));
        }
        let len = floor((hi - lo) / h + 0.5) as usize + 1;
        Ok(Self {
            sigma,
            origin: lo,
            h,
            len,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point(&self, i: i64) -> f64 {
        self.origin + i as f64 * self.h
    }

    /// Nearest grid index to `x`, clamped to the grid.
    pub fn index_of(&self, x: f64) -> i64 {
        let i = floor((x - self.origin) / self.h + 0.5) as i64;
        i.clamp(0, self.len as i64 - 1)
    }

    pub fn density_value(&self, theta: f64, x: f64) -> f64 {
        let z = (x - theta) / self.sigma;
        exp(-0.5 * z * z) / (self.sigma * sqrt(2.0 * PI))
    }

    /// Density values (not masses) of `N(theta, sigma^2)` on the grid.
    pub fn grid_density(&self, theta: f64) -> Result<GridDensity> {
        GridDensity::tabulate(self.origin, self.h, self.len, |x| self.density_value(theta, x))
    }
}

impl ParametricModel for NormalGrid {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "normal-grid"
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        scalar(theta, "normal-grid").map(|_| ())
    }

    fn window(&self, theta: &[f64], _tail: f64) -> Result<(i64, i64)> {
        self.check_theta(theta)?;
        Ok((0, self.len as i64 - 1))
    }

    fn pmf(&self, theta: &[f64], x: i64) -> f64 {
        if x < 0 || x >= self.len as i64 {
            return 0.0;
        }
        self.density_value(theta[0], self.point(x)) * self.h
    }

    fn score(&self, theta: &[f64], x: i64, out: &mut [f64]) {
        out[0] = (self.point(x) - theta[0]) / (self.sigma * self.sigma);
    }

    fn score_gradient(&self, _theta: &[f64], _x: i64, out: &mut [f64]) {
        out[0] = -1.0 / (self.sigma * self.sigma);
    }

    /// Box-Muller (two uniforms), rounded to the nearest grid point.
    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> i64 {
        let u1 = uniform(rng);
        let u2 = uniform(rng);
        let z = sqrt(-2.0 * ln(1.0 - u1)) * libm::cos(2.0 * PI * u2);
        self.index_of(theta[0] + self.sigma * z)
    }

    fn default_bracket(&self, data: &DiscreteDensity) -> Vec<(f64, f64)> {
        let total = data.total_mass();
        let m = data.iter().map(|(i, w)| self.point(i) * w).sum::<f64>() / total;
        vec![(m - 4.0 * self.sigma, m + 4.0 * self.sigma)]
    }
}

/// A family with a single member and no parameters.
#[derive(Debug, Clone)]
pub struct Fixed {
    f: DiscreteDensity,
}

impl Fixed {
    pub fn new(f: DiscreteDensity) -> Self {
        Self { f }
    }

    pub fn member(&self) -> &DiscreteDensity {
        &self.f
    }
}

impl ParametricModel for Fixed {
    fn dim(&self) -> usize {
        0
    }

    fn name(&self) -> &str {
        "fixed"
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.is_empty() {
            Ok(())
        } else {
            Err(domain!("a fixed model takes no parameters, got {theta:?}"))
        }
    }

    fn window(&self, _theta: &[f64], _tail: f64) -> Result<(i64, i64)> {
        Ok((self.f.support_start(), self.f.support_end()))
    }

    fn pmf(&self, _theta: &[f64], x: i64) -> f64 {
        self.f.get(x)
    }

    fn score(&self, _theta: &[f64], _x: i64, _out: &mut [f64]) {}

    fn score_gradient(&self, _theta: &[f64], _x: i64, _out: &mut [f64]) {}

    fn sample(&self, _theta: &[f64], rng: &mut dyn RngCore) -> i64 {
        let u = uniform(rng) * self.f.total_mass();
        invert(u, self.f.support_start(), self.f.support_end(), |x| self.f.get(x))
    }

    fn default_bracket(&self, _data: &DiscreteDensity) -> Vec<(f64, f64)> {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score_mean(model: &dyn ParametricModel, theta: f64) -> f64 {
        let (lo, hi) = model.window(&[theta], DEFAULT_TAIL).unwrap();
        let mut u = [0.0];
        (lo..=hi)
            .map(|x| {
                model.score(&[theta], x, &mut u);
                u[0] * model.pmf(&[theta], x)
            })
            .sum()
    }

    #[test]
    fn pmf_values() {
        let direct = exp(-5.0) * 3125.0 / 120.0;
        assert!((Poisson.pmf(&[5.0], 5) - direct).abs() < 1e-14);
        assert!((Geometric.pmf(&[0.5], 0) - 0.5).abs() < 1e-15);
        let b = Binomial::new(10).unwrap();
        assert!((b.pmf(&[0.5], 5) - 252.0 / 1024.0).abs() < 1e-14);
        assert_eq!(Poisson.pmf(&[5.0], -1), 0.0);
    }

    #[test]
    fn windows_hold_the_mass() {
        for t in [0.1, 1.0, 5.0, 37.5] {
            let d = Poisson.density(&[t], DEFAULT_TAIL).unwrap();
            assert!(d.total_mass() >= 1.0 - 1e-12, "{t}: {}", d.total_mass());
        }
        let d = Geometric.density(&[0.3], DEFAULT_TAIL).unwrap();
        assert!(d.total_mass() >= 1.0 - 1e-12);
    }

    #[test]
    fn scores_have_mean_zero() {
        assert!(score_mean(&Poisson, 5.0).abs() < 1e-10);
        assert!(score_mean(&Geometric, 0.3).abs() < 1e-10);
        assert!(score_mean(&Binomial::new(12).unwrap(), 0.35).abs() < 1e-10);
    }

    #[test]
    fn normal_grid_quadrature() {
        let m = NormalGrid::new(1.0, -8.0, 8.0, 0.01).unwrap();
        let d = m.density(&[0.0], DEFAULT_TAIL).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-6);
        assert!(score_mean(&m, 0.0).abs() < 1e-6);
        let mut u = [0.0];
        let info: f64 = d
            .iter()
            .map(|(x, w)| {
                m.score(&[0.0], x, &mut u);
                u[0] * u[0] * w
            })
            .sum();
        assert!((info - 1.0).abs() < 1e-4);
        assert!(NormalGrid::new(0.0, -1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Poisson.check_theta(&[0.0]).is_err());
        assert!(Poisson.check_theta(&[1.0, 2.0]).is_err());
        assert!(Geometric.check_theta(&[1.0]).is_err());
        assert!(Binomial::new(0).is_err());
    }
}
