//! Closed forms written out term by term, independent of the library code paths.
#![allow(dead_code)]

use gsd_core::DiscreteDensity;
use proptest::prelude::*;

pub fn poisson_pmf(theta: f64, x: usize) -> f64 {
    // product form, no log-gamma
    let mut p = (-theta).exp();
    for k in 1..=x {
        p *= theta / k as f64;
    }
    p
}

pub fn poisson(theta: f64, len: usize) -> Vec<f64> {
    (0..len).map(|x| poisson_pmf(theta, x)).collect()
}

pub fn dens(m: &[f64]) -> DiscreteDensity {
    DiscreteDensity::unnormalized(0, m.to_vec()).unwrap()
}

/// GSD integrand in the `f^{1+alpha} * (g/f)` form, all cells positive.
pub fn gsd_direct(g: &[f64], f: &[f64], a: f64, gm: f64, t: f64) -> f64 {
    let tb = 1.0 - t;
    g.iter()
        .zip(f)
        .map(|(&g, &f)| {
            let r = g / f;
            let first = t * r.powf(1.0 + a) + tb;
            let second = (t * r.powf(1.0 + gm) + tb).powf((1.0 + a) / (1.0 + gm));
            (first - second) * f.powf(1.0 + a) / (t * tb * (a - gm))
        })
        .sum()
}

/// S-divergence with `A = 1 + lambda (1 - alpha)`, `B = alpha - lambda (1 - alpha)`.
pub fn sd(g: &[f64], f: &[f64], alpha: f64, lambda: f64) -> f64 {
    let a = 1.0 + lambda * (1.0 - alpha);
    let b = alpha - lambda * (1.0 - alpha);
    g.iter()
        .zip(f)
        .map(|(&g, &f)| f.powf(1.0 + alpha) / a - (1.0 + alpha) / (a * b) * f.powf(b) * g.powf(a) + g.powf(1.0 + alpha) / b)
        .sum()
}

pub fn kld(g: &[f64], f: &[f64]) -> f64 {
    g.iter().zip(f).map(|(&g, &f)| f * (f / g).ln()).sum()
}

pub fn ld(g: &[f64], f: &[f64]) -> f64 {
    kld(f, g)
}

pub fn skl(g: &[f64], f: &[f64], alpha: f64) -> f64 {
    g.iter()
        .zip(f)
        .map(|(&g, &f)| f.powf(1.0 + alpha) * (f / g).ln() - (f.powf(1.0 + alpha) - g.powf(1.0 + alpha)) / (1.0 + alpha))
        .sum()
}

pub fn sld(g: &[f64], f: &[f64], alpha: f64) -> f64 {
    g.iter()
        .zip(f)
        .map(|(&g, &f)| g.powf(1.0 + alpha) * (g / f).ln() - (g.powf(1.0 + alpha) - f.powf(1.0 + alpha)) / (1.0 + alpha))
        .sum()
}

pub fn gkl(g: &[f64], f: &[f64], tau: f64) -> f64 {
    let tb = 1.0 - tau;
    g.iter()
        .zip(f)
        .map(|(&g, &f)| g / tb * (g / f).ln() - (g / tb + f / tau) * (tau * g / f + tb).ln())
        .sum()
}

pub fn pd(g: &[f64], f: &[f64], lambda: f64) -> f64 {
    g.iter()
        .zip(f)
        .map(|(&g, &f)| g * ((g / f).powf(lambda) - 1.0))
        .sum::<f64>()
        / (lambda * (lambda + 1.0))
}

pub fn dpd(g: &[f64], f: &[f64], alpha: f64) -> f64 {
    g.iter()
        .zip(f)
        .map(|(&g, &f)| f.powf(1.0 + alpha) - (1.0 + alpha) / alpha * f.powf(alpha) * g + g.powf(1.0 + alpha) / alpha)
        .sum()
}

pub fn shd(g: &[f64], f: &[f64], alpha: f64) -> f64 {
    let e = (1.0 + alpha) / 2.0;
    g.iter()
        .zip(f)
        .map(|(&g, &f)| 2.0 / (1.0 + alpha) * (g.powf(e) - f.powf(e)).powi(2))
        .sum()
}

pub fn hd(g: &[f64], f: &[f64]) -> f64 {
    g.iter().zip(f).map(|(&g, &f)| 2.0 * (g.sqrt() - f.sqrt()).powi(2)).sum()
}

/// `gamma -> alpha` edge, written as a sum of two integrals.
pub fn gamma_alpha(g: &[f64], f: &[f64], alpha: f64, tau: f64) -> f64 {
    let tb = 1.0 - tau;
    let a1 = 1.0 + alpha;
    let first: f64 = g.iter().zip(f).map(|(&g, &f)| g.powf(a1) / tb * (g / f).ln()).sum();
    let second: f64 = g
        .iter()
        .zip(f)
        .map(|(&g, &f)| (g.powf(a1) / tb + f.powf(a1) / tau) * (tau * (g / f).powf(a1) + tb).ln())
        .sum();
    first - second / a1
}

/// Normalized strictly positive mass vector of length `len`.
pub fn positive_density(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Normalized density whose cells stay within a factor 3 of uniform.
pub fn mild_density(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..1.5, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
