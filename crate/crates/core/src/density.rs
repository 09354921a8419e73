//! Mass functions on integer windows and density values on uniform real grids.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};

/// Slack allowed above total mass one.
pub const NORM_EPS: f64 = 1e-9;

/// Non-negative mass function on the integer window
/// `support_start ..= support_start + masses.len() - 1`; zero elsewhere.
///
/// `tail_bound` is the mass known to be cut away by truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity {
    support_start: i64,
    masses: Vec<f64>,
    tail_bound: f64,
}

impl DiscreteDensity {
    /// A probability mass function: masses must sum to a value in
    /// `[1 - tail_bound - NORM_EPS, 1 + NORM_EPS]`.
    pub fn new(support_start: i64, masses: Vec<f64>, tail_bound: f64) -> Result<Self> {
        let d = Self::unnormalized(support_start, masses)?;
        if !(0.0..1.0).contains(&tail_bound) {
            return Err(domain!("tail bound {tail_bound} outside [0, 1)"));
        }
        let total = d.total_mass();
        if total > 1.0 + NORM_EPS || total < 1.0 - tail_bound - NORM_EPS {
            return Err(domain!(
                "masses sum to {total}, expected [{}, {}]",
                1.0 - tail_bound,
                1.0 + NORM_EPS
            ));
        }
        Ok(Self { tail_bound, ..d })
    }

    /// Any finite non-negative mass function, without a normalization check.
    pub fn unnormalized(support_start: i64, masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::EmptyData);
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
        {
            return Err(domain!(
                "mass {m} at x = {} is not a finite non-negative number",
                support_start + i as i64
            ));
        }
        Ok(Self {
            support_start,
            masses,
            tail_bound: 0.0,
        })
    }

    /// Unit mass at `x`.
    pub fn point_mass(x: i64) -> Self {
        Self {
            support_start: x,
            masses: vec![1.0],
            tail_bound: 0.0,
        }
    }

    pub fn support_start(&self) -> i64 {
        self.support_start
    }

    /// Last point of the window (inclusive).
    pub fn support_end(&self) -> i64 {
        self.support_start + self.masses.len() as i64 - 1
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn get(&self, x: i64) -> f64 {
        if x < self.support_start || x > self.support_end() {
            0.0
        } else {
            self.masses[(x - self.support_start) as usize]
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        let total = self.total_mass();
        self.iter().map(|(x, m)| x as f64 * m).sum::<f64>() / total
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .map(move |(i, &m)| (self.support_start + i as i64, m))
    }

    /// Largest pointwise difference, treating both as zero outside their windows.
    pub fn sup_distance(&self, other: &DiscreteDensity) -> f64 {
        let (_, a, b) = align(self, other);
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// `(1 - eps) self + eps * point_mass(y)`.
    pub fn contaminate(&self, eps: f64, y: i64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(domain!("contamination weight {eps} outside [0, 1]"));
        }
        let start = self.support_start.min(y);
        let end = self.support_end().max(y);
        let masses = (start..=end)
            .map(|x| (1.0 - eps) * self.get(x) + if x == y { eps } else { 0.0 })
            .collect();
        Ok(Self {
            support_start: start,
            masses,
            tail_bound: (1.0 - eps) * self.tail_bound,
        })
    }
}

/// Zero-padded copies of two densities over the union of their windows.
pub fn align(g: &DiscreteDensity, f: &DiscreteDensity) -> (i64, Vec<f64>, Vec<f64>) {
    let start = g.support_start.min(f.support_start);
    let end = g.support_end().max(f.support_end());
    let gs = (start..=end).map(|x| g.get(x)).collect();
    let fs = (start..=end).map(|x| f.get(x)).collect();
    (start, gs, fs)
}

/// Density values on the uniform grid `origin + i * h`, integrated by
/// Riemann sums with weight `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    origin: f64,
    h: f64,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(origin: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(domain!("grid spacing {h} must be positive"));
        }
        if values.is_empty() {
            return Err(Error::EmptyData);
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain!("grid density values must be finite and non-negative"));
        }
        Ok(Self { origin, h, values })
    }

    /// Tabulates `density` on `origin + i h` for `i in 0..len`.
    pub fn tabulate(origin: f64, h: f64, len: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..len).map(|i| density(origin + i as f64 * h)).collect();
        Self::new(origin, h, values)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.h
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h
    }

    /// Cell masses `value * h` indexed by grid position.
    pub fn to_masses(&self) -> Result<DiscreteDensity> {
        DiscreteDensity::unnormalized(0, self.values.iter().map(|v| v * self.h).collect())
    }
}
