//! Seeded Monte Carlo bias/MSE study of the minimum GSD estimators.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `r`,
//! so each sample depends only on `(seed, r)`. Every cell of a grid sees the
//! same samples, and per-cell sums run in replication order, which keeps the
//! output independent of the thread count.

use gsd_core::mat::fit_at_tau;
use gsd_core::robustness::MOMENT_TAIL;
use gsd_core::{asymptotic_variance, relative_frequency, FitOptions, ParametricModel, TuningParams};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{model_from_id, BoxedModel};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("all {reps} replications failed for alpha = {alpha}, gamma = {gamma}, tau = {tau}")]
    AllFailed { alpha: f64, gamma: f64, tau: f64, reps: usize },
    #[error(transparent)]
    Core(#[from] gsd_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ContaminationMode {
    /// Exactly `ceil(rate * n)` distinct positions are replaced.
    #[default]
    Fixed,
    /// Each position is replaced independently with probability `rate`.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contamination {
    pub dist: String,
    pub param: f64,
    pub rate: f64,
    #[serde(default)]
    pub mode: ContaminationMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub reps: usize,
    pub true_theta: f64,
    pub model: String,
    #[serde(default)]
    pub contamination: Option<Contamination>,
    pub param_grid: Vec<GridPoint>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub bias: f64,
    pub mse: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedCell {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTable {
    pub cells: Vec<CellSummary>,
    pub skipped: Vec<SkippedCell>,
}

impl SimTable {
    pub fn get(&self, alpha: f64, gamma: f64, tau: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.alpha == alpha && c.gamma == gamma && c.tau == tau)
    }

    /// `alpha,gamma,tau,bias,mse,failures`, one row per evaluated cell.
    /// Cells where every replication failed carry `NaN` bias and MSE.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["alpha", "gamma", "tau", "bias", "mse", "failures"]).unwrap();
        for c in &self.cells {
            w.write_record([
                crate::io::fmt_param(c.alpha),
                crate::io::fmt_param(c.gamma),
                crate::io::fmt_param(c.tau),
                crate::io::fmt_value(c.bias),
                crate::io::fmt_value(c.mse),
                c.failures.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field, reason: String| Err(SimError::Config { field, reason });
        if self.n == 0 {
            return bad("n", "must be at least 1".into());
        }
        if self.reps == 0 {
            return bad("reps", "must be at least 1".into());
        }
        if self.param_grid.is_empty() {
            return bad("param_grid", "must not be empty".into());
        }
        let model = model_from_id(&self.model).map_err(|e| SimError::Config { field: "model", reason: e })?;
        if let Err(e) = model.check_theta(&[self.true_theta]) {
            return bad("true_theta", e.to_string());
        }
        if let Some(c) = &self.contamination {
            if !(0.0..1.0).contains(&c.rate) {
                return bad("contamination.rate", format!("{} is outside [0, 1)", c.rate));
            }
            let m = model_from_id(&c.dist).map_err(|e| SimError::Config {
                field: "contamination.dist",
                reason: e,
            })?;
            if let Err(e) = m.check_theta(&[c.param]) {
                return bad("contamination.param", e.to_string());
            }
        }
        for g in &self.param_grid {
            if let Err(e) = TuningParams::new(g.alpha, g.gamma, g.tau) {
                return bad("param_grid", e.to_string());
            }
        }
        Ok(())
    }

    /// The grid and design behind the two published tables: Poisson(5),
    /// `n = 50`, 1000 replications; table 3 adds contamination by Poisson(15)
    /// at rate 0.1, drawn per observation.
    pub fn preset(table: u8, seed: u64) -> Option<Self> {
        let last = match table {
            2 => (1.0, 1.5),
            3 => (1.0, 1.0),
            _ => return None,
        };
        let mut rows = Vec::new();
        for gamma in [0.0, -0.3, -0.5, -1.0, 0.5, 1.0, 1.5] {
            for alpha in [0.0, 0.1, 0.25, 0.5] {
                rows.push((alpha, gamma));
            }
        }
        rows.push(last);
        let param_grid = rows
            .into_iter()
            .flat_map(|(alpha, gamma)| [0.0, 0.1, 0.3, 0.5, 0.7].map(|tau| GridPoint { alpha, gamma, tau }))
            .collect();
        let contamination = (table == 3).then(|| Contamination {
            dist: "poisson".into(),
            param: 15.0,
            rate: 0.1,
            mode: ContaminationMode::Bernoulli,
        });
        Some(Self {
            n: 50,
            reps: 1000,
            true_theta: 5.0,
            model: "poisson".into(),
            contamination,
            param_grid,
            seed,
        })
    }
}

/// Replaces entries of `sample` by draws from `sampler` at `theta`.
pub fn contaminate<R: Rng>(
    sample: &mut [i64],
    rate: f64,
    mode: ContaminationMode,
    sampler: &dyn ParametricModel,
    theta: &[f64],
    rng: &mut R,
) {
    let n = sample.len();
    match mode {
        ContaminationMode::Fixed => {
            let k = ((rate * n as f64) - 1e-9).ceil().max(0.0) as usize;
            for i in index::sample(rng, n, k.min(n)).into_vec() {
                sample[i] = sampler.sample(theta, rng);
            }
        }
        ContaminationMode::Bernoulli => {
            for x in sample.iter_mut() {
                if rng.random::<f64>() < rate {
                    *x = sampler.sample(theta, rng);
                }
            }
        }
    }
}

pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

struct Design {
    model: BoxedModel,
    contam: Option<(BoxedModel, Contamination)>,
}

fn design(cfg: &SimConfig) -> Result<Design, SimError> {
    cfg.validate()?;
    let model = model_from_id(&cfg.model).expect("validated");
    let contam = cfg
        .contamination
        .as_ref()
        .map(|c| (model_from_id(&c.dist).expect("validated"), c.clone()));
    Ok(Design { model, contam })
}

/// Replication `rep` of the configured design.
pub fn draw_sample(cfg: &SimConfig, rep: usize) -> Result<Vec<i64>, SimError> {
    let d = design(cfg)?;
    Ok(draw(&d, cfg, rep))
}

fn draw(d: &Design, cfg: &SimConfig, rep: usize) -> Vec<i64> {
    let mut rng = replication_rng(cfg.seed, rep);
    let mut sample = d.model.sample_n(&[cfg.true_theta], cfg.n, &mut rng);
    if let Some((m, c)) = &d.contam {
        contaminate(&mut sample, c.rate, c.mode, m.as_ref(), &[c.param], &mut rng);
    }
    sample
}

fn fit_one(sample: &[i64], model: &dyn ParametricModel, g: GridPoint, opts: &FitOptions) -> Option<f64> {
    let r = relative_frequency(sample).ok()?;
    let fit = fit_at_tau(&r, model, g.alpha, g.gamma, g.tau, opts).ok()?;
    (fit.converged && fit.theta_hat[0].is_finite()).then(|| fit.theta_hat[0])
}

fn summarize(g: GridPoint, truth: f64, estimates: &[Option<f64>]) -> Result<CellSummary, SimError> {
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(SimError::AllFailed {
            alpha: g.alpha,
            gamma: g.gamma,
            tau: g.tau,
            reps: estimates.len(),
        });
    }
    let m = ok.len() as f64;
    let bias = ok.iter().map(|t| t - truth).sum::<f64>() / m;
    let mse = ok.iter().map(|t| (t - truth) * (t - truth)).sum::<f64>() / m;
    Ok(CellSummary {
        alpha: g.alpha,
        gamma: g.gamma,
        tau: g.tau,
        bias,
        mse,
        failures: estimates.len() - ok.len(),
    })
}

/// Bias and MSE of one estimator over the configured replications; failed or
/// non-converged fits are left out and counted.
pub fn run_cell(cfg: &SimConfig, p: &TuningParams) -> Result<CellSummary, SimError> {
    let d = design(cfg)?;
    let g = GridPoint {
        alpha: p.alpha(),
        gamma: p.gamma(),
        tau: p.tau(),
    };
    let opts = FitOptions::default();
    let estimates: Vec<Option<f64>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| fit_one(&draw(&d, cfg, r), d.model.as_ref(), g, &opts))
        .collect();
    summarize(g, cfg.true_theta, &estimates)
}

/// Cells left blank in the published tables.
pub fn skip_reason(g: &GridPoint) -> Option<&'static str> {
    if g.tau == 0.0 && g.alpha == 1.0 {
        Some("alpha = 1 with tau = 0 is not reported")
    } else if g.tau == 0.0 && g.alpha == 0.0 && g.gamma == -1.0 {
        Some("alpha = 0, gamma = -1, tau = 0 is not reported")
    } else {
        None
    }
}

/// Runs every grid point on the same replications. Cells in which every fit
/// failed are kept with `NaN` bias and MSE and `failures = reps`.
pub fn run_table(cfg: &SimConfig) -> Result<SimTable, SimError> {
    let d = design(cfg)?;
    let samples: Vec<Vec<i64>> = (0..cfg.reps).into_par_iter().map(|r| draw(&d, cfg, r)).collect();
    let opts = FitOptions::default();
    let mut skipped = Vec::new();
    let mut todo = Vec::new();
    for g in &cfg.param_grid {
        match skip_reason(g) {
            Some(reason) => skipped.push(SkippedCell {
                alpha: g.alpha,
                gamma: g.gamma,
                tau: g.tau,
                reason: reason.into(),
            }),
            None => todo.push(*g),
        }
    }
    let cells = todo
        .par_iter()
        .map(|&g| {
            let est: Vec<Option<f64>> = samples.par_iter().map(|s| fit_one(s, d.model.as_ref(), g, &opts)).collect();
            match summarize(g, cfg.true_theta, &est) {
                Ok(c) => c,
                Err(_) => CellSummary {
                    alpha: g.alpha,
                    gamma: g.gamma,
                    tau: g.tau,
                    bias: f64::NAN,
                    mse: f64::NAN,
                    failures: cfg.reps,
                },
            }
        })
        .collect();
    Ok(SimTable { cells, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingCheck {
    /// `n` times the empirical variance of the estimates.
    pub n_var: f64,
    /// Model sandwich `J^{-1} V J^{-1}`.
    pub avar: f64,
    /// Skewness of `sqrt(n) (theta_hat - theta)`.
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub failures: usize,
}

/// Compares the spread of the estimator at the model with its asymptotic variance.
pub fn sampling_distribution_check(
    model: &(dyn ParametricModel + Sync),
    theta: f64,
    p: &TuningParams,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<SamplingCheck, SimError> {
    let opts = FitOptions::default();
    let g = GridPoint {
        alpha: p.alpha(),
        gamma: p.gamma(),
        tau: p.tau(),
    };
    let est: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r);
            fit_one(&model.sample_n(&[theta], n, &mut rng), model, g, &opts)
        })
        .collect();
    let ok: Vec<f64> = est.iter().flatten().copied().collect();
    if ok.len() < 2 {
        return Err(SimError::AllFailed {
            alpha: g.alpha,
            gamma: g.gamma,
            tau: g.tau,
            reps,
        });
    }
    let m = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / m;
    let central = |k: i32| ok.iter().map(|t| (t - mean).powi(k)).sum::<f64>() / m;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let f = model.density(&[theta], MOMENT_TAIL)?;
    let avar = asymptotic_variance(&f, model, &[theta], p)?.avar[(0, 0)];
    Ok(SamplingCheck {
        n_var: n as f64 * m2 * m / (m - 1.0),
        avar,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        failures: reps - ok.len(),
    })
}
