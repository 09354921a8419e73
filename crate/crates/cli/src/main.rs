use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsd_cli::io::{fmt_param, fmt_value, model_from_id, parse_density, read_data};
use gsd_cli::simulation::{run_table, SimConfig, SimError};
use gsd_core::{
    gsd, mat_statistic, mgsde, Error as CoreError, FitOptions, InfluenceCurve, NormalGrid, Poisson,
    TuningParams,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gsd", version, about = "Generalized S-divergences: evaluation, estimation, influence curves, adequacy tests and simulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output format.
    #[arg(long, value_enum)]
    output: Option<Output>,
    /// Base seed for anything random.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to GSD_THREADS or the number of cores.
    #[arg(long, env = "GSD_THREADS")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Csv,
    Json,
}

#[derive(Args, Clone, Copy)]
struct Tuning {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Q_(alpha, gamma, tau)(g, f) between two densities.
    Divergence {
        /// `poisson:5`, `geometric:0.3`, `binomial:10:0.4` or an `x,mass` CSV file.
        #[arg(long)]
        g: String,
        #[arg(long)]
        f: String,
        #[command(flatten)]
        tuning: Tuning,
        #[command(flatten)]
        common: Common,
    },
    /// Minimum GSD estimate from a file of integer observations.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// `poisson`, `geometric` or `binomial:<m>`.
        #[arg(long, default_value = "poisson")]
        model: String,
        #[command(flatten)]
        tuning: Tuning,
        #[command(flatten)]
        common: Common,
    },
    /// Influence function at the model over a range of points.
    Ifcurve {
        /// `poisson` or `normal-grid` (unit variance, location parameter).
        #[arg(long, default_value = "poisson")]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        /// Comma separated list.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.25,0.5")]
        alpha: Vec<f64>,
        /// `lo:hi`, inclusive.
        #[arg(long, allow_hyphen_values = true, default_value = "0:30")]
        range: String,
        /// Spacing of evaluation points for the normal grid.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        /// Grid spacing of the discretized normal model.
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Model adequacy statistic for `H0: S(g, F) <= c`.
    Mat {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "poisson")]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Bias/MSE tables from a JSON config or one of the published designs.
    Simulate {
        #[arg(long, conflicts_with = "paper_table", required_unless_present = "paper_table")]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["2", "3"])]
        paper_table: Option<String>,
        /// Override the replication count.
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    User(String),
    Internal(String),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonConvergence { .. } | CoreError::SingularJ { .. } => Failure::Internal(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Core(c) => c.into(),
            SimError::AllFailed { .. } => Failure::Internal(e.to_string()),
            SimError::Config { .. } => Failure::User(e.to_string()),
        }
    }
}

fn user<E: std::fmt::Display>(flag: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::User(format!("{flag}: {e}"))
}

fn params(t: Tuning) -> Result<TuningParams, Failure> {
    Ok(TuningParams::new(t.alpha, t.gamma, t.tau)?)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::User("--threads: must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Failure::Internal(e.to_string()))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::Divergence { g, f, tuning, common } => {
            let g = parse_density(&g).map_err(user("--g"))?;
            let f = parse_density(&f).map_err(user("--f"))?;
            let v = gsd(&g, &f, &params(tuning)?)?;
            match common.output.unwrap_or(Output::Csv) {
                Output::Csv => println!("{}", fmt_value(v)),
                Output::Json => print_json(&json!({ "divergence": v })),
            }
        }
        Command::Estimate { data, model, tuning, common } => {
            let x = read_data(&data).map_err(user("--data"))?;
            let m = model_from_id(&model).map_err(user("--model"))?;
            let r = gsd_core::relative_frequency(&x)?;
            let fit = mgsde(&r, m.as_ref(), &params(tuning)?, &FitOptions::default())?;
            match common.output.unwrap_or(Output::Json) {
                Output::Json => print_json(&json!({
                    "theta_hat": fit.theta_hat,
                    "objective": fit.objective_value,
                    "ee_residual_norm": fit.ee_residual_norm,
                    "iterations": fit.iterations,
                    "converged": fit.converged,
                    "boundary_hit": fit.boundary_hit,
                })),
                Output::Csv => {
                    println!("theta_hat,objective,ee_residual_norm,iterations,converged,boundary_hit");
                    let theta: Vec<String> = fit.theta_hat.iter().map(|&t| fmt_value(t)).collect();
                    println!(
                        "{},{},{},{},{},{}",
                        theta.join(";"),
                        fmt_value(fit.objective_value),
                        fmt_value(fit.ee_residual_norm),
                        fit.iterations,
                        fit.converged,
                        fit.boundary_hit
                    );
                }
            }
        }
        Command::Ifcurve {
            model,
            theta,
            alpha,
            range,
            step,
            h,
            common,
        } => {
            let (lo, hi) = range
                .split_once(':')
                .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
                .filter(|(a, b)| a.is_finite() && b.is_finite() && a <= b)
                .ok_or_else(|| Failure::User(format!("--range: expected lo:hi with lo <= hi, got `{range}`")))?;
            let mut rows: Vec<(f64, f64, f64)> = Vec::new();
            match model.as_str() {
                "poisson" => {
                    if lo < 0.0 || lo.fract() != 0.0 || hi.fract() != 0.0 {
                        return Err(Failure::User("--range: Poisson points must be non-negative integers".into()));
                    }
                    let ys: Vec<i64> = (lo as i64..=hi as i64).collect();
                    for &a in &alpha {
                        let p = TuningParams::new(a, 0.0, 0.0)?;
                        let c = InfluenceCurve::at_model(&ys, &Poisson, &[theta], &p)?;
                        rows.extend(c.points.iter().zip(&c.values).map(|(&y, v)| (a, y as f64, v[0])));
                    }
                }
                "normal-grid" => {
                    if !(step > 0.0 && h > 0.0) {
                        return Err(Failure::User("--step and --h must be positive".into()));
                    }
                    let m = NormalGrid::new(1.0, lo.min(theta) - 10.0, hi.max(theta) + 10.0, h)?;
                    let count = ((hi - lo) / step + 1e-9).floor() as usize;
                    let pts: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
                    let idx: Vec<i64> = pts.iter().map(|&y| m.index_of(y)).collect();
                    for &a in &alpha {
                        let p = TuningParams::new(a, 0.0, 0.0)?;
                        let c = InfluenceCurve::at_model(&idx, &m, &[theta], &p)?;
                        rows.extend(c.points.iter().zip(&c.values).map(|(&i, v)| (a, m.point(i), v[0])));
                    }
                }
                other => return Err(Failure::User(format!("--model: `{other}` (expected poisson or normal-grid)"))),
            }
            match common.output.unwrap_or(Output::Csv) {
                Output::Csv => {
                    println!("alpha,y,if");
                    for (a, y, v) in rows {
                        println!("{},{},{}", fmt_param(a), fmt_param(y), fmt_value(v));
                    }
                }
                Output::Json => {
                    let v: Vec<_> = rows.iter().map(|&(a, y, v)| json!({ "alpha": a, "y": y, "if": v })).collect();
                    print_json(&json!(v));
                }
            }
        }
        Command::Mat {
            data,
            model,
            alpha,
            gamma,
            c,
            common,
        } => {
            let x = read_data(&data).map_err(user("--data"))?;
            let m = model_from_id(&model).map_err(user("--model"))?;
            let res = mat_statistic(&x, m.as_ref(), alpha, gamma, c, &FitOptions::default())?;
            let out = json!({
                "c": res.c,
                "tau_star": res.tau_star,
                "theta_tau": res.theta_tau,
                "statistic": res.statistic,
                "statistic_model": res.statistic_model,
                "f_hat_mass": res.f_hat_mass,
                "non_monotone": res.non_monotone,
                "f_hat": { "support_start": res.f_hat.support_start(), "masses": res.f_hat.masses() },
            });
            match common.output.unwrap_or(Output::Json) {
                Output::Json => print_json(&out),
                Output::Csv => {
                    println!("c,tau_star,theta_tau,statistic,statistic_model,f_hat_mass,non_monotone");
                    let theta: Vec<String> = res.theta_tau.iter().map(|&t| fmt_value(t)).collect();
                    println!(
                        "{},{},{},{},{},{},{}",
                        fmt_value(res.c),
                        fmt_value(res.tau_star),
                        theta.join(";"),
                        fmt_value(res.statistic),
                        res.statistic_model.map(fmt_value).unwrap_or_else(|| "inf".into()),
                        fmt_value(res.f_hat_mass),
                        res.non_monotone
                    );
                }
            }
        }
        Command::Simulate {
            config,
            paper_table,
            reps,
            common,
        } => {
            let mut cfg = match (config, paper_table) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path).map_err(user("--config"))?;
                    let mut cfg: SimConfig = serde_json::from_str(&text).map_err(user("--config"))?;
                    if let Some(s) = common.seed {
                        cfg.seed = s;
                    }
                    cfg
                }
                (None, Some(t)) => SimConfig::preset(t.parse().expect("validated by clap"), common.seed.unwrap_or(1))
                    .expect("table 2 or 3"),
                (None, None) => unreachable!("clap requires one of them"),
            };
            if let Some(r) = reps {
                cfg.reps = r;
            }
            let table = pool(common.threads)?.install(|| run_table(&cfg))?;
            for s in &table.skipped {
                eprintln!("skipped alpha = {}, gamma = {}, tau = {}: {}", s.alpha, s.gamma, s.tau, s.reason);
            }
            for c in table.cells.iter().filter(|c| c.failures == cfg.reps) {
                eprintln!("every fit failed for alpha = {}, gamma = {}, tau = {}", c.alpha, c.gamma, c.tau);
            }
            match common.output.unwrap_or(Output::Csv) {
                Output::Csv => print!("{}", table.to_csv()),
                Output::Json => print_json(&json!({ "config": cfg, "cells": table.cells, "skipped": table.skipped })),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
