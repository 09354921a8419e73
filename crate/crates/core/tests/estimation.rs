mod common;

use gsd_core::divergence::Kernel;
use gsd_core::estimation::{minimize_divergence, Objective};
use gsd_core::{
    estimating_equation, gsd, k_function, k_prime, mgsde, msde, relative_frequency, DiscreteDensity, FitOptions,
    NormalGrid, ParametricModel, Poisson, TuningParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

fn tp(a: f64, g: f64, t: f64) -> TuningParams {
    TuningParams::new(a, g, t).unwrap()
}

fn sample(seed: u64, n: usize, theta: f64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Poisson.sample_n(&[theta], n, &mut rng)
}

#[test]
fn k_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let p = tp(rng.random_range(0.0..1.0), rng.random_range(-0.95..2.0), rng.random_range(0.0..1.0));
        let h = 1e-5;
        assert_eq!(k_function(0.0, &p).unwrap(), 0.0);
        let d = (k_function(h, &p).unwrap() - k_function(-h, &p).unwrap()) / (2.0 * h);
        assert!((d - 1.0).abs() < 1e-6, "{p:?}: {d}");
        assert!((k_prime(0.0, &p).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn k_prime_matches_finite_differences() {
    for &(a, g, t) in &[(0.25, 0.5, 0.3), (0.5, -0.5, 0.7), (0.1, 0.1, 0.4), (0.3, -1.0, 0.6), (0.2, 1.0, 0.0)] {
        let p = tp(a, g, t);
        for delta in [-0.8, -0.2, 0.5, 3.0, 20.0] {
            let h = 1e-6 * (1.0 + delta);
            let fd = (k_function(delta + h, &p).unwrap() - k_function(delta - h, &p).unwrap()) / (2.0 * h);
            let kp = k_prime(delta, &p).unwrap();
            assert!((fd - kp).abs() < 1e-6 * (1.0 + kp.abs()), "{a} {g} {t} {delta}: {fd} vs {kp}");
        }
    }
}

#[test]
fn k_near_gamma_minus_one() {
    for &(a, t) in &[(0.25, 0.3), (0.0, 0.6), (0.5, 0.9)] {
        let near = tp(a, -1.0 + 1e-6, t);
        let sd = Kernel::S { alpha: a, a: t * (1.0 + a) };
        for delta in [-1.0, -0.5, 0.0, 2.0, 10.0] {
            let want = sd.k(delta).unwrap();
            assert!((k_function(delta, &near).unwrap() - want).abs() < 1e-4);
        }
    }
}

#[test]
fn estimating_equation_unbiased_at_the_model() {
    let f = Poisson.density(&[5.0], 1e-15).unwrap();
    for &(a, g, t) in &[(0.25, 0.5, 0.3), (0.0, 0.0, 0.0), (0.5, -0.5, 0.7), (1.0, 1.5, 0.5)] {
        let ee = estimating_equation(&[5.0], &f, &Poisson, &tp(a, g, t)).unwrap();
        assert!(ee[0].abs() < 1e-10);
    }
}

#[test]
fn estimating_equation_near_gamma_minus_one() {
    let r = relative_frequency(&sample(11, 50, 5.0)).unwrap();
    for &(a, t) in &[(0.25, 0.3), (0.5, 0.7)] {
        let near = estimating_equation(&[5.3], &r, &Poisson, &tp(a, -1.0 + 1e-6, t)).unwrap();
        let (lo, hi) = (0, 60);
        let kernel = Kernel::S { alpha: a, a: t * (1.0 + a) };
        let (want, _) = Objective::new(&r, &Poisson, kernel, (lo, hi)).estimating_equation(&[5.3]).unwrap();
        assert!((near[0] - want[0]).abs() < 1e-4, "{near:?} vs {want:?}");
    }
}

#[test]
fn mle_is_the_sample_mean() {
    for seed in 0..10 {
        let data = sample(seed, 50, 5.0);
        let mean = data.iter().sum::<i64>() as f64 / 50.0;
        let r = relative_frequency(&data).unwrap();
        let fit = mgsde(&r, &Poisson, &tp(0.0, 0.0, 0.0), &FitOptions::default()).unwrap();
        assert!((fit.theta_hat[0] - mean).abs() < 1e-6);
        assert!(fit.converged && fit.ee_residual_norm < 1e-7);
    }
}

#[test]
fn fisher_consistency_random_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p = tp(rng.random_range(0.0..1.0), rng.random_range(-0.9..2.0), rng.random_range(0.0..1.0));
        let theta0 = rng.random_range(1.0..10.0);
        let f = Poisson.density(&[theta0], 1e-12).unwrap();
        let fit = mgsde(&f, &Poisson, &p, &FitOptions::default()).unwrap();
        assert!((fit.theta_hat[0] - theta0).abs() < 1e-8, "{p:?} {theta0}: {fit:?}");
    }
}

#[test]
fn fisher_consistency_lattice() {
    let f = Poisson.density(&[5.0], 1e-12).unwrap();
    let mut worst: f64 = 0.0;
    for a in [0.0, 0.1, 0.25, 0.5] {
        for g in [-0.5, 0.0, 0.5, 1.0, 1.5] {
            for t in [0.0, 0.1, 0.3, 0.5, 0.7] {
                let fit = mgsde(&f, &Poisson, &tp(a, g, t), &FitOptions::default()).unwrap();
                worst = worst.max((fit.theta_hat[0] - 5.0).abs());
            }
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn agrees_with_brute_force_grid() {
    let data = sample(2024, 50, 5.0);
    let r = relative_frequency(&data).unwrap();
    let p = tp(0.25, 0.5, 0.3);
    let fit = mgsde(&r, &Poisson, &p, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let mean = data.iter().sum::<i64>() as f64 / 50.0;
    let (lo, hi) = (0.5 * mean, 2.0 * mean + 1.0);
    let len = 80;
    let g: Vec<f64> = (0..len).map(|x| r.get(x as i64)).collect();
    let objective = |theta: f64| common::gsd_direct(&g, &common::poisson(theta, len), 0.25, 0.5, 0.3);
    let steps = ((hi - lo) / 1e-5) as usize;
    let (mut best, mut best_v) = (lo, f64::INFINITY);
    for i in 0..=steps {
        let theta = lo + i as f64 * 1e-5;
        let v = objective(theta);
        if v < best_v {
            best = theta;
            best_v = v;
        }
    }
    assert!((fit.theta_hat[0] - best).abs() < 1e-4, "{} vs {best}", fit.theta_hat[0]);
    assert!(fit.objective_value <= best_v + 1e-12);
}

#[test]
fn gradient_is_minus_scaled_estimating_equation() {
    let r = relative_frequency(&sample(77, 50, 5.0)).unwrap();
    for &(a, g, t) in &[(0.25, 0.5, 0.3), (0.0, 0.0, 0.0), (0.5, -0.5, 0.7), (0.1, 1.5, 0.0), (0.25, 0.25, 0.5)] {
        let p = tp(a, g, t);
        let fit = mgsde(&r, &Poisson, &p, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let obj = |theta: f64| gsd(&r, &Poisson.density(&[theta], 1e-15).unwrap(), &p).unwrap();
        for off in [-0.5, -0.1, 0.1, 0.5] {
            let theta = fit.theta_hat[0] + off;
            let h = 1e-6;
            let grad = (obj(theta + h) - obj(theta - h)) / (2.0 * h);
            let ee = estimating_equation(&[theta], &r, &Poisson, &p).unwrap()[0];
            let want = -(1.0 + a) * ee;
            assert!(grad.signum() == want.signum(), "{a} {g} {t} at {theta}");
            assert!(((grad - want) / want).abs() < 1e-3, "{a} {g} {t} at {theta}: {grad} vs {want}");
        }
    }
}

#[test]
fn objective_never_above_the_probe_grid() {
    let r = relative_frequency(&sample(8, 50, 5.0)).unwrap();
    for &(a, g, t) in &[(0.0, 1.5, 0.0), (0.5, 0.0, 0.3), (0.1, -0.3, 0.7)] {
        let p = tp(a, g, t);
        let fit = mgsde(&r, &Poisson, &p, &FitOptions::default()).unwrap();
        let mean = r.mean();
        let (lo, hi) = ((0.5 * mean).max(1e-3), 2.0 * mean + 1.0);
        for i in 0..50 {
            let theta = lo + (hi - lo) * i as f64 / 49.0;
            let v = gsd(&r, &Poisson.density(&[theta], 1e-12).unwrap(), &p).unwrap();
            assert!(fit.objective_value <= v + 1e-12);
        }
    }
}

#[test]
fn sd_estimator_at_gamma_minus_one() {
    let r = relative_frequency(&sample(4, 50, 5.0)).unwrap();
    let fit = msde(&r, &Poisson, 0.25, 0.5 * 1.25, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let lambda = (0.25 * 0.5 - 0.5) / 0.75;
    let obj = |theta: f64| gsd_core::s_divergence(&r, &Poisson.density(&[theta], 1e-15).unwrap(), 0.25, lambda).unwrap();
    let t = fit.theta_hat[0];
    assert!(obj(t) <= obj(t + 1e-4) && obj(t) <= obj(t - 1e-4));
}

#[test]
fn location_equivariance() {
    let model = NormalGrid::new(1.0, -15.0, 15.0, 0.01).unwrap();
    let shift_steps = 250;
    let data = |offset: f64| -> DiscreteDensity {
        let masses: Vec<f64> = (0..model.len() as i64)
            .map(|i| {
                let x = model.point(i) - offset;
                (0.9 * model.density_value(0.3, x) + 0.1 * model.density_value(4.0, x)) * model.spacing()
            })
            .collect();
        DiscreteDensity::unnormalized(0, masses).unwrap()
    };
    let v = shift_steps as f64 * model.spacing();
    for &(a, g, t) in &[(0.25, 0.5, 0.3), (0.5, -0.5, 0.7), (0.0, 0.0, 0.0)] {
        let p = tp(a, g, t);
        let base = mgsde(&data(0.0), &model, &p, &FitOptions::default()).unwrap();
        let shifted = mgsde(&data(v), &model, &p, &FitOptions::default()).unwrap();
        assert!((shifted.theta_hat[0] - base.theta_hat[0] - v).abs() < 1e-6, "{base:?} {shifted:?}");
    }
}

/// Normal location-scale on a uniform grid, for the multi-parameter search.
struct LocationScale {
    origin: f64,
    h: f64,
    len: i64,
}

impl LocationScale {
    fn x(&self, i: i64) -> f64 {
        self.origin + i as f64 * self.h
    }
}

impl ParametricModel for LocationScale {
    fn dim(&self) -> usize {
        2
    }
    fn name(&self) -> &str {
        "location-scale"
    }
    fn check_theta(&self, theta: &[f64]) -> gsd_core::Result<()> {
        if theta.len() == 2 && theta[1] > 0.0 {
            Ok(())
        } else {
            Err(gsd_core::Error::Domain("bad theta".into()))
        }
    }
    fn window(&self, _theta: &[f64], _tail: f64) -> gsd_core::Result<(i64, i64)> {
        Ok((0, self.len - 1))
    }
    fn pmf(&self, theta: &[f64], i: i64) -> f64 {
        let z = (self.x(i) - theta[0]) / theta[1];
        (-0.5 * z * z).exp() / (theta[1] * (2.0 * std::f64::consts::PI).sqrt()) * self.h
    }
    fn score(&self, theta: &[f64], i: i64, out: &mut [f64]) {
        let (m, s) = (theta[0], theta[1]);
        let d = self.x(i) - m;
        out[0] = d / (s * s);
        out[1] = (d * d - s * s) / (s * s * s);
    }
    fn score_gradient(&self, theta: &[f64], i: i64, out: &mut [f64]) {
        let (m, s) = (theta[0], theta[1]);
        let d = self.x(i) - m;
        out[0] = -1.0 / (s * s);
        out[1] = -2.0 * d / (s * s * s);
        out[2] = out[1];
        out[3] = 1.0 / (s * s) - 3.0 * d * d / (s * s * s * s);
    }
    fn sample(&self, _theta: &[f64], _rng: &mut dyn RngCore) -> i64 {
        unimplemented!("not needed")
    }
    fn default_bracket(&self, _data: &DiscreteDensity) -> Vec<(f64, f64)> {
        vec![(-3.0, 3.0), (0.3, 3.0)]
    }
}

#[test]
fn nelder_mead_recovers_two_parameters() {
    let model = LocationScale { origin: -12.0, h: 0.02, len: 1201 };
    let theta0 = [0.7, 1.3];
    let f = model.density(&theta0, 0.0).unwrap();
    for &(a, g, t) in &[(0.25, 0.5, 0.3), (0.5, 0.0, 0.0), (0.0, 0.0, 0.0)] {
        let fit = minimize_divergence(&f, &model, Kernel::from_params(&tp(a, g, t)), &FitOptions::default()).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!((fit.theta_hat[0] - theta0[0]).abs() < 1e-6 && (fit.theta_hat[1] - theta0[1]).abs() < 1e-6, "{fit:?}");
    }
}
