use gsd_cli::simulation::{
    contaminate, draw_sample, replication_rng, run_cell, run_table, Contamination, ContaminationMode, GridPoint,
    SimConfig, SimError,
};
use gsd_core::{DiscreteDensity, Fixed, Poisson, TuningParams};

fn small(reps: usize, contamination: Option<Contamination>) -> SimConfig {
    SimConfig {
        n: 50,
        reps,
        true_theta: 5.0,
        model: "poisson".into(),
        contamination,
        param_grid: [(0.0, 0.0, 0.0), (0.25, 0.5, 0.3), (0.5, -0.5, 0.7), (0.1, 1.0, 0.0), (0.5, -1.0, 0.5)]
            .map(|(alpha, gamma, tau)| GridPoint { alpha, gamma, tau })
            .to_vec(),
        seed: 42,
    }
}

fn contaminated(mode: ContaminationMode) -> Option<Contamination> {
    Some(Contamination {
        dist: "poisson".into(),
        param: 15.0,
        rate: 0.1,
        mode,
    })
}

#[test]
fn zero_rate_leaves_sample_alone() {
    let mut rng = replication_rng(1, 0);
    let mut s: Vec<i64> = (0..50).collect();
    for mode in [ContaminationMode::Fixed, ContaminationMode::Bernoulli] {
        contaminate(&mut s, 0.0, mode, &Poisson, &[15.0], &mut rng);
        assert_eq!(s, (0..50).collect::<Vec<i64>>());
    }
}

#[test]
fn fixed_mode_replaces_exact_count() {
    let marker = Fixed::new(DiscreteDensity::point_mass(-7));
    for (rep, (n, rate, want)) in [(50, 0.1, 5), (51, 0.1, 6), (10, 0.25, 3), (7, 0.0, 0)].into_iter().enumerate() {
        let mut rng = replication_rng(3, rep);
        let mut s = vec![1i64; n];
        contaminate(&mut s, rate, ContaminationMode::Fixed, &marker, &[], &mut rng);
        assert_eq!(s.len(), n);
        assert_eq!(s.iter().filter(|&&x| x == -7).count(), want);
    }
}

#[test]
fn contaminated_mixture_mean() {
    for mode in [ContaminationMode::Fixed, ContaminationMode::Bernoulli] {
        let cfg = small(2000, contaminated(mode));
        let total: i64 = (0..cfg.reps).map(|r| draw_sample(&cfg, r).unwrap().iter().sum::<i64>()).sum();
        let mean = total as f64 / (cfg.reps * cfg.n) as f64;
        assert!((mean - 6.0).abs() < 0.02, "{mode:?}: {mean}");
    }
}

#[test]
fn cells_obey_jensen_and_match_run_cell() {
    let cfg = small(40, contaminated(ContaminationMode::Bernoulli));
    let table = run_table(&cfg).unwrap();
    assert_eq!(table.cells.len(), 5);
    for c in &table.cells {
        assert!(c.bias * c.bias <= c.mse + 1e-12);
        let p = TuningParams::new(c.alpha, c.gamma, c.tau).unwrap();
        assert_eq!(&run_cell(&cfg, &p).unwrap(), c);
    }
}

#[test]
fn table_is_independent_of_order_and_threads() {
    let cfg = small(25, None);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_table(&cfg)).unwrap();
    let b = four.install(|| run_table(&cfg)).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let mut rev = cfg.clone();
    rev.param_grid.reverse();
    let c = run_table(&rev).unwrap();
    for cell in &a.cells {
        assert_eq!(c.get(cell.alpha, cell.gamma, cell.tau), Some(cell));
    }
}

#[test]
fn single_replication_snapshot_repeats() {
    let cfg = SimConfig::preset(3, 9).map(|mut c| {
        c.reps = 1;
        c
    });
    let cfg = cfg.unwrap();
    assert_eq!(run_table(&cfg).unwrap().to_csv(), run_table(&cfg).unwrap().to_csv());
}

#[test]
fn preset_designs() {
    for t in [2, 3] {
        let cfg = SimConfig::preset(t, 1).unwrap();
        assert_eq!(cfg.param_grid.len(), 145);
        assert_eq!((cfg.n, cfg.reps, cfg.true_theta), (50, 1000, 5.0));
        cfg.validate().unwrap();
    }
    assert!(SimConfig::preset(2, 1).unwrap().contamination.is_none());
    assert_eq!(SimConfig::preset(3, 1).unwrap().contamination.unwrap().rate, 0.1);
    assert!(SimConfig::preset(4, 1).is_none());
    let mut cfg = SimConfig::preset(2, 1).unwrap();
    cfg.reps = 2;
    let t = run_table(&cfg).unwrap();
    assert_eq!(t.cells.len(), 143);
    assert_eq!(t.skipped.len(), 2);
}

#[test]
fn config_errors_name_the_field() {
    let field_of = |cfg: SimConfig| match cfg.validate() {
        Err(SimError::Config { field, .. }) => field,
        other => panic!("{other:?}"),
    };
    let mut c = small(1, None);
    c.n = 0;
    assert_eq!(field_of(c), "n");
    let mut c = small(1, None);
    c.reps = 0;
    assert_eq!(field_of(c), "reps");
    let mut c = small(1, contaminated(ContaminationMode::Fixed));
    c.contamination.as_mut().unwrap().rate = 1.0;
    assert_eq!(field_of(c), "contamination.rate");
    let mut c = small(1, None);
    c.param_grid.push(GridPoint {
        alpha: -0.5,
        gamma: 0.0,
        tau: 0.0,
    });
    assert_eq!(field_of(c), "param_grid");
    let mut c = small(1, None);
    c.model = "poison".into();
    assert_eq!(field_of(c), "model");

    let json = r#"{"n": 5, "reps": 2, "true_theta": 5, "model": "poisson", "param_grid": [], "seed": 1, "extra": 0}"#;
    let err = serde_json::from_str::<SimConfig>(json).unwrap_err().to_string();
    assert!(err.contains("extra"), "{err}");
}
