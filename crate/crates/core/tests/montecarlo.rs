use bilinear::estimation::DEFAULT_TOL;
use bilinear::model::{simulate_with_rng, DEFAULT_BURN_IN};
use bilinear::montecarlo::{ExperimentMode, McSummary, StatSummary};
use bilinear::rng::replication_stream;
use bilinear::{fit_gmle, run_experiment, run_experiment_with_workers, CellSpec, ErrorLaw, ExperimentSpec, ParamSpace};

const SEED: u64 = 2024;

fn stat<'a>(s: &'a McSummary, name: &str) -> &'a StatSummary {
    s.estimate(name).unwrap()
}

fn binom_se(p: f64, k: usize) -> f64 {
    (p * (1.0 - p) / k as f64).sqrt()
}

#[test]
fn output_does_not_depend_on_workers() {
    let spec = ExperimentSpec::new(
        vec![CellSpec::new(1.0, 0.0, 200, 40), CellSpec::new(-0.1, 0.9, 200, 40)],
        SEED,
        ExperimentMode::Coverage,
    );
    let one = run_experiment_with_workers(&spec, 1).unwrap();
    let four = run_experiment_with_workers(&spec, 4).unwrap();
    assert_eq!(one, four);
}

#[test]
fn replication_streams_give_uncorrelated_estimates() {
    let reps = 300u32;
    let cell = CellSpec::new(1.0, 0.0, 200, reps as usize);
    let params = cell.params().unwrap();
    let estimates = |c: u32| -> Vec<f64> {
        (0..reps)
            .map(|r| {
                let mut rng = replication_stream(SEED, c, r);
                let data = simulate_with_rng(&params, ErrorLaw::Gaussian, 200, DEFAULT_BURN_IN, &mut rng).unwrap();
                fit_gmle(&data, &ParamSpace::interior(), DEFAULT_TOL)
                    .unwrap()
                    .theta_hat
                    .b2
            })
            .collect()
    };
    let (a, b) = (estimates(0), estimates(1));
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let r = cov / (va * vb).sqrt();
    assert!(r.abs() < 3.0 / (reps as f64).sqrt(), "{r}");
}

#[test]
fn sd_of_theta4_shrinks_like_root_n() {
    let spec = ExperimentSpec::new(
        vec![CellSpec::new(1.0, 0.9, 200, 300), CellSpec::new(1.0, 0.9, 1000, 300)],
        SEED,
        ExperimentMode::EstimationTables,
    );
    let out = run_experiment(&spec).unwrap();
    let ratio = stat(&out[0], "theta4").sd / stat(&out[1], "theta4").sd;
    assert!((1.8..=2.8).contains(&ratio), "{ratio}");
}

#[test]
fn estimation_tables_reproduce_published_cells() {
    let spec = ExperimentSpec::new(
        vec![
            CellSpec::new(0.1, 0.9, 200, 300),
            CellSpec::new(-1.0, 0.9, 1000, 300),
            CellSpec::new(1.0, 0.9, 1000, 1000),
            CellSpec::new(1.0, 0.0, 200, 1000),
        ],
        SEED,
        ExperimentMode::EstimationTables,
    );
    let out = run_experiment(&spec).unwrap();
    let within = |s: &StatSummary, target: f64, k: usize| (s.mean - target).abs() <= 3.0 * s.sd / (k as f64).sqrt();

    let t2 = stat(&out[0], "theta2");
    assert!(within(t2, 0.8793, 300), "{t2:?}");
    assert!((t2.sd - 0.0399).abs() <= 0.15 * 0.0399, "{t2:?}");
    assert!((t2.mean_estimated_sd - 0.0352).abs() <= 0.005, "{t2:?}");

    let b = stat(&out[1], "b_hat");
    assert!(within(b, -0.9956, 300), "{b:?}");
    assert!((b.sd - 0.0606).abs() <= 0.15 * 0.0606, "{b:?}");

    let t4 = stat(&out[2], "theta4");
    assert!(within(t4, 1.0050, 1000), "{t4:?}");
    assert!((t4.sd - 0.1192).abs() <= 0.1 * 0.1192, "{t4:?}");

    let t4 = stat(&out[3], "theta4");
    assert!((t4.mean_estimated_sd - 0.2786).abs() <= 0.02, "{t4:?}");
}

#[test]
fn size_and_power_reproduce_published_cells() {
    let reps = 2000;
    let spec = ExperimentSpec::new(
        vec![
            CellSpec::new(0.0, 0.1, 200, reps),
            CellSpec::new(0.0, 0.9, 200, reps),
            CellSpec::local_alternative(0.5, 0.9, 200, reps),
            CellSpec::local_alternative(1.0, 0.9, 200, reps),
            CellSpec::new(0.0, 0.1, 1000, reps),
            CellSpec::local_alternative(1.0, 0.9, 1000, reps),
        ],
        SEED,
        ExperimentMode::SizePowerTable,
    );
    let out = run_experiment(&spec).unwrap();
    let check = |cell: usize, level: f64, target: f64| {
        let rate = out[cell].rejection_rate(level).unwrap();
        let band = 3.0 * binom_se(target, out[cell].successes);
        assert!(
            (rate - target).abs() <= band,
            "cell {cell} level {level}: {rate} vs {target} +- {band}"
        );
    };
    check(0, 0.1, 0.0790);
    check(1, 0.05, 0.0422);
    check(3, 0.05, 0.6267);
    check(4, 0.05, 0.0375);
    check(5, 0.1, 0.9604);

    // Power rises with |b| over {0, 0.5, 1} * n^(-1/4).
    for level in [0.1, 0.05] {
        let r: Vec<f64> = (1..=3).map(|c| out[c].rejection_rate(level).unwrap()).collect();
        for w in r.windows(2) {
            let slack = 3.0 * binom_se(w[0].max(0.01), reps);
            assert!(w[1] + slack >= w[0], "level {level}: {r:?}");
        }
    }
}

#[test]
fn b_interval_coverage_near_nominal() {
    let spec = ExperimentSpec::new(
        vec![CellSpec::new(1.0, 0.9, 1000, 1000)],
        SEED,
        ExperimentMode::Coverage,
    );
    let out = run_experiment(&spec).unwrap();
    let cov = out[0].coverage.iter().find(|(k, _)| k == "b").unwrap().1;
    assert!((0.92..=0.97).contains(&cov), "{cov}");
}
