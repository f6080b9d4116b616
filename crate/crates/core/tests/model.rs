use bilinear::model::{run_recursion, simulate_unchecked};
use bilinear::rng::stream;
use bilinear::{
    representation_truncated, simulate, stationarity_gamma, stationarity_region, ErrorLaw, GammaMethod, ModelParams,
};

/// Mean and batch-means standard error (50 batches).
fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let batches = 50;
    let size = x.len() / batches;
    let bm: Vec<f64> = x
        .chunks(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let var = bm.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

#[test]
fn simulation_is_bit_identical_for_a_seed() {
    let p = ModelParams::new(0.2, 0.9, 1.0, -1.0).unwrap();
    let a = simulate(&p, ErrorLaw::Gaussian, 500, 500, 42).unwrap();
    let b = simulate(&p, ErrorLaw::Gaussian, 500, 500, 42).unwrap();
    let c = simulate(&p, ErrorLaw::Gaussian, 500, 500, 43).unwrap();
    assert!(a
        .values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a.values(), c.values());
}

#[test]
fn lag_one_product_matches_representation_oracle() {
    let p = ModelParams::new(0.0, 0.0, 1.0, 1.0).unwrap();
    let data = simulate(&p, ErrorLaw::Gaussian, 100_000, 500, 3).unwrap();
    let y = data.values();
    let prods: Vec<f64> = y.windows(2).map(|w| w[0] * w[1]).collect();
    let (mean, se) = mean_and_se(&prods);

    // E[Y] from the representation over independent innovation draws.
    let mut rng = stream(4, 0);
    let draws = 100_000;
    let mut sum = 0.0;
    for _ in 0..draws {
        let eps = ErrorLaw::Gaussian.draw_innovations(1.0, 101, &mut rng);
        sum += representation_truncated(&p, &eps, 50).unwrap();
    }
    let target = p.b * p.sigma2 * sum / draws as f64;
    assert!(
        (mean - target).abs() < 3.0 * se + 0.01,
        "mean {mean} target {target} se {se}"
    );
}

#[test]
fn conditional_moments_hold() {
    let p = ModelParams::new(0.3, 0.5, 1.5, 0.6).unwrap();
    let data = simulate(&p, ErrorLaw::Gaussian, 50_000, 500, 8).unwrap();
    let y = data.values();
    let mut resid = Vec::new();
    let mut scaled = Vec::new();
    let mut regs = Vec::new();
    for t in 4..y.len() {
        let r = y[t] - p.mu - p.phi * y[t - 2];
        resid.push(r);
        scaled.push(r * r / (1.0 + p.b * p.b * y[t - 2] * y[t - 2]));
        regs.push([y[t - 2], y[t - 3], y[t - 4]]);
    }
    // Each F_{t-2} regressor is uncorrelated with the residual: robust t-stats.
    for k in 0..3 {
        let xs: Vec<f64> = regs.iter().map(|r| r[k]).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
        let slope = xs.iter().zip(&resid).map(|(x, r)| (x - xm) * r).sum::<f64>() / sxx;
        let rm = resid.iter().sum::<f64>() / resid.len() as f64;
        let meat: f64 = xs
            .iter()
            .zip(&resid)
            .map(|(x, r)| ((x - xm) * (r - rm - slope * (x - xm))).powi(2))
            .sum();
        let se = meat.sqrt() / sxx;
        assert!((slope / se).abs() < 3.0, "regressor {k}: slope {slope} se {se}");
    }
    let (mean, se) = mean_and_se(&scaled);
    assert!((mean - p.sigma2).abs() < 3.0 * se, "{mean} vs {} (se {se})", p.sigma2);
}

#[test]
fn representation_agrees_with_recursion_on_shared_stream() {
    let p = ModelParams::new(0.1, 0.3, 1.0, 0.5).unwrap();
    let mut rng = stream(12, 0);
    let eps = ErrorLaw::Gaussian.draw_innovations(1.0, 1500, &mut rng);
    let path = run_recursion(&p, &eps);
    let mut sq = 0.0;
    for t in 500..1500 {
        let back: Vec<f64> = (0..=100).map(|j| eps[t - j]).collect();
        sq += (representation_truncated(&p, &back, 50).unwrap() - path[t]).powi(2);
    }
    assert!((sq / 1000.0).sqrt() < 1e-6);
}

#[test]
fn gamma_examples_against_closed_form_and_monte_carlo() {
    let closed = |b: f64| b.ln() - 0.5 * (0.577_215_664_901_532_9 + std::f64::consts::LN_2);
    let at = |b: f64| {
        stationarity_gamma(
            &ModelParams::new(0.0, 0.0, 1.0, b).unwrap(),
            ErrorLaw::Gaussian,
            GammaMethod::default(),
        )
        .unwrap()
    };
    let r = at(1.5);
    assert!((r.gamma - closed(1.5)).abs() < 1e-10);
    assert!((r.gamma + 0.2297).abs() < 1e-4 && r.is_stationary);
    let r = at(2.0);
    assert!((r.gamma - 0.0580).abs() < 1e-4 && !r.is_stationary);

    // Ten million draws, independent of the quadrature.
    let mut rng = stream(99, 0);
    let n = 10_000_000;
    let eps = ErrorLaw::Gaussian.draw_innovations(1.0, n, &mut rng);
    let logs: Vec<f64> = eps.iter().map(|e| (1.5 * e).abs().ln()).collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let sd = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((mean - at(1.5).gamma).abs() < 3.0 * sd / (n as f64).sqrt());
}

#[test]
fn region_examples_and_symmetry() {
    let region = stationarity_region(ErrorLaw::Gaussian, 1.0, &[0.0], &[1.8, 1.95], GammaMethod::default()).unwrap();
    assert!(region[0].stationary);
    assert!(!region[1].stationary);
    let p = ModelParams::new(0.0, 1.0, 1.0, 0.5).unwrap();
    let r = stationarity_gamma(&p, ErrorLaw::Gaussian, GammaMethod::default()).unwrap();
    assert!(r.gamma < 0.0 && r.is_stationary);

    let phis: Vec<f64> = (-12..=12).map(|i| i as f64 * 0.2).collect();
    let bs: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.3).collect();
    let grid = stationarity_region(ErrorLaw::Gaussian, 1.0, &phis, &bs, GammaMethod::default()).unwrap();
    for p in &grid {
        let mirror = grid.iter().find(|q| q.phi == p.phi && q.b == -p.b).unwrap();
        assert_eq!(p.stationary, mirror.stationary);
        assert_eq!(p.gamma, mirror.gamma);
    }
}

#[test]
fn heavy_tailed_laws_simulate_with_unit_variance_innovations() {
    for law in [ErrorLaw::StudentT { df: 6.0 }, ErrorLaw::Uniform] {
        let mut rng = stream(5, 1);
        let eps = law.draw_innovations(2.0, 200_000, &mut rng);
        let var = eps.iter().map(|e| e * e).sum::<f64>() / eps.len() as f64;
        assert!((var - 2.0).abs() < 0.05, "{law:?}: {var}");
        let p = ModelParams::new(0.0, 0.5, 1.0, 0.5).unwrap();
        assert_eq!(simulate(&p, law, 300, 100, 1).unwrap().len(), 300);
    }
    let p = ModelParams::new(0.0, 0.0, 1.0, 2.0).unwrap();
    assert!(simulate(&p, ErrorLaw::Gaussian, 100, 100, 1).is_err());
    assert_eq!(
        simulate_unchecked(&p, ErrorLaw::Gaussian, 100, 0, 1).unwrap().len(),
        100
    );
}
