use approx::assert_relative_eq;
use rand::Rng;

use bilinear::likelihood::{hessian_total, loglik_term, loglik_total, score_term, score_terms, score_total};
use bilinear::rng::stream;
use bilinear::{simulate, ErrorLaw, ModelParams, SeriesData, ThetaVector};

fn straight_line_term(mu: f64, phi: f64, s2: f64, b2: f64, y: f64, y2: f64) -> f64 {
    let h = s2 * (1.0 + b2 * y2 * y2);
    let r = y - mu - phi * y2;
    -0.5 * (h.ln() + r * r / h)
}

fn kahan(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn random_theta<R: Rng>(rng: &mut R) -> ThetaVector {
    ThetaVector::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(0.1..4.0),
        rng.random_range(0.0..3.0),
    )
}

fn fixture(seed: u64) -> SeriesData {
    let p = ModelParams::new(0.2, 0.5, 1.0, 0.7).unwrap();
    simulate(&p, ErrorLaw::Gaussian, 300, 200, seed).unwrap()
}

#[test]
fn term_matches_straight_line_oracle() {
    let mut rng = stream(1, 0);
    for _ in 0..500 {
        let t = random_theta(&mut rng);
        let (y, y2) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let v = loglik_term(&t, y, y2).unwrap();
        assert_relative_eq!(
            v,
            straight_line_term(t.mu, t.phi, t.sigma2, t.b2, y, y2),
            max_relative = 1e-12
        );
    }
}

#[test]
fn total_matches_compensated_sum() {
    let mut rng = stream(2, 0);
    for seed in 0..20 {
        let data = fixture(seed);
        let t = random_theta(&mut rng);
        let y = data.values();
        let oracle = kahan((2..y.len()).map(|k| straight_line_term(t.mu, t.phi, t.sigma2, t.b2, y[k], y[k - 2])));
        assert_relative_eq!(loglik_total(&t, &data).unwrap(), oracle, max_relative = 1e-10);
    }
}

#[test]
fn term_score_and_hessian_match_finite_differences() {
    let mut rng = stream(3, 0);
    for _ in 0..100 {
        let t = random_theta(&mut rng).to_array();
        let t = [t[0], t[1], t[2], t[3] + 0.01];
        let (y, y2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let f = |a: [f64; 4]| loglik_term(&ThetaVector::from_array(a), y, y2).unwrap();
        let g = |a: [f64; 4]| score_term(&ThetaVector::from_array(a), y, y2).unwrap().to_array();
        let s = g(t);
        let hess = bilinear::likelihood::hessian_term(&ThetaVector::from_array(t), y, y2).unwrap();
        for j in 0..4 {
            let h = 1e-6 * t[j].abs().max(1.0);
            let (mut up, mut dn) = (t, t);
            up[j] += h;
            dn[j] -= h;
            let fd = (f(up) - f(dn)) / (2.0 * h);
            assert!(
                (fd - s[j]).abs() <= 1e-5 * s[j].abs().max(1e-3),
                "score {j}: {fd} vs {}",
                s[j]
            );
            let (gu, gd) = (g(up), g(dn));
            for r in 0..4 {
                let fd = (gu[r] - gd[r]) / (2.0 * h);
                let a = hess[(r, j)];
                assert!(
                    (fd - a).abs() <= 1e-4 * a.abs().max(1e-2),
                    "hessian ({r}, {j}): {fd} vs {a}"
                );
            }
        }
        assert!(hess[(0, 0)] < 0.0);
    }
}

#[test]
fn score_is_gradient_on_the_boundary_face() {
    let data = fixture(7);
    let t = [0.1, 0.4, 1.2, 0.0];
    let f = |a: [f64; 4]| loglik_total(&ThetaVector::from_array(a), &data).unwrap();
    let h = 1e-5;
    let f0 = f(t);
    let f1 = f([t[0], t[1], t[2], h]);
    let f2 = f([t[0], t[1], t[2], 2.0 * h]);
    let one_sided = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
    let s = score_total(&ThetaVector::from_array(t), &data).unwrap();
    assert_relative_eq!(s.d_b2, one_sided, max_relative = 1e-5);
}

#[test]
fn location_block_is_negative_semidefinite() {
    let mut rng = stream(4, 0);
    for seed in 0..50 {
        let data = fixture(100 + seed);
        let h = hessian_total(&random_theta(&mut rng), &data).unwrap();
        let (a, b, d) = (h[(0, 0)], h[(0, 1)], h[(1, 1)]);
        assert!(a <= 0.0 && d <= 0.0 && a * d - b * b >= -1e-9 * (a * d).abs());
    }
}

#[test]
fn sigma2_maximizer_is_weighted_mean_of_squared_residuals() {
    let data = fixture(9);
    let (mu, phi, b2) = (0.15, 0.45, 0.6);
    let y = data.values();
    let n = (y.len() - 2) as f64;
    let s2 = (2..y.len())
        .map(|k| (y[k] - mu - phi * y[k - 2]).powi(2) / (1.0 + b2 * y[k - 2] * y[k - 2]))
        .sum::<f64>()
        / n;
    let s = score_total(&ThetaVector::new(mu, phi, s2, b2), &data).unwrap();
    assert!(s.d_sigma2.abs() < 1e-9 * n, "{}", s.d_sigma2);
    let at = |v: f64| loglik_total(&ThetaVector::new(mu, phi, v, b2), &data).unwrap();
    assert!(at(s2) > at(s2 * 1.01) && at(s2) > at(s2 * 0.99));
}

#[test]
fn mean_score_vanishes_at_the_truth() {
    let p = ModelParams::new(0.2, 0.6, 1.0, 0.5).unwrap();
    let data = simulate(&p, ErrorLaw::Gaussian, 100_000, 500, 10).unwrap();
    let theta = ThetaVector::new(p.mu, p.phi, p.sigma2, p.b_squared());
    let scores = score_terms(&theta, &data).unwrap();
    // Scores are correlated at lag one, so use batch means.
    let batches = 100;
    let size = scores.len() / batches;
    for k in 0..4 {
        let comp: Vec<f64> = scores.iter().map(|s| s.to_array()[k]).collect();
        let mean = comp.iter().sum::<f64>() / comp.len() as f64;
        let bm: Vec<f64> = comp
            .chunks(size)
            .take(batches)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let sd = (bm.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64).sqrt();
        assert!(
            mean.abs() < 3.0 * sd / (batches as f64).sqrt(),
            "component {k}: mean {mean} sd {sd}"
        );
    }
}
