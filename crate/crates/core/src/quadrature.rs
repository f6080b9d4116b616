//! Gauss-Legendre rules and a composite integrator for `E ln|Z - r|`,
//! `Z ~ N(0, 1)`.

use std::f64::consts::PI;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let m = order;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let d = m as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Half-width of the integration window for the standard normal weight.
const TAIL: f64 = 12.0;
/// Ratio between successive graded breakpoints around the singularity.
const GRADING: f64 = 0.2;
/// Innermost excluded half-width; its contribution is added analytically.
const INNER: f64 = 1e-15;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `E ln|Z - root|` for a standard normal `Z`, by composite Gauss-Legendre
/// with panels split at `root` and geometrically graded toward it.
pub fn expected_log_abs_shifted_normal(root: f64, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let mut breaks: Vec<f64> = (-(TAIL as i32)..=(TAIL as i32)).map(f64::from).collect();
    let inside = root.abs() < TAIL;
    if inside {
        let mut d = 1.0;
        while d > INNER {
            breaks.push(root - d);
            breaks.push(root + d);
            d *= GRADING;
        }
        breaks.push(root - INNER);
        breaks.push(root + INNER);
        breaks.retain(|&z| (z - root).abs() >= INNER && z.abs() <= TAIL);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= f64::EPSILON * b.abs().max(1.0));

    let integrand = |z: f64| (z - root).abs().ln() * std_normal_pdf(z);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if inside && a < root && b > root {
            // Only the excluded core straddles the root.
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let panel: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, wt)| wt * integrand(mid + half * x))
            .sum();
        total += half * panel;
    }
    if inside {
        total += std_normal_pdf(root) * 2.0 * INNER * (INNER.ln() - 1.0);
    }
    total
}
