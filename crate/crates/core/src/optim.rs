//! Bracketed scalar maximization: golden-section search accelerated by
//! parabolic interpolation (Brent's method).

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMax {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Maximizes `f` on `[lo, hi]` until the bracket is narrower than about `tol`.
pub fn brent_maximize<E, F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<ScalarMax, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    // Work with the negated objective so the textbook minimization applies.
    let mut fx = -f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut iterations = 0;

    while iterations < max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = 2.0 * f64::EPSILON * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        iterations += 1;

        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = -f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok(ScalarMax {
        x,
        value: -fx,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_quadratic_peak() {
        let r = brent_maximize::<Infallible, _>(|x| Ok(-(x - 0.3) * (x - 0.3)), -1.0, 2.0, 1e-10, 200).unwrap();
        assert!((r.x - 0.3).abs() < 1e-8);
        assert!(r.iterations < 60);
    }

    #[test]
    fn converges_to_endpoint_for_monotone() {
        let r = brent_maximize::<Infallible, _>(|x| Ok(-x), 0.0, 1.0, 1e-10, 500).unwrap();
        assert!(r.x < 1e-9);
    }

    #[test]
    fn non_smooth_peak() {
        let r = brent_maximize::<Infallible, _>(|x| Ok(-(x - 1.7).abs()), 0.0, 5.0, 1e-10, 500).unwrap();
        assert!((r.x - 1.7).abs() < 1e-9);
    }

    #[test]
    fn errors_propagate() {
        let r = brent_maximize(|x| if x > 0.5 { Err("boom") } else { Ok(x) }, 0.0, 1.0, 1e-8, 100);
        assert_eq!(r, Err("boom"));
    }
}
