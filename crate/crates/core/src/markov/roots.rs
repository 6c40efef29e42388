//! Bracketing root finders.

use super::Tolerances;
use crate::error::{Error, Result};

const MAX_ITER: usize = 300;

/// Brent's method: bisection safeguarded secant / inverse quadratic steps.
///
/// Requires `h(lo) * h(hi) <= 0`. The returned point has a bracket width of at
/// most `tol.root_abs` (or hits an exact zero).
pub fn find_root<F: FnMut(f64) -> f64>(mut h: F, lo: f64, hi: f64, tol: &Tolerances) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (h(a), h(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::NonConvergent(format!("NaN at bracket ends [{lo}, {hi}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.root_abs;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = h(b);
        if fb.is_nan() {
            return Err(Error::NonConvergent(format!("NaN while refining root near {b}")));
        }
    }
    Err(Error::NonConvergent(format!("root finder exceeded {MAX_ITER} iterations")))
}

/// Sign-change brackets of `h` on a uniform grid of `n` cells over `[lo, hi]`,
/// ascending. Exact zeros on the grid produce a zero-width bracket.
pub fn sign_changes<F: FnMut(f64) -> f64>(mut h: F, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    let step = (hi - lo) / n as f64;
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut f0 = h(x0);
    for i in 1..=n {
        let x1 = if i == n { hi } else { lo + step * i as f64 };
        let f1 = h(x1);
        if f0 == 0.0 {
            out.push((x0, x0));
        } else if f0.is_finite() && f1.is_finite() && f1 != 0.0 && f0.signum() != f1.signum() {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 {
        out.push((x0, x0));
    }
    out
}
