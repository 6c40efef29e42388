//! Adaptive Gauss–Kronrod (7/15) quadrature with exponential-tail truncation.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::Tolerances;
use crate::error::{Error, Result};

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;
const MAX_TAIL_PANELS: usize = 90;

#[derive(Clone, Copy)]
struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
    abs: f64,
    fmax: f64,
}

fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Result<Segment<T>> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.magnitude() * WGK[7];
    let mut fmax = fc.magnitude();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        let s = f1 + f2;
        kron = kron + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
        let (m1, m2) = (f1.magnitude(), f2.magnitude());
        abs += (m1 + m2) * WGK[j];
        fmax = fmax.max(m1).max(m2);
    }
    if !fmax.is_finite() {
        return Err(Error::NonConvergent(format!("integrand not finite on [{a}, {b}]")));
    }
    let value = kron * h;
    let err = (kron - gauss).magnitude() * h.abs();
    Ok(Segment { a, b, value, err, abs: abs * h.abs(), fmax })
}

/// Result of a finite-interval integration together with the largest
/// integrand magnitude that was sampled.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub fmax: f64,
}

/// Globally adaptive integration over a finite interval.
pub fn integrate_finite<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    tol: &Tolerances,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate { value: T::default(), fmax: 0.0 });
    }
    let mut segs = vec![gk15(f, a, b)?];
    loop {
        let mut total = T::default();
        let mut err = 0.0;
        let mut abs = 0.0;
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            total = total + s.value;
            err += s.err;
            abs += s.abs;
            if s.err > segs[worst].err {
                worst = i;
            }
        }
        let target = (tol.quad_rel * total.magnitude()).max(1e-14 * abs).max(f64::MIN_POSITIVE);
        if err <= target {
            let fmax = segs.iter().fold(0.0f64, |m, s| m.max(s.fmax));
            return Ok(Estimate { value: total, fmax });
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::NonConvergent(format!(
                "quadrature on [{a}, {b}] stalled with error {err:e}"
            )));
        }
        let s = segs.swap_remove(worst);
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            return Err(Error::NonConvergent(format!("segment at {m} cannot be split further")));
        }
        segs.push(gk15(f, s.a, m)?);
        segs.push(gk15(f, m, s.b)?);
    }
}

fn settled<T: QuadValue>(extrapolated: Option<T>, change: f64) -> bool {
    extrapolated.is_some_and(|x| change <= 1e-7 * x.magnitude())
}

/// Geometric estimate of what is left after a panel of size `piece`.
fn remainder(piece: f64, ratio: f64) -> f64 {
    if ratio < 1.0 {
        piece * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    }
}

/// Integrate from `a` towards `+inf` (`towards_right`) or `-inf`, marching over
/// panels of doubling width and stopping once the integrand magnitude falls
/// below `tail_cutoff` times its running maximum.
fn integrate_tail<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    towards_right: bool,
    tol: &Tolerances,
) -> Result<T> {
    let dir = if towards_right { 1.0 } else { -1.0 };
    let mut total = T::default();
    let mut running_max = 0.0f64;
    let mut quiet = 0;
    let mut start = a;
    let mut width = 1.0f64.max(0.125 * a.abs());
    let mut prev_piece = 0.0f64;
    let mut prev_ratio = f64::NAN;
    let mut prev_extrapolated: Option<T> = None;
    let mut extrapolation_change = f64::INFINITY;
    let mut gross = 0.0f64;
    let mut prev_fmax = f64::INFINITY;
    for _ in 0..MAX_TAIL_PANELS {
        let end = start + dir * width;
        let (lo, hi) = if towards_right { (start, end) } else { (end, start) };
        let est = match integrate_finite(f, lo, hi, tol) {
            Ok(est) => est,
            // factors of a decayed product can overflow separately far out;
            // a power-law remainder is added only once its estimate has settled
            Err(_) if running_max > 0.0 && prev_ratio < 0.95 && settled(prev_extrapolated, extrapolation_change) => {
                return Ok(prev_extrapolated.unwrap_or(total));
            }
            Err(_) if running_max > 0.0 && prev_fmax <= 1e-6 * running_max && remainder(prev_piece, prev_ratio) <= 1e-9 * gross => {
                return Ok(total);
            }
            Err(_) if width > 1e-3 => {
                width *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let piece = est.value;
        total = total + piece;
        gross += piece.magnitude();
        // power-law tails: panel integrals over doubling widths decay geometrically
        let ratio = piece.magnitude() / prev_piece;
        if ratio < 0.95 && (ratio - prev_ratio).abs() <= 1e-4 {
            let extrapolated = total + piece * (ratio / (1.0 - ratio));
            if let Some(prev) = prev_extrapolated {
                extrapolation_change = (extrapolated - prev).magnitude();
                if extrapolation_change <= tol.quad_rel * extrapolated.magnitude() {
                    return Ok(extrapolated);
                }
            }
            prev_extrapolated = Some(extrapolated);
        } else {
            prev_extrapolated = None;
            extrapolation_change = f64::INFINITY;
        }
        prev_ratio = ratio;
        prev_piece = piece.magnitude();
        running_max = running_max.max(est.fmax);
        prev_fmax = est.fmax;
        let small_f = est.fmax <= tol.tail_cutoff * running_max;
        let small_piece = piece.magnitude() <= tol.tail_cutoff * total.magnitude().max(f64::MIN_POSITIVE);
        if running_max == 0.0 || small_f && small_piece || est.fmax == 0.0 && running_max > 0.0 {
            quiet += 1;
            if quiet >= 2 && (running_max > 0.0 || (end - a).abs() > 1e6) {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        start = end;
        width *= 2.0;
        if !start.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergent(format!("tail integral from {a} does not decay")))
}

/// Integrate `f` over `(a, b)`; either end may be infinite.
pub fn integrate_fn<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, tol: &Tolerances) -> Result<T> {
    integrate_fn_breaks(f, a, b, &[], tol)
}

/// Integrate `f` over `(a, b)`, splitting at the given interior break points.
pub fn integrate_fn_breaks<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: &Tolerances,
) -> Result<T> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::BadParams("NaN integration limit".into()));
    }
    if a > b {
        let v: T = integrate_fn_breaks(f, b, a, breaks, tol)?;
        return Ok(T::default() - v);
    }
    if a == b {
        return Ok(T::default());
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b && x.is_finite()).collect();
    if a.is_infinite() && b.is_infinite() && pts.is_empty() {
        pts.push(0.0);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut knots = Vec::with_capacity(pts.len() + 2);
    knots.push(a);
    knots.extend(pts);
    knots.push(b);
    let mut total = T::default();
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let piece = match (lo.is_infinite(), hi.is_infinite()) {
            (false, false) => integrate_finite(f, lo, hi, tol)?.value,
            (true, false) => integrate_tail(f, hi, false, tol)?,
            (false, true) => integrate_tail(f, lo, true, tol)?,
            (true, true) => unreachable!("split at a finite knot"),
        };
        total = total + piece;
    }
    Ok(total)
}
