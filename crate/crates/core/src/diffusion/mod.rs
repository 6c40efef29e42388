//! One-dimensional diffusions described by their analytic data (ψ, φ, scale,
//! speed, Wronskian) plus the Green function and hitting transforms built on it.

mod catalog;
mod mirror;
mod reward;

use std::fmt;

pub use catalog::{catalog, Bessel3, BmDrift, BrownianMotion, Gbm, ReflectedBm, SkewBm, StickyBm};
pub use mirror::Mirrored;
pub use reward::{FnReward, NamedReward, Reward, RewardBundle};

use crate::error::{Error, Result};
use crate::markov::{integrate, Atom, SignedMeasure, StateInterval, Tolerances};

/// Which one-sided limit to take at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Value and first two derivatives of a function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Stochastic differential equation form of a process, for simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sde {
    /// `dX = mu dt + sigma dW`.
    Bm { mu: f64, sigma: f64 },
    /// `dX = mu X dt + sigma X dW`.
    Gbm { mu: f64, sigma: f64 },
    /// `dX = mu dt + dW` reflected at 0.
    Reflected { mu: f64 },
    /// Norm of a three-dimensional Brownian motion.
    Bessel3,
}

/// A regular diffusion with a fixed discount rate.
///
/// Derivatives are plain derivatives in `x`; `side` selects the one-sided
/// value where the function is only piecewise smooth.
pub trait Diffusion: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn state(&self) -> StateInterval;
    fn alpha(&self) -> f64;
    fn psi(&self, x: f64) -> f64;
    fn phi(&self, x: f64) -> f64;
    fn psi_deriv(&self, x: f64, side: Side) -> f64;
    fn phi_deriv(&self, x: f64, side: Side) -> f64;
    fn scale(&self, x: f64) -> f64;
    fn scale_deriv(&self, x: f64, side: Side) -> f64;
    fn speed_density(&self, x: f64) -> f64;
    fn speed_atoms(&self) -> Vec<Atom> {
        Vec::new()
    }
    fn wronskian(&self) -> f64;
    /// `(α − L)g(x)` from the local jet of `g`, away from singular points.
    fn generator(&self, x: f64, g: Jet) -> f64;
    /// Points where ψ, φ or the scale are not smooth.
    fn singular_points(&self) -> Vec<f64> {
        Vec::new()
    }
    fn sde(&self) -> Option<Sde> {
        None
    }
}

fn check_in_state(p: &dyn Diffusion, x: f64) -> Result<()> {
    if p.state().contains(x) && x.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfDomain(x))
    }
}

/// Green function density w.r.t. the speed measure.
pub fn green(p: &dyn Diffusion, x: f64, y: f64) -> Result<f64> {
    check_in_state(p, x)?;
    check_in_state(p, y)?;
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    Ok(p.psi(lo) * p.phi(hi) / p.wronskian())
}

/// `E_x[e^{-ατ_z}]`.
pub fn hitting_transform(p: &dyn Diffusion, x: f64, z: f64) -> Result<f64> {
    check_in_state(p, x)?;
    check_in_state(p, z)?;
    Ok(if x <= z { p.psi(x) / p.psi(z) } else { p.phi(x) / p.phi(z) })
}

/// `∫_J G(x, y) μ(dy)` with `μ` already carrying the speed factor.
pub fn green_integral(p: &dyn Diffusion, x: f64, mu: &SignedMeasure, j: &StateInterval, tol: &Tolerances) -> Result<f64> {
    let w = p.wronskian();
    let mut total = 0.0;
    // y ≤ x: ψ(y)φ(x); y > x: ψ(x)φ(y)
    if j.left() <= x {
        let right_closed = if x < j.right() { true } else { j.right_closed() };
        let hi = x.min(j.right());
        if let Ok(below) = StateInterval::new(j.left(), hi, j.left_closed(), right_closed) {
            total += p.phi(x) * integrate(|y| p.psi(y), mu, &below, tol)?;
        }
    }
    if j.right() > x {
        let (lo, left_closed) = if x >= j.left() { (x, false) } else { (j.left(), j.left_closed()) };
        if let Ok(above) = StateInterval::new(lo, j.right(), left_closed, j.right_closed()) {
            total += p.psi(x) * integrate(|y| p.phi(y), mu, &above, tol)?;
        }
    }
    Ok(total / w)
}

/// `(α − L)g(x)` for the bundle's reward.
pub fn apply_generator(bundle: &RewardBundle, x: f64) -> Result<f64> {
    if bundle.kinks().contains(&x) {
        return Err(Error::AtKink(x));
    }
    check_in_state(bundle.process(), x)?;
    Ok(bundle.alg(x))
}

/// Result of checking the inversion formula `g(x) = ∫ G(x,y) ν(dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionReport {
    /// `(x, ∫ G(x,·) dν, g(x) − integral)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub max_residual: f64,
    /// `g/ψ` at the right truncation frontier, or `None` at a closed endpoint.
    pub right_ratio: Option<f64>,
    pub right_limit_holds: bool,
    pub left_ratio: Option<f64>,
    pub left_limit_holds: bool,
}

impl InversionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.right_limit_holds && self.left_limit_holds
    }
}

/// Samples `|g/h|` along a sequence approaching an endpoint and reports the
/// last ratio and whether it has decayed relative to the largest one seen.
fn limit_ratio(bundle: &RewardBundle, towards_right: bool, tol: &Tolerances) -> (Option<f64>, bool) {
    let p = bundle.process();
    let state = p.state();
    let end = if towards_right { state.right() } else { state.left() };
    let closed = if towards_right { state.right_closed() } else { state.left_closed() };
    if closed {
        return (None, true);
    }
    let h = |x: f64| if towards_right { p.psi(x) } else { p.phi(x) };
    let anchor = if state.contains_interior(0.0) {
        0.0
    } else if state.left().is_finite() && state.right().is_finite() {
        0.5 * (state.left() + state.right())
    } else if state.left().is_finite() {
        state.left() + 1.0
    } else {
        state.right() - 1.0
    };
    let h0 = h(anchor);
    let mut points = Vec::new();
    for k in 0..200 {
        let step = 2f64.powi(k - 4);
        let x = if end.is_infinite() {
            if towards_right { anchor + step } else { anchor - step }
        } else {
            let gap = (end - anchor).abs() * 2f64.powi(-k);
            if towards_right { end - gap } else { end + gap }
        };
        if !state.contains_interior(x) {
            break;
        }
        let hx = h(x);
        if !hx.is_finite() {
            break;
        }
        points.push(x);
        if hx / h0 >= 1.0 / tol.tail_cutoff {
            break;
        }
    }
    let mut worst = 0.0f64;
    let mut last = 0.0;
    for &x in &points {
        let r = (bundle.g(x) / h(x)).abs();
        if !r.is_finite() {
            return (Some(f64::INFINITY), false);
        }
        worst = worst.max(r);
        last = r;
    }
    let holds = last <= 1e-9 || last <= 1e-3 * worst;
    (Some(last), holds)
}

/// Checks `g(x) = ∫_I G(x,y) ν(dy)` at the given points plus the limit
/// conditions `g/ψ → 0` at the right end and `g/φ → 0` at the left end.
pub fn check_inversion(bundle: &RewardBundle, xs: &[f64], tol: &Tolerances) -> Result<InversionReport> {
    let p = bundle.process();
    let state = p.state();
    let mut rows = Vec::with_capacity(xs.len());
    let mut max_residual = 0.0f64;
    for &x in xs {
        check_in_state(p, x)?;
        let v = green_integral(p, x, bundle.nu(), &state, tol)?;
        let r = bundle.g(x) - v;
        max_residual = max_residual.max(r.abs());
        rows.push((x, v, r));
    }
    let (right_ratio, right_limit_holds) = limit_ratio(bundle, true, tol);
    let (left_ratio, left_limit_holds) = limit_ratio(bundle, false, tol);
    Ok(InversionReport { rows, max_residual, right_ratio, right_limit_holds, left_ratio, left_limit_holds })
}

/// Largest relative deviation of `ψ'φ − ψφ'` from `w·s'` over the points.
pub fn wronskian_defect(p: &dyn Diffusion, xs: &[f64]) -> f64 {
    let w = p.wronskian();
    xs.iter()
        .map(|&x| {
            let lhs = p.psi_deriv(x, Side::Right) * p.phi(x) - p.psi(x) * p.phi_deriv(x, Side::Right);
            (lhs - w * p.scale_deriv(x, Side::Right)).abs() / (w * p.scale_deriv(x, Side::Right))
        })
        .fold(0.0, f64::max)
}
