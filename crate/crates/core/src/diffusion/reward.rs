//! Rewards and the bundle that ties a reward to a process.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Diffusion, Jet, Mirrored, Side};
use crate::error::{Error, Result};
use crate::markov::{RealFn, SignedMeasure};

/// A reward function `g`, piecewise `C²` with declared kinks and jumps.
pub trait Reward: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    /// One-sided first derivative.
    fn deriv(&self, x: f64, side: Side) -> f64;
    /// Second derivative, one-sided at kinks.
    fn second(&self, x: f64, side: Side) -> f64;
    /// Points where `g` is continuous but not `C²`.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Points where `g` is discontinuous (right-continuous there).
    fn jumps(&self) -> Vec<f64> {
        Vec::new()
    }
    fn jet(&self, x: f64, side: Side) -> Jet {
        Jet { value: self.value(x), d1: self.deriv(x, side), d2: self.second(x, side) }
    }
}

/// Rewards addressable by name in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedReward {
    /// `max(x, 0)`.
    XPlus,
    /// `max(x − k, 0)`.
    Call { k: f64 },
    /// `max(k − x, 0)`.
    Put { k: f64 },
    /// `e^{σx}`.
    Exp { sigma: f64 },
    /// `|x|^p`.
    Power { p: f64 },
    Abs,
    /// Polynomial, coefficients from the highest degree down.
    Poly { coeffs: Vec<f64> },
    /// Linear interpolation through `(x, y)` points, extended with the end slopes.
    PiecewiseLinear { points: Vec<[f64; 2]> },
    /// `1` on `[at, ∞)`, `0` below.
    Step { at: f64 },
    /// `0` below `−1/a`, `ax + 1` up to 0, `1` beyond.
    Ramp { a: f64 },
    /// `max(k − e^{scale·x}, 0)`.
    LogPut {
        k: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn side_pick(x: f64, at: f64, side: Side) -> bool {
    x > at || (x == at && side == Side::Right)
}

impl NamedReward {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadParams(m.to_string()));
        match self {
            NamedReward::Call { k } | NamedReward::Put { k } if !k.is_finite() => bad("strike must be finite"),
            NamedReward::Exp { sigma } if !sigma.is_finite() => bad("sigma must be finite"),
            NamedReward::Power { p } if !(p.is_finite() && *p > 0.0) => bad("power must be positive"),
            NamedReward::Poly { coeffs } if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) => {
                bad("polynomial needs finite coefficients")
            }
            NamedReward::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return bad("piecewise_linear needs at least two points");
                }
                if points.windows(2).any(|w| !(w[1][0] > w[0][0])) || points.iter().flatten().any(|v| !v.is_finite()) {
                    return bad("piecewise_linear points must be finite with increasing x");
                }
                Ok(())
            }
            NamedReward::Step { at } if !at.is_finite() => bad("step location must be finite"),
            NamedReward::Ramp { a } if !(a.is_finite() && *a > 0.0) => bad("ramp slope must be positive"),
            NamedReward::LogPut { k, scale } if !(k.is_finite() && *k > 0.0 && scale.is_finite() && *scale != 0.0) => {
                bad("log_put needs k > 0 and a nonzero scale")
            }
            _ => Ok(()),
        }
    }

    pub fn into_reward(self) -> Result<Arc<dyn Reward>> {
        self.validate()?;
        Ok(Arc::new(self))
    }

    fn slope_index(points: &[[f64; 2]], x: f64, side: Side) -> usize {
        let n = points.len();
        let mut i = 0;
        while i + 2 < n && side_pick(x, points[i + 1][0], side) {
            i += 1;
        }
        i
    }
}

impl Reward for NamedReward {
    fn value(&self, x: f64) -> f64 {
        match self {
            NamedReward::XPlus => x.max(0.0),
            NamedReward::Call { k } => (x - k).max(0.0),
            NamedReward::Put { k } => (k - x).max(0.0),
            NamedReward::Exp { sigma } => (sigma * x).exp(),
            NamedReward::Power { p } => x.abs().powf(*p),
            NamedReward::Abs => x.abs(),
            NamedReward::Poly { coeffs } => coeffs.iter().fold(0.0, |acc, c| acc * x + c),
            NamedReward::PiecewiseLinear { points } => {
                let i = Self::slope_index(points, x, Side::Right);
                let (a, b) = (points[i], points[i + 1]);
                a[1] + (b[1] - a[1]) / (b[0] - a[0]) * (x - a[0])
            }
            NamedReward::Step { at } => {
                if x >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            NamedReward::Ramp { a } => (a * x + 1.0).clamp(0.0, 1.0),
            NamedReward::LogPut { k, scale } => (k - (scale * x).exp()).max(0.0),
        }
    }

    fn deriv(&self, x: f64, side: Side) -> f64 {
        match self {
            NamedReward::XPlus => f64::from(u8::from(side_pick(x, 0.0, side))),
            NamedReward::Call { k } => f64::from(u8::from(side_pick(x, *k, side))),
            NamedReward::Put { k } => -f64::from(u8::from(!side_pick(x, *k, side))),
            NamedReward::Exp { sigma } => sigma * (sigma * x).exp(),
            NamedReward::Power { p } => {
                let sign = if side_pick(x, 0.0, side) { 1.0 } else { -1.0 };
                sign * p * x.abs().powf(p - 1.0)
            }
            NamedReward::Abs => {
                if side_pick(x, 0.0, side) {
                    1.0
                } else {
                    -1.0
                }
            }
            NamedReward::Poly { coeffs } => {
                let n = coeffs.len();
                coeffs.iter().enumerate().take(n.saturating_sub(1)).fold(0.0, |acc, (i, c)| acc * x + c * (n - 1 - i) as f64)
            }
            NamedReward::PiecewiseLinear { points } => {
                let i = Self::slope_index(points, x, side);
                let (a, b) = (points[i], points[i + 1]);
                (b[1] - a[1]) / (b[0] - a[0])
            }
            NamedReward::Step { .. } => 0.0,
            NamedReward::Ramp { a } => {
                if side_pick(x, -1.0 / a, side) && !side_pick(x, 0.0, side) {
                    *a
                } else {
                    0.0
                }
            }
            NamedReward::LogPut { k, scale } => {
                if side_pick(x, k.ln() / scale, side) == (*scale > 0.0) {
                    0.0
                } else {
                    -scale * (scale * x).exp()
                }
            }
        }
    }

    fn second(&self, x: f64, side: Side) -> f64 {
        match self {
            NamedReward::Exp { sigma } => sigma * sigma * (sigma * x).exp(),
            NamedReward::Power { p } => p * (p - 1.0) * x.abs().powf(p - 2.0),
            NamedReward::Poly { coeffs } => {
                let n = coeffs.len();
                coeffs.iter().enumerate().take(n.saturating_sub(2)).fold(0.0, |acc, (i, c)| {
                    let d = (n - 1 - i) as f64;
                    acc * x + c * d * (d - 1.0)
                })
            }
            NamedReward::LogPut { k, scale } => {
                if side_pick(x, k.ln() / scale, side) == (*scale > 0.0) {
                    0.0
                } else {
                    -scale * scale * (scale * x).exp()
                }
            }
            _ => 0.0,
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            NamedReward::XPlus | NamedReward::Abs => vec![0.0],
            NamedReward::Call { k } | NamedReward::Put { k } => vec![*k],
            NamedReward::Power { p } if *p < 2.0 => vec![0.0],
            NamedReward::PiecewiseLinear { points } => {
                let n = points.len();
                (1..n - 1)
                    .filter(|&i| {
                        let s0 = (points[i][1] - points[i - 1][1]) / (points[i][0] - points[i - 1][0]);
                        let s1 = (points[i + 1][1] - points[i][1]) / (points[i + 1][0] - points[i][0]);
                        s0 != s1
                    })
                    .map(|i| points[i][0])
                    .collect()
            }
            NamedReward::Ramp { a } => vec![-1.0 / a, 0.0],
            NamedReward::LogPut { k, scale } => vec![k.ln() / scale],
            _ => Vec::new(),
        }
    }

    fn jumps(&self) -> Vec<f64> {
        match self {
            NamedReward::Step { at } => vec![*at],
            _ => Vec::new(),
        }
    }
}

/// Reward given by closures, for library callers.
#[derive(Clone)]
pub struct FnReward {
    pub value: RealFn,
    pub deriv: Arc<dyn Fn(f64, Side) -> f64 + Send + Sync>,
    pub second: Arc<dyn Fn(f64, Side) -> f64 + Send + Sync>,
    pub kinks: Vec<f64>,
}

impl fmt::Debug for FnReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnReward").field("kinks", &self.kinks).finish_non_exhaustive()
    }
}

impl Reward for FnReward {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
    fn deriv(&self, x: f64, side: Side) -> f64 {
        (self.deriv)(x, side)
    }
    fn second(&self, x: f64, side: Side) -> f64 {
        (self.second)(x, side)
    }
    fn kinks(&self) -> Vec<f64> {
        self.kinks.clone()
    }
}

/// `x ↦ g(−x)`.
#[derive(Debug, Clone)]
struct MirroredReward(Arc<dyn Reward>);

impl Reward for MirroredReward {
    fn value(&self, x: f64) -> f64 {
        self.0.value(-x)
    }
    fn deriv(&self, x: f64, side: Side) -> f64 {
        -self.0.deriv(-x, side.flip())
    }
    fn second(&self, x: f64, side: Side) -> f64 {
        self.0.second(-x, side.flip())
    }
    fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.0.kinks().into_iter().map(|x| -x).collect();
        k.reverse();
        k
    }
    fn jumps(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.0.jumps().into_iter().map(|x| -x).collect();
        k.reverse();
        k
    }
}

/// A reward attached to a process, with `(α − L)g` and the representing
/// measure `ν` such that `g(x) = ∫ G(x, y) ν(dy)` when the inversion holds.
#[derive(Clone)]
pub struct RewardBundle {
    process: Arc<dyn Diffusion>,
    reward: Arc<dyn Reward>,
    kinks: Vec<f64>,
    nu: SignedMeasure,
}

impl fmt::Debug for RewardBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardBundle")
            .field("process", &self.process)
            .field("reward", &self.reward)
            .field("nu", &self.nu)
            .finish()
    }
}

impl RewardBundle {
    pub fn new(process: Arc<dyn Diffusion>, reward: Arc<dyn Reward>) -> Result<Self> {
        let state = process.state();
        let mut kinks: Vec<f64> = reward.kinks().into_iter().chain(reward.jumps()).filter(|k| state.contains(*k)).collect();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();

        let alpha = process.alpha();
        let density: RealFn = {
            let (p, g) = (process.clone(), reward.clone());
            Arc::new(move |y| p.generator(y, g.jet(y, Side::Right)) * p.speed_density(y))
        };
        let mut special: Vec<f64> = kinks.iter().copied().chain(process.singular_points()).collect();
        special.extend(process.speed_atoms().iter().map(|a| a.at));
        special.retain(|x| state.contains_interior(*x));
        special.sort_by(f64::total_cmp);
        special.dedup();

        let mut nu = SignedMeasure::with_density(state, density).with_breaks(special.iter().copied());
        let flux = |x: f64, side: Side| reward.deriv(x, side) / process.scale_deriv(x, side);
        for &p in &special {
            let speed_atom: f64 = process.speed_atoms().iter().filter(|a| a.at == p).map(|a| a.mass).sum();
            let mass = alpha * reward.value(p) * speed_atom - (flux(p, Side::Right) - flux(p, Side::Left));
            if mass != 0.0 {
                nu = nu.add_atom(p, mass)?;
            }
        }
        // closed boundary: the flux outside the state is zero
        if state.left_closed() {
            let l = state.left();
            let speed_atom: f64 = process.speed_atoms().iter().filter(|a| a.at == l).map(|a| a.mass).sum();
            let mass = alpha * reward.value(l) * speed_atom - flux(l, Side::Right);
            if mass != 0.0 {
                nu = nu.add_atom(l, mass)?;
            }
        }
        if state.right_closed() {
            let r = state.right();
            let speed_atom: f64 = process.speed_atoms().iter().filter(|a| a.at == r).map(|a| a.mass).sum();
            let mass = alpha * reward.value(r) * speed_atom + flux(r, Side::Left);
            if mass != 0.0 {
                nu = nu.add_atom(r, mass)?;
            }
        }
        Ok(Self { process, reward, kinks, nu })
    }

    pub fn from_named(process: Arc<dyn Diffusion>, reward: NamedReward) -> Result<Self> {
        Self::new(process, reward.into_reward()?)
    }

    /// The same problem for `−X` with reward `g(−x)`.
    pub fn mirrored(&self) -> Result<Self> {
        Self::new(Arc::new(Mirrored::new(self.process.clone())), Arc::new(MirroredReward(self.reward.clone())))
    }

    pub fn process(&self) -> &dyn Diffusion {
        self.process.as_ref()
    }

    pub fn process_arc(&self) -> &Arc<dyn Diffusion> {
        &self.process
    }

    pub fn reward(&self) -> &Arc<dyn Reward> {
        &self.reward
    }

    pub fn g(&self, x: f64) -> f64 {
        self.reward.value(x)
    }

    pub fn g_deriv(&self, x: f64, side: Side) -> f64 {
        self.reward.deriv(x, side)
    }

    /// `(α − L)g(x)` in closed form; meaningful off kinks.
    pub fn alg(&self, x: f64) -> f64 {
        self.process.generator(x, self.reward.jet(x, Side::Right))
    }

    /// `(α − L)g(x)` with `L = d/dm d/ds` by central differences; a cross-check
    /// of [`Self::alg`] away from kinks and singular points.
    pub fn alg_numeric(&self, x: f64, h: f64) -> f64 {
        let p = &self.process;
        let g = |y: f64| self.reward.value(y);
        let up = (g(x + h) - g(x)) / (p.scale(x + h) - p.scale(x));
        let down = (g(x) - g(x - h)) / (p.scale(x) - p.scale(x - h));
        let mass = 0.5 * (p.speed_density(x + 0.5 * h) + p.speed_density(x - 0.5 * h)) * h;
        p.alpha() * g(x) - (up - down) / mass
    }

    /// Kinks and jump points of `g` inside the state interval.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// Representing measure `ν`: density `(α − L)g · m` plus atoms at kinks,
    /// singular points and speed atoms.
    pub fn nu(&self) -> &SignedMeasure {
        &self.nu
    }
}
