//! Closed-form catalog of diffusions.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Diffusion, Jet, Sde, Side};
use crate::error::{Error, Result};
use crate::markov::{Atom, StateInterval};

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::BadParams(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BadParams(format!("{name} must be finite, got {v}")))
    }
}

/// Standard Brownian motion.
#[derive(Debug, Clone)]
pub struct BrownianMotion {
    alpha: f64,
    c: f64,
}

impl BrownianMotion {
    pub fn new(alpha: f64) -> Result<Self> {
        let alpha = positive("alpha", alpha)?;
        Ok(Self { alpha, c: (2.0 * alpha).sqrt() })
    }
}

impl Diffusion for BrownianMotion {
    fn name(&self) -> &str {
        "bm"
    }
    fn state(&self) -> StateInterval {
        StateInterval::real_line()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn psi(&self, x: f64) -> f64 {
        (self.c * x).exp()
    }
    fn phi(&self, x: f64) -> f64 {
        (-self.c * x).exp()
    }
    fn psi_deriv(&self, x: f64, _: Side) -> f64 {
        self.c * self.psi(x)
    }
    fn phi_deriv(&self, x: f64, _: Side) -> f64 {
        -self.c * self.phi(x)
    }
    fn scale(&self, x: f64) -> f64 {
        x
    }
    fn scale_deriv(&self, _: f64, _: Side) -> f64 {
        1.0
    }
    fn speed_density(&self, _: f64) -> f64 {
        2.0
    }
    fn wronskian(&self) -> f64 {
        2.0 * self.c
    }
    fn generator(&self, _: f64, g: Jet) -> f64 {
        self.alpha * g.value - 0.5 * g.d2
    }
    fn sde(&self) -> Option<Sde> {
        Some(Sde::Bm { mu: 0.0, sigma: 1.0 })
    }
}

/// Brownian motion with drift `mu`.
#[derive(Debug, Clone)]
pub struct BmDrift {
    alpha: f64,
    mu: f64,
    gamma: f64,
}

impl BmDrift {
    pub fn new(alpha: f64, mu: f64) -> Result<Self> {
        let alpha = positive("alpha", alpha)?;
        let mu = finite("mu", mu)?;
        Ok(Self { alpha, mu, gamma: (2.0 * alpha + mu * mu).sqrt() })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Diffusion for BmDrift {
    fn name(&self) -> &str {
        "bm_drift"
    }
    fn state(&self) -> StateInterval {
        StateInterval::real_line()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn psi(&self, x: f64) -> f64 {
        ((self.gamma - self.mu) * x).exp()
    }
    fn phi(&self, x: f64) -> f64 {
        (-(self.gamma + self.mu) * x).exp()
    }
    fn psi_deriv(&self, x: f64, _: Side) -> f64 {
        (self.gamma - self.mu) * self.psi(x)
    }
    fn phi_deriv(&self, x: f64, _: Side) -> f64 {
        -(self.gamma + self.mu) * self.phi(x)
    }
    fn scale(&self, x: f64) -> f64 {
        if self.mu == 0.0 {
            x
        } else {
            -(-2.0 * self.mu * x).exp_m1() / (2.0 * self.mu)
        }
    }
    fn scale_deriv(&self, x: f64, _: Side) -> f64 {
        (-2.0 * self.mu * x).exp()
    }
    fn speed_density(&self, x: f64) -> f64 {
        2.0 * (2.0 * self.mu * x).exp()
    }
    fn wronskian(&self) -> f64 {
        2.0 * self.gamma
    }
    fn generator(&self, _: f64, g: Jet) -> f64 {
        self.alpha * g.value - 0.5 * g.d2 - self.mu * g.d1
    }
    fn sde(&self) -> Option<Sde> {
        Some(Sde::Bm { mu: self.mu, sigma: 1.0 })
    }
}

/// Geometric Brownian motion `dX = μX dt + σX dW` on `(0, ∞)`.
#[derive(Debug, Clone)]
pub struct Gbm {
    alpha: f64,
    mu: f64,
    sigma: f64,
    gamma1: f64,
    gamma2: f64,
}

impl Gbm {
    pub fn new(alpha: f64, mu: f64, sigma: f64) -> Result<Self> {
        let alpha = positive("alpha", alpha)?;
        let mu = finite("mu", mu)?;
        let sigma = positive("sigma", sigma)?;
        let s2 = sigma * sigma;
        let b = 0.5 - mu / s2;
        let root = (b * b + 2.0 * alpha / s2).sqrt();
        Ok(Self { alpha, mu, sigma, gamma1: b + root, gamma2: b - root })
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    fn nu(&self) -> f64 {
        self.mu / (self.sigma * self.sigma) - 0.5
    }
}

impl Diffusion for Gbm {
    fn name(&self) -> &str {
        "gbm"
    }
    fn state(&self) -> StateInterval {
        StateInterval::open(0.0, f64::INFINITY).expect("valid")
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn psi(&self, x: f64) -> f64 {
        x.powf(self.gamma1)
    }
    fn phi(&self, x: f64) -> f64 {
        x.powf(self.gamma2)
    }
    fn psi_deriv(&self, x: f64, _: Side) -> f64 {
        self.gamma1 * x.powf(self.gamma1 - 1.0)
    }
    fn phi_deriv(&self, x: f64, _: Side) -> f64 {
        self.gamma2 * x.powf(self.gamma2 - 1.0)
    }
    fn scale(&self, x: f64) -> f64 {
        let nu = self.nu();
        if nu == 0.0 {
            x.ln()
        } else {
            -x.powf(-2.0 * nu) / (2.0 * nu)
        }
    }
    fn scale_deriv(&self, x: f64, _: Side) -> f64 {
        x.powf(-2.0 * self.nu() - 1.0)
    }
    fn speed_density(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        2.0 / s2 * x.powf(2.0 * self.mu / s2 - 2.0)
    }
    fn wronskian(&self) -> f64 {
        self.gamma1 - self.gamma2
    }
    fn generator(&self, x: f64, g: Jet) -> f64 {
        self.alpha * g.value - 0.5 * self.sigma * self.sigma * x * x * g.d2 - self.mu * x * g.d1
    }
    fn sde(&self) -> Option<Sde> {
        Some(Sde::Gbm { mu: self.mu, sigma: self.sigma })
    }
}

/// Brownian motion with drift `−δ` reflected at 0, on `[0, ∞)`.
#[derive(Debug, Clone)]
pub struct ReflectedBm {
    alpha: f64,
    delta: f64,
    gamma: f64,
}

impl ReflectedBm {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        let alpha = positive("alpha", alpha)?;
        let delta = finite("delta", delta)?;
        Ok(Self { alpha, delta, gamma: (2.0 * alpha + delta * delta).sqrt() })
    }

    /// Parametrization of the Russian option: `δ = (r + σ²/2)/σ`.
    pub fn russian(alpha: f64, r: f64, sigma: f64) -> Result<Self> {
        let sigma = positive("sigma", sigma)?;
        Self::new(alpha, (finite("r", r)? + 0.5 * sigma * sigma) / sigma)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn weights(&self) -> (f64, f64) {
        let (g, d) = (self.gamma, self.delta);
        ((g - d) / (2.0 * g), (g + d) / (2.0 * g))
    }
}

impl Diffusion for ReflectedBm {
    fn name(&self) -> &str {
        "reflected_bm"
    }
    fn state(&self) -> StateInterval {
        StateInterval::right_ray(0.0, true).expect("valid")
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn psi(&self, x: f64) -> f64 {
        let (a, b) = self.weights();
        a * ((self.gamma + self.delta) * x).exp() + b * (-(self.gamma - self.delta) * x).exp()
    }
    fn phi(&self, x: f64) -> f64 {
        (-(self.gamma - self.delta) * x).exp()
    }
    fn psi_deriv(&self, x: f64, _: Side) -> f64 {
        let (a, b) = self.weights();
        let (up, down) = (self.gamma + self.delta, self.gamma - self.delta);
        a * up * (up * x).exp() - b * down * (-down * x).exp()
    }
    fn phi_deriv(&self, x: f64, _: Side) -> f64 {
        -(self.gamma - self.delta) * self.phi(x)
    }
    fn scale(&self, x: f64) -> f64 {
        if self.delta == 0.0 {
            x
        } else {
            (2.0 * self.delta * x).exp_m1() / (2.0 * self.delta)
        }
    }
    fn scale_deriv(&self, x: f64, _: Side) -> f64 {
        (2.0 * self.delta * x).exp()
    }
    fn speed_density(&self, x: f64) -> f64 {
        2.0 * (-2.0 * self.delta * x).exp()
    }
    fn wronskian(&self) -> f64 {
        self.gamma - self.delta
    }
    fn generator(&self, _: f64, g: Jet) -> f64 {
        self.alpha * g.value - 0.5 * g.d2 + self.delta * g.d1
    }
    fn sde(&self) -> Option<Sde> {
        Some(Sde::Reflected { mu: -self.delta })
    }
}

/// Skew Brownian motion with skewness `β ∈ (0, 1)` at 0.
#[derive(Debug, Clone)]
pub struct SkewBm {
    alpha: f64,
    beta: f64,
    c: f64,
}

impl SkewBm {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let alpha = positive("alpha", alpha)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::BadParams(format!("beta must lie in (0, 1), got {beta}")));
        }
        Ok(Self { alpha, beta, c: (2.0 * alpha).sqrt() })
    }

    fn k_up(&self) -> f64 {
        (1.0 - 2.0 * self.beta) / self.beta
    }

    fn k_down(&self) -> f64 {
        (1.0 - 2.0 * self.beta) / (1.0 - self.beta)
    }
}

fn upper(x: f64, side: Side) -> bool {
    x > 0.0 || (x == 0.0 && side == Side::Right)
}

impl Diffusion for SkewBm {
    fn name(&self) -> &str {
        "skew_bm"
    }
    fn state(&self) -> StateInterval {
        StateInterval::real_line()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn psi(&self, x: f64) -> f64 {
        let c = self.c;
        if x >= 0.0 {
            self.k_up() * (c * x).sinh() + (c * x).exp()
        } else {
            (c * x).exp()
        }
    }
    fn phi(&self, x: f64) -> f64 {
        let c = self.c;
        if x <= 0.0 {
            self.k_down() * (c * x).sinh() + (-c * x).exp()
        } else {
            (-c * x).exp()
        }
    }
    fn psi_deriv(&self, x: f64, side: Side) -> f64 {
        let c = self.c;
        if upper(x, side) {
            self.k_up() * c * (c * x).cosh() + c * (c * x).exp()
        } else {
            c * (c * x).exp()
        }
    }
    fn phi_deriv(&self, x: f64, side: Side) -> f64 {
        let c = self.c;
        if upper(x, side) {
            -c * (-c * x).exp()
        } else {
            self.k_down() * c * (c * x).cosh() - c * (-c * x).exp()
        }
    }
    fn scale(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x / self.beta
        } else {
            x / (1.0 - self.beta)
        }
    }
    fn scale_deriv(&self, x: f64, side: Side) -> f64 {
        if upper(x, side) {
            1.0 / self.beta
        } else {
            1.0 / (1.0 - self.beta)
        }
    }
    fn speed_density(&self, x: f64) -> f64 {
        if x > 0.0 {
            2.0 * self.beta
        } else {
            2.0 * (1.0 - self.beta)
        }
    }
    fn wronskian(&self) -> f64 {
        self.c
    }
    fn generator(&self, _: f64, g: Jet) -> f64 {
        self.alpha * g.value - 0.5 * g.d2
    }
    fn singular_points(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// Brownian motion sticky at 0: speed measure `2dx + 2δ₀`.
#[derive(Debug, Clone)]
pub struct StickyBm {
    alpha: f64,
    c: f64,
}

impl StickyBm {
    pub fn new(alpha: f64) -> Result<Self> {
        let alpha = positive("alpha", alpha)?;
        Ok(Self { alpha, c: (2.0 * alpha).sqrt() })
    }
}

impl Diffusion for StickyBm {
    fn name(&self) -> &str {
        "sticky_bm"
    }
    fn state(&self) -> StateInterval {
        StateInterval::real_line()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn psi(&self, x: f64) -> f64 {
        let c = self.c;
        if x >= 0.0 {
            (c * x).exp() + c * (c * x).sinh()
        } else {
            (c * x).exp()
        }
    }
    fn phi(&self, x: f64) -> f64 {
        let c = self.c;
        if x <= 0.0 {
            (-c * x).exp() - c * (c * x).sinh()
        } else {
            (-c * x).exp()
        }
    }
    fn psi_deriv(&self, x: f64, side: Side) -> f64 {
        let c = self.c;
        if upper(x, side) {
            c * (c * x).exp() + c * c * (c * x).cosh()
        } else {
            c * (c * x).exp()
        }
    }
    fn phi_deriv(&self, x: f64, side: Side) -> f64 {
        let c = self.c;
        if upper(x, side) {
            -c * (-c * x).exp()
        } else {
            -c * (-c * x).exp() - c * c * (c * x).cosh()
        }
    }
    fn scale(&self, x: f64) -> f64 {
        x
    }
    fn scale_deriv(&self, _: f64, _: Side) -> f64 {
        1.0
    }
    fn speed_density(&self, _: f64) -> f64 {
        2.0
    }
    fn speed_atoms(&self) -> Vec<Atom> {
        vec![Atom { at: 0.0, mass: 2.0 }]
    }
    fn wronskian(&self) -> f64 {
        2.0 * self.c + 2.0 * self.alpha
    }
    fn generator(&self, _: f64, g: Jet) -> f64 {
        self.alpha * g.value - 0.5 * g.d2
    }
    fn singular_points(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// Bessel process of dimension 3 on `(0, ∞)`.
#[derive(Debug, Clone)]
pub struct Bessel3 {
    alpha: f64,
    c: f64,
}

impl Bessel3 {
    pub fn new(alpha: f64) -> Result<Self> {
        let alpha = positive("alpha", alpha)?;
        Ok(Self { alpha, c: (2.0 * alpha).sqrt() })
    }
}

impl Diffusion for Bessel3 {
    fn name(&self) -> &str {
        "bessel3"
    }
    fn state(&self) -> StateInterval {
        StateInterval::open(0.0, f64::INFINITY).expect("valid")
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn psi(&self, x: f64) -> f64 {
        2.0 * (self.c * x).sinh() / x
    }
    fn phi(&self, x: f64) -> f64 {
        (-self.c * x).exp() / x
    }
    fn psi_deriv(&self, x: f64, _: Side) -> f64 {
        let cx = self.c * x;
        2.0 * (cx * cx.cosh() - cx.sinh()) / (x * x)
    }
    fn phi_deriv(&self, x: f64, _: Side) -> f64 {
        -(-self.c * x).exp() * (self.c * x + 1.0) / (x * x)
    }
    fn scale(&self, x: f64) -> f64 {
        -1.0 / x
    }
    fn scale_deriv(&self, x: f64, _: Side) -> f64 {
        1.0 / (x * x)
    }
    fn speed_density(&self, x: f64) -> f64 {
        2.0 * x * x
    }
    fn wronskian(&self) -> f64 {
        2.0 * self.c
    }
    fn generator(&self, x: f64, g: Jet) -> f64 {
        self.alpha * g.value - 0.5 * g.d2 - g.d1 / x
    }
    fn sde(&self) -> Option<Sde> {
        Some(Sde::Bessel3)
    }
}

fn take(params: &BTreeMap<String, f64>, allowed: &[&str], name: &str) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::BadParams(format!("unknown parameter `{k}` for {name}")));
        }
    }
    Ok(())
}

fn get(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::BadParams(format!("missing parameter `{key}`")))
}

/// Builds a catalog process by name.
pub fn catalog(name: &str, params: &BTreeMap<String, f64>, alpha: f64) -> Result<Arc<dyn Diffusion>> {
    Ok(match name {
        "bm" => {
            take(params, &[], name)?;
            Arc::new(BrownianMotion::new(alpha)?)
        }
        "bm_drift" => {
            take(params, &["mu"], name)?;
            Arc::new(BmDrift::new(alpha, get(params, "mu")?)?)
        }
        "gbm" => {
            take(params, &["mu", "sigma"], name)?;
            Arc::new(Gbm::new(alpha, get(params, "mu")?, get(params, "sigma")?)?)
        }
        "reflected_bm" => {
            take(params, &["delta", "r", "sigma"], name)?;
            if let Some(&delta) = params.get("delta") {
                if params.len() > 1 {
                    return Err(Error::BadParams("give either delta or (r, sigma)".into()));
                }
                Arc::new(ReflectedBm::new(alpha, delta)?)
            } else {
                Arc::new(ReflectedBm::russian(alpha, get(params, "r")?, get(params, "sigma")?)?)
            }
        }
        "skew_bm" => {
            take(params, &["beta"], name)?;
            Arc::new(SkewBm::new(alpha, get(params, "beta")?)?)
        }
        "sticky_bm" => {
            take(params, &[], name)?;
            Arc::new(StickyBm::new(alpha)?)
        }
        "bessel3" => {
            take(params, &[], name)?;
            Arc::new(Bessel3::new(alpha)?)
        }
        other => return Err(Error::UnknownProcess(other.to_string())),
    })
}
