//! Lévy triplets, the characteristic exponent and the American put.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffusion::{BmDrift, NamedReward, RewardBundle, Side};
use crate::error::{Error, Result};
use crate::markov::{integrate, SignedMeasure, StateInterval, Tolerances};
use crate::onesided::{default_bracket, solve_one_sided, ThresholdResult};
use crate::solution::Solution;

/// Sign of the jumps of a spectrally one-sided process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpSide {
    Positive,
    Negative,
}

/// Nonnegative jump measure carried by one half-line.
#[derive(Debug, Clone)]
pub struct Jumps {
    measure: SignedMeasure,
    side: JumpSide,
}

impl Jumps {
    pub fn new(measure: SignedMeasure, side: JumpSide, tol: &Tolerances) -> Result<Self> {
        let s = measure.support();
        let on_side = match side {
            JumpSide::Positive => s.left() >= 0.0 && !s.contains(0.0),
            JumpSide::Negative => s.right() <= 0.0 && !s.contains(0.0),
        };
        if !on_side {
            return Err(Error::BadParams(format!("jump measure on {s} is not {side:?}-sided and off 0")));
        }
        if measure.atoms().iter().any(|a| a.mass < 0.0 || a.at == 0.0) {
            return Err(Error::BadParams("jump atoms must be positive and off 0".into()));
        }
        let lo = if s.left().is_finite() { s.left() } else { s.right() - 50.0 };
        let hi = if s.right().is_finite() { s.right() } else { s.left() + 50.0 };
        let negative = (1..200).map(|i| lo + (hi - lo) * i as f64 / 200.0).find(|&x| measure.density_at(x) < 0.0);
        if let Some(x) = negative {
            return Err(Error::BadParams(format!("jump density negative at {x}")));
        }
        let activity = integrate(|x: f64| (x * x).min(1.0), &measure, s, tol)?;
        if !activity.is_finite() {
            return Err(Error::BadParams("∫ min(x², 1) Π(dx) diverges".into()));
        }
        Ok(Self { measure, side })
    }

    /// Compound Poisson jumps at `rate` with exponential sizes of mean `1/beta`.
    pub fn exponential(rate: f64, beta: f64, side: JumpSide, tol: &Tolerances) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::BadParams(format!("exponential jumps need rate ≥ 0, beta > 0 (got {rate}, {beta})")));
        }
        let support = match side {
            JumpSide::Positive => StateInterval::right_ray(0.0, false)?,
            JumpSide::Negative => StateInterval::left_ray(0.0, false)?,
        };
        let density = Arc::new(move |x: f64| rate * beta * (-beta * x.abs()).exp());
        Self::new(SignedMeasure::with_density(support, density), side, tol)
    }

    pub fn measure(&self) -> &SignedMeasure {
        &self.measure
    }

    pub fn side(&self) -> JumpSide {
        self.side
    }
}

/// `(a, σ, Π)`.
#[derive(Debug, Clone)]
pub struct LevyTriplet {
    pub a: f64,
    pub sigma: f64,
    pub jumps: Option<Jumps>,
}

/// `e^w − 1 − w` without cancellation for small `w`.
fn exp_remainder(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        w * w * (0.5 + w * (1.0 / 6.0 + w / 24.0))
    } else {
        w.exp() - 1.0 - w
    }
}

impl LevyTriplet {
    pub fn new(a: f64, sigma: f64, jumps: Option<Jumps>) -> Result<Self> {
        if !(a.is_finite() && sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::BadParams(format!("triplet needs finite a and σ ≥ 0 (got {a}, {sigma})")));
        }
        Ok(Self { a, sigma, jumps })
    }

    pub fn brownian(a: f64, sigma: f64) -> Result<Self> {
        Self::new(a, sigma, None)
    }

    /// No jumps, or jumps only downward.
    pub fn is_spectrally_negative(&self) -> bool {
        self.jumps.as_ref().is_none_or(|j| j.side == JumpSide::Negative)
    }

    /// `Ψ(z) = az + σ²z²/2 + ∫ (e^{zx} − 1 − zx 1{|x|<1}) Π(dx)`.
    pub fn exponent(&self, z: Complex64, tol: &Tolerances) -> Result<Complex64> {
        let mut psi = self.a * z + 0.5 * self.sigma * self.sigma * z * z;
        let Some(j) = &self.jumps else { return Ok(psi) };
        let mu = &j.measure;
        let s = *mu.support();
        let (small, large) = match j.side {
            JumpSide::Positive => (
                StateInterval::new(s.left(), s.right().min(1.0), s.left_closed(), false),
                StateInterval::new(s.left().max(1.0), s.right(), true, s.right_closed()),
            ),
            JumpSide::Negative => (
                StateInterval::new(s.left().max(-1.0), s.right(), false, s.right_closed()),
                StateInterval::new(s.left(), s.right().min(-1.0), s.left_closed(), true),
            ),
        };
        if let Ok(large) = large {
            if z.re != 0.0 {
                let moment = integrate(|x: f64| (z.re * x).exp(), mu, &large, tol);
                if !moment.as_ref().is_ok_and(|m| m.is_finite()) {
                    return Err(Error::MomentDiverges(format!("∫_{{|x|≥1}} e^{{{}x}} Π(dx)", z.re)));
                }
            }
            psi += integrate(|x: f64| (z * x).exp() - 1.0, mu, &large, tol)?;
        }
        if let Ok(small) = small {
            psi += integrate(|x: f64| exp_remainder(z * x), mu, &small, tol)?;
        }
        if !(psi.re.is_finite() && psi.im.is_finite()) {
            return Err(Error::MomentDiverges(format!("Ψ({z}) is not finite")));
        }
        Ok(psi)
    }
}

/// `Ψ(z)`; see [`LevyTriplet::exponent`].
pub fn levy_exponent(triplet: &LevyTriplet, z: Complex64, tol: &Tolerances) -> Result<Complex64> {
    triplet.exponent(z, tol)
}

/// `(α − L)g̃(x) = αK − (α − Ψ(1))eˣ` for `g̃(x) = K − eˣ`, `x < ln K`.
pub fn put_generator_density(triplet: &LevyTriplet, k: f64, alpha: f64, x: f64, tol: &Tolerances) -> Result<f64> {
    if !triplet.is_spectrally_negative() {
        return Err(Error::UnsupportedProcess("the put density needs a spectrally negative process".into()));
    }
    if !(k > 0.0 && alpha > 0.0) {
        return Err(Error::BadParams(format!("need K > 0 and α > 0 (got {k}, {alpha})")));
    }
    if x >= k.ln() {
        return Err(Error::OutOfDomain(x));
    }
    let psi1 = triplet.exponent(Complex64::new(1.0, 0.0), tol)?.re;
    Ok(alpha * k - (alpha - psi1) * x.exp())
}

/// Perpetual American put on `eˣ` for a jump-free triplet.
#[derive(Debug, Clone)]
pub struct AmericanPut {
    /// Optimal exercise boundary for the log-price.
    pub log_threshold: f64,
    /// `e^{log_threshold}`.
    pub price_threshold: f64,
    /// Threshold data in the unit-volatility coordinate `y = x/σ`.
    pub scaled: ThresholdResult,
    solution: Solution,
    sigma: f64,
}

impl AmericanPut {
    /// Put value at log-price `x`.
    pub fn value(&self, x: f64) -> f64 {
        self.solution.value(x / self.sigma)
    }
}

/// Solves the perpetual put with reward `(K − eˣ)⁺` when `Π = 0`; the
/// log-price `at + σB` is handled as Brownian motion with drift `a/σ` in
/// units of `σ`.
pub fn american_put(triplet: &LevyTriplet, k: f64, alpha: f64, tol: &Tolerances) -> Result<AmericanPut> {
    if triplet.jumps.is_some() {
        return Err(Error::UnsupportedProcess("end-to-end put pricing needs Π = 0".into()));
    }
    if triplet.sigma <= 0.0 {
        return Err(Error::UnsupportedProcess("put pricing needs σ > 0".into()));
    }
    let sigma = triplet.sigma;
    let process = Arc::new(BmDrift::new(alpha, triplet.a / sigma)?);
    let bundle = RewardBundle::from_named(process, NamedReward::LogPut { k, scale: sigma })?;
    let (scaled, solution) = solve_one_sided(&bundle, Side::Left, default_bracket(&bundle), tol)?;
    let log_threshold = sigma * scaled.x_star;
    Ok(AmericanPut { log_threshold, price_threshold: log_threshold.exp(), scaled, solution, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn brownian_exponent() {
        let tol = Tolerances::default();
        let t = LevyTriplet::brownian(0.0, 1.0).unwrap();
        assert_eq!(t.exponent(c(0.0, 2.0), &tol).unwrap(), c(-2.0, 0.0));
        assert_eq!(t.exponent(c(0.0, 0.0), &tol).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn exponential_jumps_closed_form() {
        let tol = Tolerances::default();
        let (rate, beta, a, sigma) = (1.5, 2.0, 0.3, 0.4);
        let j = Jumps::exponential(rate, beta, JumpSide::Positive, &tol).unwrap();
        let t = LevyTriplet::new(a, sigma, Some(j)).unwrap();
        // compensator: ∫_0^1 x λβe^{−βx} dx = λ(1 − e^{−β}(1 + β))/β
        let comp = rate * (1.0 - (-beta).exp() * (1.0 + beta)) / beta;
        for z in [c(0.0, 1.0), c(0.0, -2.5), c(1.0, 0.5)] {
            let expect = a * z + 0.5 * sigma * sigma * z * z + rate * (beta / (beta - z) - 1.0) - comp * z;
            let got = t.exponent(z, &tol).unwrap();
            assert!((got - expect).norm() < 1e-9, "{z}: {got} vs {expect}");
        }
        assert_eq!(t.exponent(c(0.0, 0.0), &tol).unwrap(), c(0.0, 0.0));
        assert!(matches!(t.exponent(c(2.5, 0.0), &tol), Err(Error::MomentDiverges(_))));
    }

    #[test]
    fn jump_measure_checks() {
        let tol = Tolerances::default();
        let bad = SignedMeasure::with_density(StateInterval::real_line(), Arc::new(|_| 1.0));
        assert!(Jumps::new(bad, JumpSide::Positive, &tol).is_err());
        let neg = SignedMeasure::with_density(StateInterval::right_ray(0.0, false).unwrap(), Arc::new(|_| -1.0));
        assert!(Jumps::new(neg, JumpSide::Positive, &tol).is_err());
        assert!(Jumps::exponential(1.0, 0.0, JumpSide::Negative, &tol).is_err());
    }

    #[test]
    fn put_density() {
        let tol = Tolerances::default();
        let (mu, sigma, alpha, k) = (0.05, 0.3, 0.1, 1.0);
        let t = LevyTriplet::brownian(mu, sigma).unwrap();
        let psi1 = mu + 0.5 * sigma * sigma;
        let x = -0.7;
        let d = put_generator_density(&t, k, alpha, x, &tol).unwrap();
        assert!((d - (alpha * k - (alpha - psi1) * x.exp())).abs() < 1e-15);
        // risk neutral: α = Ψ(1) gives the constant αK
        let rn = LevyTriplet::brownian(alpha - 0.5 * sigma * sigma, sigma).unwrap();
        assert!((put_generator_density(&rn, k, alpha, -3.0, &tol).unwrap() - alpha * k).abs() < 1e-15);
        // far left the density tends to αK
        assert!((put_generator_density(&t, k, alpha, -60.0, &tol).unwrap() - alpha * k).abs() < 1e-12);
        assert!(matches!(put_generator_density(&t, k, alpha, 0.1, &tol), Err(Error::OutOfDomain(_))));
        let up = LevyTriplet::new(0.0, 1.0, Some(Jumps::exponential(1.0, 1.0, JumpSide::Positive, &tol).unwrap())).unwrap();
        assert!(put_generator_density(&up, k, alpha, -1.0, &tol).is_err());
    }

    #[test]
    fn negative_jumps_enter_the_put_density() {
        let tol = Tolerances::default();
        let j = Jumps::exponential(0.5, 3.0, JumpSide::Negative, &tol).unwrap();
        let t = LevyTriplet::new(0.02, 0.2, Some(j)).unwrap();
        let psi1 = t.exponent(c(1.0, 0.0), &tol).unwrap().re;
        let comp = -0.5 * (1.0 - (-3.0f64).exp() * 4.0) / 3.0;
        let expect = 0.02 + 0.02 + 0.5 * (3.0 / 4.0 - 1.0) - comp;
        assert!((psi1 - expect).abs() < 1e-9, "{psi1} vs {expect}");
    }

    #[test]
    fn put_threshold_matches_closed_form() {
        // X = at + σB: φ(x) = e^{−θx}, θ = (a + √(a² + 2ασ²))/σ², boundary e^b = Kθ/(θ + 1)
        let tol = Tolerances::default();
        let (a, sigma, alpha, k) = (0.02, 0.3, 0.08, 1.0);
        let t = LevyTriplet::brownian(a, sigma).unwrap();
        let put = american_put(&t, k, alpha, &tol).unwrap();
        let theta = (a + (a * a + 2.0 * alpha * sigma * sigma).sqrt()) / (sigma * sigma);
        let expect = (k * theta / (theta + 1.0)).ln();
        assert!((put.log_threshold - expect).abs() < 1e-8, "{} vs {expect}", put.log_threshold);
        let x = expect + 0.4;
        let v = (k - expect.exp()) * (-theta * (x - expect)).exp();
        assert!((put.value(x) - v).abs() < 1e-9);
        assert!((put.value(expect - 0.2) - (k - (expect - 0.2).exp())).abs() < 1e-12);
    }
}
