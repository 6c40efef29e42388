use std::sync::Arc;

use super::{Diffusion, Jet, Sde, Side};
use crate::markov::{Atom, StateInterval};

/// The reflected process `−X`. Left-sided problems for `X` are right-sided
/// problems for `−X`.
#[derive(Debug, Clone)]
pub struct Mirrored {
    inner: Arc<dyn Diffusion>,
    name: String,
}

impl Mirrored {
    pub fn new(inner: Arc<dyn Diffusion>) -> Self {
        let name = format!("mirrored {}", inner.name());
        Self { inner, name }
    }

    pub fn inner(&self) -> &Arc<dyn Diffusion> {
        &self.inner
    }
}

impl Diffusion for Mirrored {
    fn name(&self) -> &str {
        &self.name
    }
    fn state(&self) -> StateInterval {
        let s = self.inner.state();
        StateInterval::new(-s.right(), -s.left(), s.right_closed(), s.left_closed()).expect("mirror of a valid interval")
    }
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }
    fn psi(&self, x: f64) -> f64 {
        self.inner.phi(-x)
    }
    fn phi(&self, x: f64) -> f64 {
        self.inner.psi(-x)
    }
    fn psi_deriv(&self, x: f64, side: Side) -> f64 {
        -self.inner.phi_deriv(-x, side.flip())
    }
    fn phi_deriv(&self, x: f64, side: Side) -> f64 {
        -self.inner.psi_deriv(-x, side.flip())
    }
    fn scale(&self, x: f64) -> f64 {
        -self.inner.scale(-x)
    }
    fn scale_deriv(&self, x: f64, side: Side) -> f64 {
        self.inner.scale_deriv(-x, side.flip())
    }
    fn speed_density(&self, x: f64) -> f64 {
        self.inner.speed_density(-x)
    }
    fn speed_atoms(&self) -> Vec<Atom> {
        let mut a: Vec<Atom> = self.inner.speed_atoms().into_iter().map(|a| Atom { at: -a.at, mass: a.mass }).collect();
        a.reverse();
        a
    }
    fn wronskian(&self) -> f64 {
        self.inner.wronskian()
    }
    fn generator(&self, x: f64, g: Jet) -> f64 {
        self.inner.generator(-x, Jet { value: g.value, d1: -g.d1, d2: g.d2 })
    }
    fn singular_points(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.inner.singular_points().into_iter().map(|x| -x).collect();
        s.reverse();
        s
    }
    fn sde(&self) -> Option<Sde> {
        match self.inner.sde()? {
            Sde::Bm { mu, sigma } => Some(Sde::Bm { mu: -mu, sigma }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{wronskian_defect, BmDrift, SkewBm};

    #[test]
    fn mirror_swaps_fundamental_solutions() {
        let inner: Arc<dyn Diffusion> = Arc::new(BmDrift::new(1.0, 0.4).unwrap());
        let m = Mirrored::new(inner.clone());
        assert_eq!(m.psi(0.3), inner.phi(-0.3));
        assert!(wronskian_defect(&m, &[-1.0, 0.0, 2.0]) < 1e-12);
        assert_eq!(m.sde(), Some(Sde::Bm { mu: -0.4, sigma: 1.0 }));
    }

    #[test]
    fn mirror_of_skew_keeps_wronskian() {
        let m = Mirrored::new(Arc::new(SkewBm::new(0.5, 0.2).unwrap()));
        assert!(wronskian_defect(&m, &[-1.0, -0.1, 0.1, 1.0]) < 1e-12);
        assert!(m.psi_deriv(0.0, Side::Right) > 0.0);
    }
}
