use std::fmt;
use std::sync::Arc;

use super::quad::{integrate_fn_breaks, QuadValue};
use super::{StateInterval, Tolerances};
use crate::error::{Error, Result};

/// Shared real function of the state.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub at: f64,
    pub mass: f64,
}

/// Density part plus finitely many weighted atoms on an interval.
#[derive(Clone)]
pub struct SignedMeasure {
    support: StateInterval,
    density: Option<RealFn>,
    atoms: Vec<Atom>,
    breaks: Vec<f64>,
}

impl fmt::Debug for SignedMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignedMeasure")
            .field("support", &self.support)
            .field("has_density", &self.density.is_some())
            .field("atoms", &self.atoms)
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl SignedMeasure {
    pub fn zero(support: StateInterval) -> Self {
        Self { support, density: None, atoms: Vec::new(), breaks: Vec::new() }
    }

    pub fn with_density(support: StateInterval, density: RealFn) -> Self {
        Self { support, density: Some(density), atoms: Vec::new(), breaks: Vec::new() }
    }

    /// Adds an atom; a second atom at an existing location is merged into it.
    pub fn add_atom(mut self, at: f64, mass: f64) -> Result<Self> {
        if !(at >= self.support.left() && at <= self.support.right()) {
            return Err(Error::BadParams(format!("atom at {at} outside {}", self.support)));
        }
        if let Some(a) = self.atoms.iter_mut().find(|a| a.at == at) {
            a.mass += mass;
        } else {
            self.atoms.push(Atom { at, mass });
            self.atoms.sort_by(|a, b| a.at.total_cmp(&b.at));
        }
        Ok(self)
    }

    /// Declares points where the density is not smooth; quadrature splits there.
    pub fn with_breaks(mut self, breaks: impl IntoIterator<Item = f64>) -> Self {
        self.breaks.extend(breaks);
        self.breaks.sort_by(f64::total_cmp);
        self.breaks.dedup();
        self
    }

    pub fn support(&self) -> &StateInterval {
        &self.support
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn density_at(&self, x: f64) -> f64 {
        match &self.density {
            Some(d) if self.support.contains_interior(x) => d(x),
            _ => 0.0,
        }
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    /// Pointwise transform of density and atom masses (e.g. positive part).
    pub fn map_masses(&self, map: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        let map = Arc::new(map);
        let density = self.density.clone().map(|d| {
            let map = map.clone();
            Arc::new(move |x: f64| map(x, d(x))) as RealFn
        });
        let atoms = self.atoms.iter().map(|a| Atom { at: a.at, mass: map(a.at, a.mass) }).collect();
        Self { support: self.support, density, atoms, breaks: self.breaks.clone() }
    }
}

/// `∫_J f dμ`: density part by adaptive quadrature, atoms by exact summation.
///
/// Atoms on an endpoint of `J` count only when that endpoint is closed.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    mu: &SignedMeasure,
    j: &StateInterval,
    tol: &Tolerances,
) -> Result<T> {
    let lo = j.left().max(mu.support.left());
    let hi = j.right().min(mu.support.right());
    let mut total = T::default();
    if let Some(d) = &mu.density {
        if lo < hi {
            // an exact zero factor wins over an overflowed one (0·∞ in far tails)
            let g = |x: f64| {
                let dx = d(x);
                if dx == 0.0 {
                    return T::default();
                }
                let fx = f(x);
                if fx.magnitude() == 0.0 {
                    T::default()
                } else {
                    fx * dx
                }
            };
            total = total + integrate_fn_breaks(&g, lo, hi, &mu.breaks, tol)?;
        }
    }
    for a in &mu.atoms {
        if j.contains(a.at) {
            total = total + f(a.at) * a.mass;
        }
    }
    Ok(total)
}
