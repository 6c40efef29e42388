//! Numeric building blocks shared by every solver: intervals and regions,
//! signed measures, adaptive quadrature and bracketing root finders.

mod interval;
mod measure;
pub mod quad;
mod roots;

use serde::{Deserialize, Serialize};

pub use interval::{RegionSet, StateInterval};
pub use measure::{integrate, Atom, RealFn, SignedMeasure};
pub use quad::{integrate_fn, integrate_fn_breaks, QuadValue};
pub use roots::{find_root, sign_changes};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Root bracket width, in state units.
    pub root_abs: f64,
    /// Relative quadrature tolerance.
    pub quad_rel: f64,
    /// Tail truncation: integrand magnitude relative to its running maximum.
    pub tail_cutoff: f64,
    /// Scan step for grids and bracket searches.
    pub grid_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { root_abs: 1e-10, quad_rel: 1e-9, tail_cutoff: 1e-12, grid_step: 0.01 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.root_abs, self.quad_rel, self.tail_cutoff, self.grid_step];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::BadParams(format!("tolerances must be positive: {self:?}")))
        }
    }

    pub fn with_grid_step(mut self, step: f64) -> Self {
        self.grid_step = step;
        self
    }
}

/// Evenly spaced evaluation points on a finite window.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
