//! Piecewise value functions: `g` on the stopping region and
//! `k_φ φ + k_ψ ψ` on each continuation interval.

use std::fmt;

use serde::Serialize;

use crate::diffusion::{hitting_transform, RewardBundle, Side};
use crate::error::{Error, Result};
use crate::markov::{RegionSet, StateInterval};

/// Value function on one continuation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub interval: StateInterval,
    pub k_phi: f64,
    pub k_psi: f64,
}

#[derive(Clone)]
pub struct Solution {
    continuation: RegionSet,
    stopping: RegionSet,
    pieces: Vec<Piece>,
    bundle: RewardBundle,
}

impl fmt::Debug for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solution")
            .field("continuation", &self.continuation)
            .field("stopping", &self.stopping)
            .field("pieces", &self.pieces)
            .finish()
    }
}

/// Coefficients `(k_φ, k_ψ)` of the harmonic function equal to `g` at the
/// finite ends of `j` and vanishing through ψ or φ at a state endpoint.
pub fn boundary_coefficients(bundle: &RewardBundle, j: &StateInterval) -> Result<(f64, f64)> {
    let p = bundle.process();
    let state = p.state();
    let reaches_left = j.left() <= state.left();
    let reaches_right = j.right() >= state.right();
    match (reaches_left, reaches_right) {
        (true, true) => Ok((0.0, 0.0)),
        (true, false) => Ok((0.0, bundle.g(j.right()) / p.psi(j.right()))),
        (false, true) => Ok((bundle.g(j.left()) / p.phi(j.left()), 0.0)),
        (false, false) => {
            let (a, b) = (j.left(), j.right());
            let (pa, pb, fa, fb) = (p.psi(a), p.psi(b), p.phi(a), p.phi(b));
            let (ga, gb) = (bundle.g(a), bundle.g(b));
            let det = pa * fb - pb * fa;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::NonConvergent(format!("singular boundary system on {j}")));
            }
            Ok(((gb * pa - ga * pb) / det, (ga * fb - gb * fa) / det))
        }
    }
}

impl Solution {
    /// Builds the solution from its continuation region, solving for the
    /// coefficients from continuity at the boundaries.
    pub fn from_continuation(bundle: RewardBundle, continuation: RegionSet) -> Result<Self> {
        let pieces = continuation
            .intervals()
            .iter()
            .map(|j| {
                let (k_phi, k_psi) = boundary_coefficients(&bundle, j)?;
                Ok(Piece { interval: *j, k_phi, k_psi })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pieces(bundle, pieces)
    }

    /// Builds the solution from explicit pieces.
    pub fn from_pieces(bundle: RewardBundle, pieces: Vec<Piece>) -> Result<Self> {
        let continuation = RegionSet::new(pieces.iter().map(|p| p.interval).collect())?;
        let stopping = continuation.complement(&bundle.process().state())?;
        Ok(Self { continuation, stopping, pieces, bundle })
    }

    pub fn continuation(&self) -> &RegionSet {
        &self.continuation
    }

    pub fn stopping(&self) -> &RegionSet {
        &self.stopping
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn bundle(&self) -> &RewardBundle {
        &self.bundle
    }

    pub fn in_stopping(&self, x: f64) -> bool {
        !self.continuation.contains(x)
    }

    fn piece_at(&self, x: f64) -> Option<&Piece> {
        self.pieces.iter().find(|p| p.interval.contains(x))
    }

    fn harmonic(&self, piece: &Piece, x: f64) -> f64 {
        let p = self.bundle.process();
        let mut v = 0.0;
        if piece.k_phi != 0.0 {
            v += piece.k_phi * p.phi(x);
        }
        if piece.k_psi != 0.0 {
            v += piece.k_psi * p.psi(x);
        }
        v
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.piece_at(x) {
            Some(piece) => self.harmonic(piece, x),
            None => self.bundle.g(x),
        }
    }

    /// One-sided derivative of V in `x`.
    pub fn value_deriv(&self, x: f64, side: Side) -> f64 {
        let p = self.bundle.process();
        let piece = self.pieces.iter().find(|pc| {
            let j = &pc.interval;
            match side {
                Side::Right => x >= j.left() && x < j.right(),
                Side::Left => x > j.left() && x <= j.right(),
            }
        });
        match piece {
            Some(pc) => pc.k_phi * p.phi_deriv(x, side) + pc.k_psi * p.psi_deriv(x, side),
            None => self.bundle.g_deriv(x, side),
        }
    }

    /// Largest `|V − g|` at finite boundary points of the continuation region.
    pub fn continuity_defect(&self) -> f64 {
        let state = self.bundle.process().state();
        let mut worst = 0.0f64;
        for pc in &self.pieces {
            for e in [pc.interval.left(), pc.interval.right()] {
                if e.is_finite() && state.contains(e) && !(e == state.left() || e == state.right()) {
                    worst = worst.max((self.harmonic(pc, e) - self.bundle.g(e)).abs());
                }
            }
        }
        worst
    }

    /// Checks `V ≥ g − tol` on the grid.
    pub fn check_majorant(&self, grid: &[f64], tol: f64) -> Result<()> {
        let state = self.bundle.process().state();
        let mut worst: Option<(f64, f64)> = None;
        for &x in grid.iter().filter(|x| state.contains(**x)) {
            let margin = self.value(x) - self.bundle.g(x);
            if margin < -tol && worst.is_none_or(|(_, m)| margin < m) {
                worst = Some((x, margin));
            }
        }
        match worst {
            Some((at, margin)) => Err(Error::MajorantViolated { at, margin }),
            None => Ok(()),
        }
    }

    /// Largest violation of `V(x) ≥ E_x[e^{-ατ_z}] V(z)` over the grid pairs,
    /// reported as a nonnegative defect.
    pub fn excessivity_defect(&self, xs: &[f64], zs: &[f64]) -> f64 {
        let p = self.bundle.process();
        let mut worst = 0.0f64;
        for &x in xs {
            let vx = self.value(x);
            for &z in zs {
                if let Ok(h) = hitting_transform(p, x, z) {
                    worst = worst.max(h * self.value(z) - vx);
                }
            }
        }
        worst
    }

    /// Maps a solution of the mirrored problem back to the original one.
    pub fn unmirror(self, original: RewardBundle) -> Result<Self> {
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|pc| {
                let j = &pc.interval;
                let interval = StateInterval::new(-j.right(), -j.left(), j.right_closed(), j.left_closed())?;
                Ok(Piece { interval, k_phi: pc.k_psi, k_psi: pc.k_phi })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pieces(original, pieces)
    }
}
