//! General continuation regions: negative-set seeds, the alternating
//! expansion of each seed, overlap merging, and the two-sided system.

use serde::Serialize;

use crate::diffusion::{green_integral, Diffusion, RewardBundle};
use crate::error::{Error, Result};
use crate::markov::{find_root, integrate, RegionSet, SignedMeasure, StateInterval, Tolerances};
use crate::onesided::{grid, Bracket};
use crate::solution::{Piece, Solution};

const MAX_SWEEPS: usize = 500;
const MAX_ARM_STEPS: usize = 4000;
const GREEN_SAMPLES: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    Density,
    Atom,
}

/// One connected piece of `{ν < 0}`. Atom entries are degenerate intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativeComponent {
    pub interval: StateInterval,
    pub kind: SeedKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeSet {
    pub components: Vec<NegativeComponent>,
}

impl NegativeSet {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn region(&self) -> Result<RegionSet> {
        RegionSet::new(self.components.iter().map(|c| c.interval).collect())
    }

    /// Open seed intervals for the expansion; atoms are widened to
    /// `(p − eps, p + eps)` and overlapping seeds are joined.
    pub fn seeds(&self, state: &StateInterval, eps: f64) -> Result<Vec<StateInterval>> {
        let mut raw: Vec<(f64, f64)> = self
            .components
            .iter()
            .map(|c| match c.kind {
                SeedKind::Density => (c.interval.left(), c.interval.right()),
                SeedKind::Atom => {
                    let p = c.interval.left();
                    ((p - eps).max(state.left()), (p + eps).min(state.right()))
                }
            })
            .collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut joined: Vec<(f64, f64)> = Vec::new();
        for (l, r) in raw {
            match joined.last_mut() {
                Some(last) if l <= last.1 => last.1 = last.1.max(r),
                _ => joined.push((l, r)),
            }
        }
        joined.into_iter().map(|(l, r)| span(state, l, r)).collect()
    }
}

/// Interval `(l, r)` that picks up a closed state endpoint when it reaches it.
fn span(state: &StateInterval, l: f64, r: f64) -> Result<StateInterval> {
    StateInterval::new(l, r, l <= state.left() && state.left_closed(), r >= state.right() && state.right_closed())
}

fn density_runs(bundle: &RewardBundle, lo: f64, hi: f64, step: f64, tol: &Tolerances) -> Result<Vec<(f64, f64)>> {
    let nu = bundle.nu();
    let d = |x: f64| nu.density_at(x);
    let mut extra: Vec<f64> = bundle.kinks().to_vec();
    extra.extend(bundle.process().singular_points());
    let pts = grid(lo, hi, step, &extra);
    let vals: Vec<f64> = pts.iter().map(|&x| d(x)).collect();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if vals[i] >= 0.0 || vals[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < pts.len() && vals[i + 1] < 0.0 {
            i += 1;
        }
        let left = if start == 0 { lo } else { find_root(d, pts[start - 1], pts[start], tol)? };
        let right = if i + 1 == pts.len() { hi } else { find_root(d, pts[i], pts[i + 1], tol)? };
        if right > left {
            runs.push((left, right));
        }
        i += 1;
    }
    Ok(runs)
}

/// Connected components of `{x : ν(dx) < 0}`: density runs refined to
/// `root_abs`, and negative atoms (absorbed into an adjacent run when one
/// lies within `grid_step`). Runs that touch the scan window continue to the
/// state endpoint.
pub fn negative_set(bundle: &RewardBundle, window: Bracket, tol: &Tolerances) -> Result<NegativeSet> {
    let state = bundle.process().state();
    let lo = window.lo.max(state.left());
    let hi = window.hi.min(state.right());
    let coarse = density_runs(bundle, lo, hi, tol.grid_step, tol)?;
    let fine = density_runs(bundle, lo, hi, 0.5 * tol.grid_step, tol)?;
    let agree = coarse.len() == fine.len()
        && coarse
            .iter()
            .zip(&fine)
            .all(|(c, f)| (c.0 - f.0).abs() <= tol.grid_step && (c.1 - f.1).abs() <= tol.grid_step);
    if !agree {
        return Err(Error::UnresolvedSign(format!(
            "{} negative runs at step {} but {} at half step",
            coarse.len(),
            tol.grid_step,
            fine.len()
        )));
    }
    let mut runs: Vec<(f64, f64)> = coarse
        .into_iter()
        .map(|(l, r)| (if l <= lo { state.left() } else { l }, if r >= hi { state.right() } else { r }))
        .collect();

    let eps = tol.grid_step;
    let mut atoms = Vec::new();
    for a in bundle.nu().atoms().iter().filter(|a| a.mass < 0.0 && state.contains(a.at)) {
        let p = a.at;
        match runs.iter_mut().find(|(l, r)| p >= *l - eps && p <= *r + eps) {
            Some(run) => {
                if p <= run.0 {
                    run.0 = (p - eps).max(state.left());
                }
                if p >= run.1 {
                    run.1 = (p + eps).min(state.right());
                }
            }
            None => atoms.push(p),
        }
    }
    let mut components = runs
        .into_iter()
        .map(|(l, r)| Ok(NegativeComponent { interval: span(&state, l, r)?, kind: SeedKind::Density }))
        .collect::<Result<Vec<_>>>()?;
    for p in atoms {
        components.push(NegativeComponent { interval: StateInterval::point(p)?, kind: SeedKind::Atom });
    }
    components.sort_by(|a, b| a.interval.left().total_cmp(&b.interval.left()));
    Ok(NegativeSet { components })
}

/// `σ_J`: equal to `ν` on `J`, its positive part elsewhere.
pub fn sigma_j(bundle: &RewardBundle, j: &StateInterval) -> SignedMeasure {
    let jj = *j;
    bundle
        .nu()
        .map_masses(move |x, m| if jj.contains(x) { m } else { m.max(0.0) })
        .with_breaks([j.left(), j.right()].into_iter().filter(|x| x.is_finite()))
}

/// A seed interval and the expanded interval that satisfies the
/// continuation condition for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionPair {
    pub inner: StateInterval,
    pub outer: StateInterval,
    /// `∫_{J̄} φ dσ_J`; `None` when it diverges at a state endpoint.
    pub int_phi: Option<f64>,
    /// `∫_{J̄} ψ dσ_J`; `None` when it diverges at a state endpoint.
    pub int_psi: Option<f64>,
    /// Largest sampled `∫_{J̄} G(x, y) σ_J(dy)` over `x ∈ J̄`.
    pub max_green: f64,
    pub sweeps: usize,
}

#[derive(Clone, Copy)]
enum Weight {
    Phi = 0,
    Psi = 1,
}

fn weight(p: &dyn Diffusion, w: Weight, y: f64) -> f64 {
    match w {
        Weight::Phi => p.phi(y),
        Weight::Psi => p.psi(y),
    }
}

/// Cumulative `∫ w dσ_J` from one end of the seed outwards, grown lazily.
///
/// Left arm: `C(x) = ∫_{(x, a]}`; right arm: `C(y) = ∫_{[b, y)}`.
struct Arm<'a> {
    p: &'a dyn Diffusion,
    sigma: &'a SignedMeasure,
    dir: f64,
    origin: f64,
    end: f64,
    end_closed: bool,
    last_feature: f64,
    pts: Vec<f64>,
    cum: Vec<[f64; 2]>,
    end_total: [Option<f64>; 2],
    done: bool,
    tol: &'a Tolerances,
}

impl<'a> Arm<'a> {
    fn new(
        p: &'a dyn Diffusion,
        sigma: &'a SignedMeasure,
        dir: f64,
        origin: f64,
        tol: &'a Tolerances,
    ) -> Self {
        let state = p.state();
        let (end, end_closed) =
            if dir < 0.0 { (state.left(), state.left_closed()) } else { (state.right(), state.right_closed()) };
        let features = sigma.breaks().iter().copied().chain(sigma.atoms().iter().map(|a| a.at));
        let last_feature = features.fold(origin, |m, x| if dir < 0.0 { m.min(x) } else { m.max(x) });
        Self {
            p,
            sigma,
            dir,
            origin,
            end,
            end_closed,
            last_feature,
            pts: vec![origin],
            cum: vec![[0.0; 2]],
            end_total: [None; 2],
            done: false,
            tol,
        }
    }

    /// `∫ w dσ_J` between `near` (closed) and `far` (open unless a closed state end).
    fn piece(&self, near: f64, far: f64, w: Weight) -> Result<f64> {
        if near == far {
            return Ok(0.0);
        }
        let far_closed = far == self.end && self.end_closed;
        let j = if self.dir < 0.0 {
            StateInterval::new(far, near, far_closed, true)?
        } else {
            StateInterval::new(near, far, true, far_closed)?
        };
        integrate(|y| weight(self.p, w, y), self.sigma, &j, self.tol)
    }

    fn extend(&mut self) -> Result<bool> {
        if self.done {
            return Ok(false);
        }
        if self.pts.len() > MAX_ARM_STEPS {
            return Err(Error::NonConvergent(format!("expansion from {} does not settle", self.origin)));
        }
        let prev = *self.pts.last().expect("arm has its origin");
        let h = (4.0 * self.tol.grid_step).max(0.25 * (prev - self.origin).abs());
        let mut next = prev + self.dir * h;
        if self.end.is_finite() && (next - self.end) * self.dir >= 0.0 {
            next = self.end;
            self.done = true;
        }
        let last = *self.cum.last().expect("arm has its origin");
        let step = [
            last[0] + self.piece(prev, next, Weight::Phi)?,
            last[1] + self.piece(prev, next, Weight::Psi)?,
        ];
        if !step.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergent(format!("weighted measure overflows near {next}")));
        }
        self.pts.push(next);
        self.cum.push(step);
        Ok(true)
    }

    fn beyond_features(&self, x: f64) -> bool {
        (x - self.last_feature) * self.dir >= 0.0
    }

    /// `C(end)`, when the integral converges.
    fn total(&mut self, w: Weight) -> Result<Option<f64>> {
        if let Some(t) = self.end_total[w as usize] {
            return Ok(Some(t));
        }
        let last = *self.pts.last().expect("arm has its origin");
        let base = self.cum.last().expect("arm has its origin")[w as usize];
        let t = if last == self.end {
            Some(base)
        } else if self.end.is_finite() {
            Some(base + self.piece(last, self.end, w)?)
        } else if self.beyond_features(last) {
            self.piece(last, self.end, w).ok().filter(|v| v.is_finite()).map(|v| base + v)
        } else {
            None
        };
        self.end_total[w as usize] = t;
        Ok(t)
    }

    /// `C(x)` at an explored point or the state end.
    fn at(&mut self, x: f64, w: Weight) -> Result<f64> {
        if x == self.end {
            return self.total(w)?.ok_or_else(|| {
                Error::NonConvergent(format!("weighted measure diverges towards {}", self.end))
            });
        }
        let k = self.pts.iter().rposition(|&q| (x - q) * self.dir >= 0.0).unwrap_or(0);
        Ok(self.cum[k][w as usize] + self.piece(self.pts[k], x, w)?)
    }

    /// Outermost point with `base + C < 0` strictly before it: the boundary
    /// where the running integral turns nonnegative, or the state end.
    fn solve(&mut self, base: f64, w: Weight) -> Result<f64> {
        if base >= 0.0 {
            return Ok(self.origin);
        }
        let i = w as usize;
        let mut k = 0;
        loop {
            while k + 1 < self.pts.len() {
                k += 1;
                if base + self.cum[k][i] >= 0.0 {
                    let (near, c) = (self.pts[k - 1], self.cum[k - 1][i]);
                    let h = |x: f64| base + c + self.piece(near, x, w).unwrap_or(f64::NAN);
                    let (lo, hi) = if near < self.pts[k] { (near, self.pts[k]) } else { (self.pts[k], near) };
                    return find_root(h, lo, hi, self.tol);
                }
            }
            if self.end.is_infinite() {
                let last = *self.pts.last().expect("arm has its origin");
                if self.beyond_features(last) {
                    if let Ok(tail) = self.piece(last, self.end, w) {
                        if tail.is_finite() && base + self.cum[k][i] + tail < 0.0 {
                            return Ok(self.end);
                        }
                    }
                }
            }
            if !self.extend()? {
                return Ok(self.end);
            }
        }
    }
}

fn same(a: f64, b: f64, tol: &Tolerances) -> bool {
    a == b || (a - b).abs() <= tol.root_abs
}

/// Condition-(iv) sample points: the finite part of `outer`, with a bounded
/// window past the seed toward an infinite end.
fn sample_points(outer: &StateInterval, inner: &StateInterval) -> Vec<f64> {
    let anchor_lo = if inner.left().is_finite() { inner.left() } else { inner.right() };
    let anchor_hi = if inner.right().is_finite() { inner.right() } else { inner.left() };
    let lo = if outer.left().is_finite() { outer.left() } else { anchor_lo - 5.0 };
    let hi = if outer.right().is_finite() { outer.right() } else { anchor_hi + 5.0 };
    let pad = 1e-9 * (hi - lo);
    (0..GREEN_SAMPLES)
        .map(|i| lo + pad + (hi - lo - 2.0 * pad) * i as f64 / (GREEN_SAMPLES - 1) as f64)
        .filter(|x| outer.contains(*x))
        .collect()
}

/// Expands a negative seed `J` to `J̄` by the alternating iteration: push the
/// left end out until `∫ φ dσ_J` reaches 0, then the right end until
/// `∫ ψ dσ_J` does, until both ends stall for two sweeps.
pub fn expand_interval(bundle: &RewardBundle, j: &StateInterval, tol: &Tolerances) -> Result<ExpansionPair> {
    expand(bundle, j, true, tol)
}

fn expand(bundle: &RewardBundle, j: &StateInterval, check_pre: bool, tol: &Tolerances) -> Result<ExpansionPair> {
    let p = bundle.process();
    let state = p.state();
    let sigma = sigma_j(bundle, j);
    let (a, b) = (j.left(), j.right());
    let has_left = a > state.left();
    let has_right = b < state.right();
    let m_phi = if has_left { integrate(|y| p.phi(y), &sigma, j, tol)? } else { 0.0 };
    let m_psi = if has_right { integrate(|y| p.psi(y), &sigma, j, tol)? } else { 0.0 };
    if check_pre && (m_phi > 0.0 || m_psi > 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "seed {j} has ∫φσ = {m_phi:e}, ∫ψσ = {m_psi:e}; both must be nonpositive"
        )));
    }

    let mut left = has_left.then(|| Arm::new(p, &sigma, -1.0, a, tol));
    let mut right = has_right.then(|| Arm::new(p, &sigma, 1.0, b, tol));
    let (mut x, mut y) = (a, b);
    let mut stall = 0;
    let mut sweeps = 0;
    while stall < 2 {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::NonConvergent(format!("expansion of {j} did not reach a fixed point")));
        }
        let x_new = match left.as_mut() {
            Some(arm) => {
                let r = match right.as_mut() {
                    Some(ra) => ra.at(y, Weight::Phi)?,
                    None => 0.0,
                };
                arm.solve(m_phi + r, Weight::Phi)?
            }
            None => a,
        };
        let y_new = match right.as_mut() {
            Some(arm) => {
                let l = match left.as_mut() {
                    Some(la) => la.at(x_new, Weight::Psi)?,
                    None => 0.0,
                };
                arm.solve(m_psi + l, Weight::Psi)?
            }
            None => b,
        };
        let slack = 10.0 * tol.root_abs;
        if sweeps > 1 && (x_new < x - slack * (1.0 + x.abs()) || y_new < y - slack * (1.0 + y.abs())) {
            return Err(Error::NonConvergent(format!(
                "expansion of {j} lost monotonicity: ({x}, {y}) -> ({x_new}, {y_new})"
            )));
        }
        stall = if same(x_new, x, tol) && same(y_new, y, tol) { stall + 1 } else { 0 };
        x = x_new;
        y = y_new;
    }

    let outer = span(&state, x, y)?;
    let abs_sigma = sigma.map_masses(|_, m| m.abs());
    let int_phi = integrate(|v| p.phi(v), &sigma, &outer, tol).ok().filter(|v| v.is_finite());
    let int_psi = integrate(|v| p.psi(v), &sigma, &outer, tol).ok().filter(|v| v.is_finite());
    let zero_tol = 1e-7;
    if x > state.left() {
        let scale = integrate(|v| p.phi(v), &abs_sigma, &outer, tol)?;
        let v = int_phi.ok_or_else(|| Error::NonConvergent(format!("∫φσ_J diverges on {outer}")))?;
        if v.abs() > zero_tol * scale {
            return Err(Error::NonConvergent(format!("∫φσ_J = {v:e} on {outer} is not zero")));
        }
    }
    if y < state.right() {
        let scale = integrate(|v| p.psi(v), &abs_sigma, &outer, tol)?;
        let v = int_psi.ok_or_else(|| Error::NonConvergent(format!("∫ψσ_J diverges on {outer}")))?;
        if v.abs() > zero_tol * scale {
            return Err(Error::NonConvergent(format!("∫ψσ_J = {v:e} on {outer} is not zero")));
        }
    }

    let mut max_green = f64::NEG_INFINITY;
    for xi in sample_points(&outer, j) {
        let gi = green_integral(p, xi, &sigma, &outer, tol)?;
        let scale = green_integral(p, xi, &abs_sigma, &outer, tol)?;
        if gi > zero_tol * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::HypothesisViolated(format!(
                "∫G(x, y)σ_J(dy) = {gi:e} > 0 at x = {xi} on {outer}"
            )));
        }
        max_green = max_green.max(gi);
    }
    Ok(ExpansionPair { inner: *j, outer, int_phi, int_psi, max_green, sweeps })
}

/// Result of the merge loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merged {
    pub pairs: Vec<ExpansionPair>,
    /// Some expanded interval covers the whole state space.
    pub whole_space: bool,
    pub rounds: usize,
}

/// Repeats, until the expanded intervals are pairwise disjoint: absorb a
/// seed whose expansion reaches `ℓ` (or `r`) into `(ℓ, b)` (or `(a, r)`), and
/// replace two overlapping expansions by the expansion of their seeds' hull.
pub fn merge_regions(bundle: &RewardBundle, mut pairs: Vec<ExpansionPair>, tol: &Tolerances) -> Result<Merged> {
    let state = bundle.process().state();
    let (l, r) = (state.left(), state.right());
    let budget = 4 * pairs.len() + 4;
    let mut rounds = 0;
    loop {
        pairs.sort_by(|p, q| p.inner.left().total_cmp(&q.inner.left()));
        if pairs.iter().any(|p| p.outer.left() <= l && p.outer.right() >= r) {
            return Ok(Merged { pairs, whole_space: true, rounds });
        }
        rounds += 1;
        if rounds > budget {
            return Err(Error::NonTermination(rounds));
        }
        if let Some(i) = pairs.iter().position(|p| p.outer.left() <= l && p.inner.left() > l) {
            let inner = span(&state, l, pairs[i].inner.right())?;
            let pair = expand(bundle, &inner, false, tol)?;
            pairs.drain(..=i);
            pairs.insert(0, pair);
            continue;
        }
        if let Some(i) = pairs.iter().rposition(|p| p.outer.right() >= r && p.inner.right() < r) {
            let inner = span(&state, pairs[i].inner.left(), r)?;
            let pair = expand(bundle, &inner, false, tol)?;
            pairs.truncate(i);
            pairs.push(pair);
            continue;
        }
        if let Some(i) = pairs.windows(2).position(|w| w[0].outer.right() > w[1].outer.left()) {
            let inner = span(&state, pairs[i].inner.left(), pairs[i + 1].inner.right())?;
            let pair = expand(bundle, &inner, false, tol)?;
            pairs.splice(i..=i + 1, [pair]);
            continue;
        }
        return Ok(Merged { pairs, whole_space: false, rounds });
    }
}

/// Output of the general algorithm, with its intermediate stages.
#[derive(Debug, Clone)]
pub struct GeneralSolution {
    pub negative: NegativeSet,
    pub expanded: Vec<ExpansionPair>,
    pub merged: Merged,
    pub solution: Solution,
}

/// Negative set, expansion of each seed, merging, and the piecewise value
/// function; checks `V ≥ g` on the scan window.
pub fn solve_general(bundle: &RewardBundle, window: Bracket, tol: &Tolerances) -> Result<GeneralSolution> {
    let state = bundle.process().state();
    let negative = negative_set(bundle, window, tol)?;
    let seeds = negative.seeds(&state, tol.grid_step)?;
    let expanded = seeds.iter().map(|j| expand_interval(bundle, j, tol)).collect::<Result<Vec<_>>>()?;
    let merged = merge_regions(bundle, expanded.clone(), tol)?;
    let continuation = if merged.whole_space {
        RegionSet::single(state)
    } else {
        RegionSet::new(merged.pairs.iter().map(|p| p.outer).collect())?
    };
    let solution = Solution::from_continuation(bundle.clone(), continuation)?;
    let lo = window.lo.max(state.left());
    let hi = window.hi.min(state.right());
    let pts = grid(lo, hi, tol.grid_step, &solution.continuation().boundary_points());
    let scale = pts.iter().fold(1.0f64, |m, &x| m.max(bundle.g(x).abs()));
    solution.check_majorant(&pts, 1e-7 * scale)?;
    Ok(GeneralSolution { negative, expanded, merged, solution })
}

/// Solution of the two-sided threshold system.
#[derive(Debug, Clone)]
pub struct TwoSided {
    pub x_l: f64,
    pub x_r: f64,
    /// `w⁻¹ ∫_{(ℓ, x_ℓ)} ψ dν`, the φ coefficient inside.
    pub k_l: f64,
    /// `w⁻¹ ∫_{(x_r, r)} φ dν`, the ψ coefficient inside.
    pub k_r: f64,
    pub iterations: usize,
    /// Solved by Newton (otherwise by the coordinate fallback).
    pub newton: bool,
    /// `∫_{(x_ℓ, x_r)} φ dν` and `∫ ψ dν`; both vanish when `g` inverts.
    pub int_phi: f64,
    pub int_psi: f64,
    pub solution: Solution,
}

struct System<'a> {
    bundle: &'a RewardBundle,
    tol: &'a Tolerances,
}

impl System<'_> {
    fn k_l(&self, xl: f64) -> Result<f64> {
        let p = self.bundle.process();
        let s = p.state();
        let j = StateInterval::new(s.left(), xl, s.left_closed(), false)?;
        Ok(integrate(|y| p.psi(y), self.bundle.nu(), &j, self.tol)? / p.wronskian())
    }

    fn k_r(&self, xr: f64) -> Result<f64> {
        let p = self.bundle.process();
        let s = p.state();
        let j = StateInterval::new(xr, s.right(), false, s.right_closed())?;
        Ok(integrate(|y| p.phi(y), self.bundle.nu(), &j, self.tol)? / p.wronskian())
    }

    fn admissible(&self, z: [f64; 2]) -> bool {
        let s = self.bundle.process().state();
        z[0] < z[1] && s.contains_interior(z[0]) && s.contains_interior(z[1])
    }

    /// Scaled residuals of `φ k_ℓ + ψ k_r = g` at both thresholds.
    fn residual(&self, z: [f64; 2]) -> Result<[f64; 2]> {
        let p = self.bundle.process();
        let (kl, kr) = (self.k_l(z[0])?, self.k_r(z[1])?);
        let r = |x: f64| {
            let g = self.bundle.g(x);
            (p.phi(x) * kl + p.psi(x) * kr - g) / g.abs().max(1.0)
        };
        Ok([r(z[0]), r(z[1])])
    }

    fn newton(&self, init: [f64; 2]) -> Result<Option<([f64; 2], usize)>> {
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let mut z = init;
        let mut res = self.residual(z)?;
        for it in 1..=100 {
            if norm(res) < 1e-13 {
                return Ok(Some((z, it)));
            }
            let mut jac = [[0.0; 2]; 2];
            for c in 0..2 {
                let h = 1e-6 * z[c].abs().max(1.0);
                let (mut zp, mut zm) = (z, z);
                zp[c] += h;
                zm[c] -= h;
                if !self.admissible(zp) || !self.admissible(zm) {
                    return Ok(None);
                }
                let (rp, rm) = (self.residual(zp)?, self.residual(zm)?);
                for row in 0..2 {
                    jac[row][c] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let size = jac.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            if !det.is_finite() || det.abs() <= 1e-12 * size * size {
                return Ok(None);
            }
            let dz = [
                -(jac[1][1] * res[0] - jac[0][1] * res[1]) / det,
                -(-jac[1][0] * res[0] + jac[0][0] * res[1]) / det,
            ];
            let mut t = 1.0;
            let accepted = loop {
                if t < 1e-6 {
                    break None;
                }
                let cand = [z[0] + t * dz[0], z[1] + t * dz[1]];
                if self.admissible(cand) {
                    if let Ok(rc) = self.residual(cand) {
                        if norm(rc) < norm(res) || norm(rc) < 1e-13 {
                            break Some((cand, rc));
                        }
                    }
                }
                t *= 0.5;
            };
            let Some((cand, rc)) = accepted else { return Ok(None) };
            let step = (cand[0] - z[0]).abs().max((cand[1] - z[1]).abs());
            z = cand;
            res = rc;
            if step <= self.tol.root_abs {
                return Ok(Some((z, it)));
            }
        }
        Ok(None)
    }

    /// Bracket search outward from `x0` inside `(lo, hi)`, then Brent.
    fn root_near(&self, h: impl Fn(f64) -> f64, x0: f64, lo: f64, hi: f64) -> Result<f64> {
        let mut step = self.tol.grid_step;
        let f0 = h(x0);
        if f0 == 0.0 {
            return Ok(x0);
        }
        for _ in 0..60 {
            for cand in [x0 - step, x0 + step] {
                if cand > lo && cand < hi {
                    let fc = h(cand);
                    if fc.is_finite() && fc.signum() != f0.signum() {
                        let (a, b) = if cand < x0 { (cand, x0) } else { (x0, cand) };
                        return find_root(&h, a, b, self.tol);
                    }
                }
            }
            step *= 1.5;
        }
        Err(Error::NoSignChange { lo, hi })
    }

    /// Alternating one-dimensional solves of the two equations.
    fn coordinate(&self, init: [f64; 2]) -> Result<([f64; 2], usize)> {
        let s = self.bundle.process().state();
        let mut z = init;
        for it in 1..=400 {
            let gap = 1e-9 * (1.0 + z[1].abs());
            let xl = self.root_near(|x| self.residual([x, z[1]]).map_or(f64::NAN, |r| r[0]), z[0], s.left(), z[1] - gap)?;
            let xr = self.root_near(|x| self.residual([xl, x]).map_or(f64::NAN, |r| r[1]), z[1], xl + gap, s.right())?;
            let moved = (xl - z[0]).abs().max((xr - z[1]).abs());
            z = [xl, xr];
            if moved <= self.tol.root_abs {
                return Ok((z, it));
            }
        }
        Err(Error::NonConvergent("two-sided system: coordinate iteration did not settle".into()))
    }
}

/// Solves `φ(x)k_ℓ(x_ℓ) + ψ(x)k_r(x_r) = g(x)` at `x = x_ℓ, x_r` by damped
/// Newton from `init`, falling back to alternating scalar solves; then checks
/// `ν ≥ 0` outside `[x_ℓ, x_r]` on the window and `V ≥ g` inside.
pub fn solve_two_sided(bundle: &RewardBundle, init: (f64, f64), window: Bracket, tol: &Tolerances) -> Result<TwoSided> {
    let sys = System { bundle, tol };
    let init = [init.0, init.1];
    if !sys.admissible(init) {
        return Err(Error::BadParams(format!("initial thresholds {init:?} must be ordered interior points")));
    }
    let (z, iterations, newton) = match sys.newton(init)? {
        Some((z, it)) => (z, it, true),
        None => {
            let (z, it) = sys.coordinate(init)?;
            (z, it, false)
        }
    };
    let res = sys.residual(z)?;
    if res.iter().any(|r| r.abs() > 1e-8) {
        return Err(Error::NonConvergent(format!("two-sided residual {res:?} at {z:?}")));
    }
    let (x_l, x_r) = (z[0], z[1]);
    let p = bundle.process();
    let state = p.state();
    let nu = bundle.nu();

    let lo = window.lo.max(state.left());
    let hi = window.hi.min(state.right());
    let outside: Vec<f64> = grid(lo, hi, tol.grid_step, &[]).into_iter().filter(|x| *x < x_l || *x > x_r).collect();
    let dens_scale = outside.iter().fold(0.0f64, |m, &x| m.max(nu.density_at(x).abs()));
    if let Some(&bad) = outside.iter().find(|&&x| nu.density_at(x) < -1e-12 * dens_scale.max(1.0)) {
        return Err(Error::HypothesisViolated(format!("(α − L)g < 0 at {bad}, outside [{x_l}, {x_r}]")));
    }
    if let Some(a) = nu.atoms().iter().find(|a| (a.at < x_l || a.at > x_r) && a.mass < 0.0) {
        return Err(Error::HypothesisViolated(format!("negative atom {} at {}, outside [{x_l}, {x_r}]", a.mass, a.at)));
    }

    let (k_l, k_r) = (sys.k_l(x_l)?, sys.k_r(x_r)?);
    let inside = StateInterval::open(x_l, x_r)?;
    let solution = Solution::from_pieces(bundle.clone(), vec![Piece { interval: inside, k_phi: k_l, k_psi: k_r }])?;
    let pts: Vec<f64> = (1..1000).map(|i| x_l + (x_r - x_l) * i as f64 / 1000.0).collect();
    let scale = pts.iter().fold(1.0f64, |m, &x| m.max(bundle.g(x).abs()));
    solution.check_majorant(&pts, 1e-9 * scale)?;
    let int_phi = integrate(|y| p.phi(y), nu, &inside, tol)?;
    let int_psi = integrate(|y| p.psi(y), nu, &inside, tol)?;
    Ok(TwoSided { x_l, x_r, k_l, k_r, iterations, newton, int_phi, int_psi, solution })
}
