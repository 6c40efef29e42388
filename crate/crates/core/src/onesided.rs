//! Threshold problems: stopping regions `[x*, r)` (right-sided) or
//! `(ℓ, x*]` (left-sided), their verification and smooth-fit diagnostics.
//!
//! Left-sided problems are solved as right-sided problems for `−X`.

use serde::Serialize;

use crate::diffusion::{green, RewardBundle, Side};
use crate::error::{Error, Result};
use crate::markov::{find_root, integrate, sign_changes, RegionSet, StateInterval, Tolerances};
use crate::solution::Solution;

/// Which threshold equation produced `x*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    /// `g(x*) = ∫_{y > x*} G(x*, y) σ(dy)`.
    Equality,
    /// Smallest `x` with `g(x) > ∫_{y > x} G(x, y) σ(dy)`.
    StrictInequality,
}

/// Outcome of checking the verification hypotheses on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypotheses {
    /// `(α − L)g ≥ 0` (and no negative atoms) beyond `x*`.
    pub alg_nonneg_beyond: bool,
    pub alg_margin: f64,
    pub alg_worst_at: f64,
    /// `g(x*)/h(x*) · h(x) ≥ g(x)` before `x*`, with `h = ψ` (right) or `φ` (left).
    pub psi_majorant_before: bool,
    pub majorant_margin: f64,
    pub majorant_worst_at: f64,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.alg_nonneg_beyond && self.psi_majorant_before
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub x_star: f64,
    pub equation_kind: EquationKind,
    pub side: Side,
    /// Mass of the representing measure of V at `x*`.
    pub atom_mass_k: f64,
    /// `g(x*) − ∫_{y > x*} G(x*, y) σ(dy)`.
    pub residual: f64,
    pub hypotheses: Hypotheses,
}

/// Search window for a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::BadParams(format!("invalid bracket [{lo}, {hi}]")))
        }
    }

    fn mirrored(self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }
}

const MAX_GRID: usize = 20_000;

/// A window covering the kinks of `g` and a generous margin, clipped to the state.
pub fn default_bracket(bundle: &RewardBundle) -> Bracket {
    let state = bundle.process().state();
    let pts: Vec<f64> = bundle.kinks().iter().copied().chain(bundle.process().singular_points()).collect();
    let lo_pt = pts.iter().copied().fold(0.0f64, f64::min);
    let hi_pt = pts.iter().copied().fold(0.0f64, f64::max);
    let span = 20.0 * (1.0 + hi_pt.abs().max(lo_pt.abs()));
    let eps = |v: f64| 1e-6 * (1.0 + v.abs());
    let lo = if state.left().is_finite() {
        state.left() + if state.left_closed() { 0.0 } else { eps(state.left()) }
    } else {
        lo_pt - span
    };
    let hi = if state.right().is_finite() {
        state.right() - if state.right_closed() { 0.0 } else { eps(state.right()) }
    } else {
        hi_pt + span
    };
    Bracket { lo, hi }
}

fn oriented(bundle: &RewardBundle, side: Side) -> Result<RewardBundle> {
    match side {
        Side::Right => Ok(bundle.clone()),
        Side::Left => bundle.mirrored(),
    }
}

pub(crate) fn grid(lo: f64, hi: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let n = (((hi - lo) / step).ceil() as usize).clamp(1, MAX_GRID);
    let mut pts: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    pts.extend(extra.iter().copied().filter(|x| *x > lo && *x < hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn special_points(b: &RewardBundle) -> Vec<f64> {
    let mut pts: Vec<f64> = b.kinks().to_vec();
    pts.extend(b.process().singular_points());
    pts.extend(b.process().speed_atoms().iter().map(|a| a.at));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `g'ψ − gψ'`; the derivative of `g/ψ` up to the positive factor `ψ²`.
fn delta(b: &RewardBundle, x: f64) -> f64 {
    let p = b.process();
    b.g_deriv(x, Side::Right) * p.psi(x) - b.g(x) * p.psi_deriv(x, Side::Right)
}

fn beyond(b: &RewardBundle, x: f64, closed: bool) -> Result<StateInterval> {
    let s = b.process().state();
    StateInterval::new(x, s.right(), closed, s.right_closed())
}

/// `g(x) − ∫_{y > x} G(x, y) σ(dy)` (right-sided orientation).
fn threshold_residual(b: &RewardBundle, x: f64, tol: &Tolerances) -> Result<f64> {
    let p = b.process();
    let j = beyond(b, x, false)?;
    let int = integrate(|y| p.phi(y), b.nu(), &j, tol)?;
    Ok(b.g(x) - p.psi(x) * int / p.wronskian())
}

fn atom_mass(b: &RewardBundle, x: f64, residual: f64) -> Result<f64> {
    Ok(residual / green(b.process(), x, x)?)
}

fn snap(x: f64, specials: &[f64], tol: &Tolerances) -> f64 {
    specials.iter().copied().find(|s| (s - x).abs() <= 4.0 * tol.root_abs).unwrap_or(x)
}

fn reorient(x: f64, side: Side) -> f64 {
    match side {
        Side::Right => x,
        Side::Left => -x,
    }
}

/// Largest root of `g/ψ = g'/ψ'` in the bracket, cross-checked against the
/// integral equation.
pub fn find_threshold(bundle: &RewardBundle, side: Side, bracket: Bracket, tol: &Tolerances) -> Result<ThresholdResult> {
    let b = oriented(bundle, side)?;
    let br = if side == Side::Left { bracket.mirrored() } else { bracket };
    let specials = special_points(&b);
    let n = (((br.hi - br.lo) / tol.grid_step).ceil() as usize).clamp(1, MAX_GRID);
    let changes = sign_changes(|x| delta(&b, x), br.lo, br.hi, n);
    let &(lo, hi) = changes.last().ok_or(Error::NoSignChange { lo: bracket.lo, hi: bracket.hi })?;
    let x = if lo == hi { lo } else { find_root(|x| delta(&b, x), lo, hi, tol)? };
    let x = snap(x, &specials, tol);
    let residual = threshold_residual(&b, x, tol)?;
    let scale = b.g(x).abs().max(1.0);
    if residual.abs() > 1e-6 * scale {
        return Err(Error::EquationMismatch { x: reorient(x, side), residual });
    }
    let hypotheses = hypotheses_oriented(&b, x, br, tol);
    Ok(ThresholdResult {
        x_star: reorient(x, side),
        equation_kind: EquationKind::Equality,
        side,
        atom_mass_k: atom_mass(&b, x, residual)?,
        residual,
        hypotheses,
    })
}

/// Smallest `x ≥ search_lo` (right-sided orientation) with
/// `g(x) > ∫_{y > x} G(x,y) σ(dy)` and `(α − L)g ≥ 0` beyond `x`.
pub fn find_threshold_inequality(
    bundle: &RewardBundle,
    side: Side,
    bracket: Bracket,
    tol: &Tolerances,
) -> Result<ThresholdResult> {
    let b = oriented(bundle, side)?;
    let br = if side == Side::Left { bracket.mirrored() } else { bracket };
    let specials = special_points(&b);
    let pts = grid(br.lo, br.hi, tol.grid_step, &specials);

    // suffix flag: (α − L)g ≥ 0 and no negative atoms on (pts[i], hi]
    let mut nonneg_after = vec![true; pts.len()];
    for i in (0..pts.len().saturating_sub(1)).rev() {
        let y = pts[i + 1];
        let ok_point = b.kinks().contains(&y) || b.alg(y) >= 0.0;
        let ok_atom = !b.nu().atoms().iter().any(|a| a.at > pts[i] && a.at <= y && a.mass < 0.0);
        nonneg_after[i] = nonneg_after[i + 1] && ok_point && ok_atom;
    }
    let excess = |x: f64| threshold_residual(&b, x, tol);

    for (i, &x) in pts.iter().enumerate() {
        if !nonneg_after[i] {
            continue;
        }
        let e = excess(x)?;
        if e > 0.0 {
            let mut x_star = x;
            let prev = (i > 0 && nonneg_after[i - 1]).then(|| pts[i - 1]);
            if let Some(xp) = prev {
                if excess(xp)? <= 0.0 {
                    // the first crossing sits in (xp, x]
                    let mut lo = xp;
                    let mut hi = x;
                    while hi - lo > tol.root_abs {
                        let m = 0.5 * (lo + hi);
                        if excess(m)? > 0.0 {
                            hi = m;
                        } else {
                            lo = m;
                        }
                    }
                    x_star = hi;
                    if let Some(s) = specials.iter().copied().find(|s| (s - hi).abs() <= 4.0 * tol.root_abs) {
                        if excess(s)? > 0.0 {
                            x_star = s;
                        }
                    }
                }
            }
            let residual = excess(x_star)?;
            let hypotheses = hypotheses_oriented(&b, x_star, br, tol);
            return Ok(ThresholdResult {
                x_star: reorient(x_star, side),
                equation_kind: EquationKind::StrictInequality,
                side,
                atom_mass_k: atom_mass(&b, x_star, residual)?,
                residual,
                hypotheses,
            });
        }
    }
    Err(Error::NotFound(format!("no x in [{}, {}] with g above the Green integral", bracket.lo, bracket.hi)))
}

fn hypotheses_oriented(b: &RewardBundle, x_star: f64, br: Bracket, tol: &Tolerances) -> Hypotheses {
    let p = b.process();
    let pts = grid(br.lo.min(x_star), br.hi.max(x_star), tol.grid_step, &[]);
    let mut alg_margin = f64::INFINITY;
    let mut alg_worst_at = x_star;
    for &y in pts.iter().filter(|y| **y > x_star && !b.kinks().contains(y)) {
        let a = b.alg(y);
        if a < alg_margin {
            alg_margin = a;
            alg_worst_at = y;
        }
    }
    for a in b.nu().atoms().iter().filter(|a| a.at > x_star) {
        if a.mass < alg_margin {
            alg_margin = a.mass;
            alg_worst_at = a.at;
        }
    }
    let ratio = b.g(x_star) / p.psi(x_star);
    let mut majorant_margin = f64::INFINITY;
    let mut majorant_worst_at = x_star;
    for &y in pts.iter().filter(|y| **y < x_star && p.state().contains(**y)) {
        let m = ratio * p.psi(y) - b.g(y);
        if m < majorant_margin {
            majorant_margin = m;
            majorant_worst_at = y;
        }
    }
    let scale = b.g(x_star).abs().max(1.0);
    Hypotheses {
        alg_nonneg_beyond: alg_margin >= -1e-9 * scale,
        alg_margin: if alg_margin.is_finite() { alg_margin } else { 0.0 },
        alg_worst_at,
        psi_majorant_before: majorant_margin >= -1e-9 * scale,
        majorant_margin: if majorant_margin.is_finite() { majorant_margin } else { 0.0 },
        majorant_worst_at,
    }
}

/// Evaluates both verification hypotheses for a candidate threshold.
pub fn verify_hypotheses(bundle: &RewardBundle, x_star: f64, side: Side, bracket: Bracket, tol: &Tolerances) -> Result<Hypotheses> {
    let b = oriented(bundle, side)?;
    let br = if side == Side::Left { bracket.mirrored() } else { bracket };
    Ok(hypotheses_oriented(&b, reorient(x_star, side), br, tol))
}

/// `V = g(x*) h/h(x*)` on the continuation side, `g` on the stopping side.
pub fn value_function(bundle: &RewardBundle, result: &ThresholdResult, tol: &Tolerances) -> Result<Solution> {
    let state = bundle.process().state();
    let x = result.x_star;
    let continuation = match result.side {
        Side::Right => {
            if x <= state.left() {
                RegionSet::empty()
            } else {
                RegionSet::single(StateInterval::new(state.left(), x, state.left_closed(), false)?)
            }
        }
        Side::Left => {
            if x >= state.right() {
                RegionSet::empty()
            } else {
                RegionSet::single(StateInterval::new(x, state.right(), false, state.right_closed())?)
            }
        }
    };
    let sol = Solution::from_continuation(bundle.clone(), continuation)?;
    let br = default_bracket(bundle);
    let pts = grid(br.lo, br.hi, tol.grid_step, &[x]);
    sol.check_majorant(&pts, 1e-9 * bundle.g(x).abs().max(1.0))?;
    Ok(sol)
}

/// Threshold by the equality route, falling back to the inequality route
/// when the equality has no root or fails its cross-check.
pub fn solve_one_sided(bundle: &RewardBundle, side: Side, bracket: Bracket, tol: &Tolerances) -> Result<(ThresholdResult, Solution)> {
    let result = match find_threshold(bundle, side, bracket, tol) {
        Ok(r) => r,
        Err(Error::NoSignChange { .. }) | Err(Error::EquationMismatch { .. }) => {
            find_threshold_inequality(bundle, side, bracket, tol)?
        }
        Err(e) => return Err(e),
    };
    if !result.hypotheses.hold() {
        return Err(Error::HypothesisViolated(format!("{:?}", result.hypotheses)));
    }
    let sol = value_function(bundle, &result, tol)?;
    Ok((result, sol))
}

/// Left and right one-sided derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneSided {
    pub left: f64,
    pub right: f64,
}

impl OneSided {
    fn agree(&self) -> bool {
        (self.left - self.right).abs() <= 1e-4 * self.left.abs().max(self.right.abs()).max(1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothFitReport {
    pub x_star: f64,
    pub atom_mass_k: f64,
    /// Differentiability of V w.r.t. ψ (right-sided) or φ (left-sided).
    pub psi_sf: bool,
    pub scale_sf: bool,
    pub classic_sf: bool,
    /// `dV/dx` from the continuation side (`left`) and the stopping side (`right`).
    pub d_x: OneSided,
    pub d_scale: OneSided,
    pub d_psi: OneSided,
}

/// One-sided difference quotient `ΔV/Δf` with Richardson extrapolation over
/// steps `1e-3 … 1.25e-4`.
fn one_sided_ratio(v: &dyn Fn(f64) -> f64, f: &dyn Fn(f64) -> f64, x: f64, dir: f64) -> f64 {
    let (v0, f0) = (v(x), f(x));
    let mut table: Vec<f64> = (0..4)
        .map(|k| {
            let h = 1e-3 * 0.5f64.powi(k) * dir;
            (v(x + h) - v0) / (f(x + h) - f0)
        })
        .collect();
    // eliminate O(h), O(h²), O(h³)
    for order in 1..4 {
        let factor = 2f64.powi(order);
        table = table.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
    }
    table[0]
}

/// Classifies smooth fit at `x*` from one-sided numerical derivatives.
pub fn smooth_fit(solution: &Solution, result: &ThresholdResult) -> SmoothFitReport {
    let b = solution.bundle();
    let p = b.process();
    let x = result.x_star;
    // continuation side first
    let (cont_dir, stop_dir) = match result.side {
        Side::Right => (-1.0, 1.0),
        Side::Left => (1.0, -1.0),
    };
    let v = |y: f64| solution.value(y);
    let id = |y: f64| y;
    let scale = |y: f64| p.scale(y);
    let fund = |y: f64| match result.side {
        Side::Right => p.psi(y),
        Side::Left => p.phi(y),
    };
    let pair = |f: &dyn Fn(f64) -> f64| OneSided {
        left: one_sided_ratio(&v, f, x, cont_dir),
        right: one_sided_ratio(&v, f, x, stop_dir),
    };
    let d_x = pair(&id);
    let d_scale = pair(&scale);
    let d_psi = pair(&fund);
    SmoothFitReport {
        x_star: x,
        atom_mass_k: result.atom_mass_k,
        psi_sf: d_psi.agree(),
        scale_sf: d_scale.agree(),
        classic_sf: d_x.agree(),
        d_x,
        d_scale,
        d_psi,
    }
}

/// `x* = inf{x : b(x) ≥ 0}` with `b(x) = ∫_{(ℓ, x]} ψ dσ`, for rewards whose
/// `(α − L)g` changes sign once, from negative to positive.
pub fn sufficient_b_scan(bundle: &RewardBundle, bracket: Bracket, tol: &Tolerances) -> Result<f64> {
    let p = bundle.process();
    let state = p.state();
    let pts = grid(bracket.lo, bracket.hi, tol.grid_step, bundle.kinks());
    let negative = |y: f64| {
        let atom_neg = bundle.nu().atoms().iter().any(|a| a.at == y && a.mass < 0.0);
        atom_neg || (!bundle.kinks().contains(&y) && bundle.alg(y) < 0.0)
    };
    let flags: Vec<bool> = pts.iter().map(|&y| negative(y)).collect();
    let first_neg = flags.iter().position(|f| *f);
    let last_neg = flags.iter().rposition(|f| *f);
    let Some(last_neg) = last_neg else {
        return Ok(state.left());
    };
    let first_neg = first_neg.expect("some negative point");
    if flags[..first_neg].iter().enumerate().any(|(i, _)| !bundle.kinks().contains(&pts[i]) && bundle.alg(pts[i]) > 0.0) {
        return Err(Error::NotSingleCrossing("positive part precedes the negative part".into()));
    }
    if flags[first_neg..=last_neg].iter().enumerate().any(|(i, f)| {
        let y = pts[first_neg + i];
        !*f && !bundle.kinks().contains(&y) && bundle.alg(y) > 0.0
    }) {
        return Err(Error::NotSingleCrossing("(α − L)g changes sign more than once".into()));
    }
    let b_of = |x: f64| -> Result<f64> {
        let j = StateInterval::new(state.left(), x, state.left_closed(), true)?;
        integrate(|y| p.psi(y), bundle.nu(), &j, tol)
    };
    let start = last_neg;
    let mut prev = pts[start];
    if b_of(prev)? >= 0.0 {
        return Err(Error::NotSingleCrossing("b is already nonnegative at the crossing point".into()));
    }
    for &x in &pts[start + 1..] {
        if b_of(x)? >= 0.0 {
            let mut err = None;
            let root = find_root(
                |y| match b_of(y) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        f64::NAN
                    }
                },
                prev,
                x,
                tol,
            );
            if let Some(e) = err {
                return Err(e);
            }
            return root;
        }
        prev = x;
    }
    Err(Error::NotFound("b stays negative on the bracket".into()))
}

/// Discount rate at which the threshold equation holds with equality at `x`.
///
/// `with_atom` includes the representing-measure mass at `x` itself, which
/// separates the two critical rates when the speed measure has an atom there.
pub fn critical_discount(
    build: &dyn Fn(f64) -> Result<RewardBundle>,
    x: f64,
    with_atom: bool,
    lo: f64,
    hi: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let mut err = None;
    let mut residual = |alpha: f64| -> f64 {
        let r = (|| -> Result<f64> {
            let b = build(alpha)?;
            let p = b.process();
            let j = beyond(&b, x, with_atom)?;
            let int = integrate(|y| p.phi(y), b.nu(), &j, tol)?;
            Ok(b.g(x) - p.psi(x) * int / p.wronskian())
        })();
        r.unwrap_or_else(|e| {
            err = Some(e);
            f64::NAN
        })
    };
    let tight = Tolerances { root_abs: tol.root_abs.min(1e-12), ..*tol };
    let a = find_root(&mut residual, lo, hi, &tight);
    if let Some(e) = err {
        return Err(e);
    }
    a
}
