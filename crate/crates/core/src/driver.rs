//! Runs a configured problem through its solver and answers questions about
//! the result uniformly across solver kinds.

use std::fmt::Write as _;

use crate::config::{Problem, SolverConfig};
use crate::diffusion::{RewardBundle, Side};
use crate::error::{Error, Result};
use crate::jump::{find_threshold_jump, JumpThreshold, LevyOUSpec, OuKernel};
use crate::markov::{RegionSet, StateInterval, Tolerances};
use crate::mc::SimModel;
use crate::onesided::{default_bracket, smooth_fit, solve_one_sided, SmoothFitReport, ThresholdResult};
use crate::region::{solve_general, solve_two_sided, GeneralSolution, TwoSided};
use crate::solution::Solution;

#[derive(Debug)]
pub enum Solved {
    OneSided { threshold: ThresholdResult, solution: Solution },
    TwoSided(Box<TwoSided>),
    General(Box<GeneralSolution>),
    Jump { kernel: Box<OuKernel>, threshold: JumpThreshold },
}

pub fn solve(problem: &Problem, tol: &Tolerances, side_override: Option<Side>) -> Result<Solved> {
    match problem {
        Problem::Diffusion { bundle, solver } => match solver {
            SolverConfig::OneSided { side, bracket } => {
                let side = side_override.unwrap_or(*side);
                let bracket = bracket.unwrap_or_else(|| default_bracket(bundle));
                log::info!("one-sided {side} solve on [{}, {}]", bracket.lo, bracket.hi);
                let (threshold, solution) = solve_one_sided(bundle, side, bracket, tol)?;
                Ok(Solved::OneSided { threshold, solution })
            }
            SolverConfig::TwoSided { init, window } => {
                let window = window.unwrap_or_else(|| default_bracket(bundle));
                log::info!("two-sided solve from {init:?}");
                Ok(Solved::TwoSided(Box::new(solve_two_sided(bundle, (init[0], init[1]), window, tol)?)))
            }
            SolverConfig::General { window } => {
                let window = window.unwrap_or_else(|| default_bracket(bundle));
                log::info!("general solve on [{}, {}]", window.lo, window.hi);
                Ok(Solved::General(Box::new(solve_general(bundle, window, tol)?)))
            }
            SolverConfig::Jump { .. } => Err(Error::Config("jump solver needs an ou_jump process".into())),
        },
        Problem::Jump { spec, dft, bracket } => {
            log::info!("jump threshold on [{}, {}] with A = {}, n = {}", bracket.lo, bracket.hi, dft.a, dft.n);
            let kernel = OuKernel::new(*spec, *dft)?;
            let threshold = find_threshold_jump(&kernel, *bracket, tol)?;
            log::debug!("{threshold:?}");
            Ok(Solved::Jump { kernel: Box::new(kernel), threshold })
        }
    }
}

impl Solved {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            Solved::OneSided { solution, .. } => Some(solution),
            Solved::TwoSided(t) => Some(&t.solution),
            Solved::General(g) => Some(&g.solution),
            Solved::Jump { .. } => None,
        }
    }

    pub fn bundle(&self) -> Option<&RewardBundle> {
        self.solution().map(|s| s.bundle())
    }

    pub fn ou_spec(&self) -> Option<&LevyOUSpec> {
        match self {
            Solved::Jump { kernel, .. } => Some(kernel.spec()),
            _ => None,
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        match self.bundle() {
            Some(b) => b.g(x),
            None => x.max(0.0),
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        match self {
            Solved::Jump { kernel, threshold } => {
                if x >= threshold.x_star {
                    Ok(x.max(0.0))
                } else {
                    kernel.tail_integral(x, threshold.x_star)
                }
            }
            _ => Ok(self.solution().expect("diffusion outcome").value(x)),
        }
    }

    pub fn stopping_region(&self) -> RegionSet {
        match self {
            Solved::Jump { threshold, .. } => {
                RegionSet::single(StateInterval::right_ray(threshold.x_star, true).expect("finite threshold"))
            }
            _ => self.solution().expect("diffusion outcome").stopping().clone(),
        }
    }

    pub fn in_stopping(&self, x: f64) -> bool {
        self.stopping_region().contains(x)
    }

    pub fn state(&self) -> StateInterval {
        match self.bundle() {
            Some(b) => b.process().state(),
            None => StateInterval::real_line(),
        }
    }

    /// Finite boundary points of the stopping region inside the state.
    pub fn boundaries(&self) -> Vec<f64> {
        let state = self.state();
        self.stopping_region()
            .boundary_points()
            .into_iter()
            .filter(|b| b.is_finite() && *b != state.left() && *b != state.right())
            .collect()
    }

    /// Window around the boundaries, clipped to the state.
    pub fn default_range(&self) -> (f64, f64) {
        let b = self.boundaries();
        let (lo, hi) = if b.is_empty() {
            (-3.0, 3.0)
        } else {
            let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo - 2.0, hi + 2.0)
        };
        clip(&self.state(), lo, hi)
    }

    pub fn smooth_fit(&self) -> Option<SmoothFitReport> {
        match self {
            Solved::OneSided { threshold, solution } => Some(smooth_fit(solution, threshold)),
            _ => None,
        }
    }

    /// Dynamics for simulation.
    pub fn sim_model(&self) -> Result<SimModel> {
        match self {
            Solved::Jump { kernel, .. } => Ok(SimModel::Ou(*kernel.spec())),
            _ => SimModel::from_diffusion(self.bundle().expect("diffusion outcome").process()),
        }
    }

    /// A start point in the continuation region, next to the boundary.
    pub fn default_start(&self) -> f64 {
        let state = self.state();
        let x = match self {
            Solved::OneSided { threshold, .. } => match threshold.side {
                Side::Right => threshold.x_star - 0.5,
                Side::Left => threshold.x_star + 0.5,
            },
            Solved::TwoSided(t) => 0.5 * (t.x_l + t.x_r),
            Solved::Jump { threshold, .. } => threshold.x_star - 0.5,
            Solved::General(g) => match g.solution.continuation().intervals().first() {
                Some(j) if j.left().is_finite() && j.right().is_finite() => 0.5 * (j.left() + j.right()),
                Some(j) if j.right().is_finite() => j.right() - 0.5,
                Some(j) if j.left().is_finite() => j.left() + 0.5,
                _ => 0.0,
            },
        };
        let (lo, hi) = clip(&state, x, x);
        0.5 * (lo + hi)
    }

    /// Stopping regions with each finite boundary moved by `±delta`, in
    /// every combination over the boundaries.
    pub fn perturbed_regions(&self, delta: f64) -> Vec<RegionSet> {
        let state = self.state();
        let base = self.stopping_region();
        let movable: Vec<f64> = self.boundaries();
        let mut out = Vec::new();
        let combos = 3usize.pow(movable.len() as u32);
        for c in 0..combos {
            let mut code = c;
            let shifts: Vec<f64> = movable
                .iter()
                .map(|_| {
                    let s = [0.0, -delta, delta][code % 3];
                    code /= 3;
                    s
                })
                .collect();
            if shifts.iter().all(|s| *s == 0.0) {
                continue;
            }
            let shift = |e: f64| movable.iter().position(|m| *m == e).map_or(e, |i| e + shifts[i]);
            let moved: Result<Vec<StateInterval>> = base
                .intervals()
                .iter()
                .map(|j| StateInterval::new(shift(j.left()), shift(j.right()), j.left_closed(), j.right_closed()))
                .collect();
            if let Ok(r) = moved.and_then(RegionSet::new) {
                if r.intervals().iter().all(|j| state.contains_interval(j) || state.contains(j.left())) {
                    out.push(r);
                }
            }
        }
        out
    }

    /// Human-readable report of thresholds, coefficients and smooth fit.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        match self {
            Solved::OneSided { threshold: t, .. } => {
                let _ = writeln!(s, "solver: one_sided ({})", t.side);
                let _ = writeln!(s, "x* = {:.10}", t.x_star);
                let _ = writeln!(s, "equation: {:?}", t.equation_kind);
                let _ = writeln!(s, "atom mass at x*: {:.6e}", t.atom_mass_k);
            }
            Solved::TwoSided(t) => {
                let _ = writeln!(s, "solver: two_sided ({} iterations, newton = {})", t.iterations, t.newton);
                let _ = writeln!(s, "x_l = {:.10}", t.x_l);
                let _ = writeln!(s, "x_r = {:.10}", t.x_r);
                let _ = writeln!(s, "k_l = {:.10e}, k_r = {:.10e}", t.k_l, t.k_r);
            }
            Solved::General(g) => {
                let _ = writeln!(
                    s,
                    "solver: general ({} seed intervals, {} merge rounds{})",
                    g.expanded.len(),
                    g.merged.rounds,
                    if g.merged.whole_space { ", whole space" } else { "" }
                );
            }
            Solved::Jump { threshold: t, kernel } => {
                let _ = writeln!(s, "solver: jump (A = {}, n = {})", kernel.dft().a, kernel.dft().n);
                let _ = writeln!(s, "x* = {:.10}", t.x_star);
                let _ = writeln!(s, "f(x*) = {:.6}", t.f_at_star);
                let _ = writeln!(s, "residual = {:.3e}", t.residual);
            }
        }
        if let Some(sol) = self.solution() {
            let _ = writeln!(s, "continuation: {}", fmt_regions(sol.continuation()));
            let _ = writeln!(s, "stopping: {}", fmt_regions(sol.stopping()));
            for pc in sol.pieces() {
                let _ = writeln!(s, "on {}: k_phi = {:.10e}, k_psi = {:.10e}", pc.interval, pc.k_phi, pc.k_psi);
            }
            for b in self.boundaries() {
                let l = sol.value_deriv(b, Side::Left);
                let r = sol.value_deriv(b, Side::Right);
                let _ = writeln!(s, "V' at {b:.6}: left {l:.6}, right {r:.6}");
            }
        } else {
            let _ = writeln!(s, "stopping: {}", fmt_regions(&self.stopping_region()));
        }
        if let Some(sf) = self.smooth_fit() {
            let _ = writeln!(s, "smooth fit: x {}, scale {}, psi {}", sf.classic_sf, sf.scale_sf, sf.psi_sf);
        }
        s
    }
}

pub fn fmt_regions(r: &RegionSet) -> String {
    if r.is_empty() {
        return "empty".into();
    }
    r.intervals().iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" ∪ ")
}

/// `[lo, hi]` pulled inside the state; open ends get a small margin.
fn clip(state: &StateInterval, lo: f64, hi: f64) -> (f64, f64) {
    let margin = |end: f64, closed: bool| if closed { 0.0 } else { 1e-3 * end.abs().max(1.0) };
    let lo = if lo <= state.left() { state.left() + margin(state.left(), state.left_closed()) } else { lo };
    let hi = if hi >= state.right() { state.right() - margin(state.right(), state.right_closed()) } else { hi };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;

    fn solved(json: &str) -> Solved {
        let c = ProblemConfig::from_json(json).unwrap();
        solve(&c.build().unwrap(), &c.tolerances, None).unwrap()
    }

    #[test]
    fn taylor_outcome() {
        let s = solved(
            r#"{"process":{"name":"bm"},"reward":{"form":"x_plus"},"alpha":0.5,
                "solver":{"method":"one_sided","side":"right"}}"#,
        );
        assert_eq!(s.boundaries().len(), 1);
        assert!((s.boundaries()[0] - 1.0).abs() < 1e-8);
        assert!(s.in_stopping(1.5) && !s.in_stopping(0.5));
        assert!((s.value(0.0).unwrap() - (-1.0f64).exp()).abs() < 1e-8);
        assert!((s.default_start() - 0.5).abs() < 1e-8);
        let moved = s.perturbed_regions(0.3);
        assert_eq!(moved.len(), 2);
        assert!(moved.iter().any(|r| r.contains(0.75) && !r.contains(0.65)));
        assert!(s.summary().contains("x* = 1.0000000000"));
    }

    #[test]
    fn two_sided_perturbations_cover_the_grid() {
        let s = solved(
            r#"{"process":{"name":"bm_drift","params":{"mu":1}},"reward":{"form":"abs"},"alpha":1,
                "solver":{"method":"two_sided","init":[-1,1]}}"#,
        );
        assert_eq!(s.perturbed_regions(0.2).len(), 8);
        let x0 = s.default_start();
        assert!(!s.in_stopping(x0));
    }

    #[test]
    fn clip_respects_open_ends() {
        let st = StateInterval::open(0.0, f64::INFINITY).unwrap();
        let (lo, hi) = clip(&st, -1.0, 4.0);
        assert!(lo > 0.0 && hi == 4.0);
    }
}
