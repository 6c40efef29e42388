//! Monte-Carlo estimates of `E_x[e^{−ατ} g(X_τ)]` for first-entry rules
//! `τ = inf{t : X_t ∈ S}`.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path)`, so
//! results do not depend on how paths are split across threads. All rules
//! passed to one call see the same paths.

use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::{Diffusion, Sde};
use crate::error::{Error, Result};
use crate::jump::LevyOUSpec;
use crate::markov::{RegionSet, StateInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    ExactWhereAvailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    /// Defaults for discount rate `alpha`: horizon `14/α`, `dt = 1e−3`.
    pub fn for_alpha(alpha: f64) -> Self {
        Self { dt: 1e-3, horizon: 14.0 / alpha, paths: 100_000, seed: 0, scheme: Scheme::ExactWhereAvailable }
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::BadParams(format!("dt must be positive, got {}", self.dt)));
        }
        if !(alpha * self.horizon >= 14.0) || !self.horizon.is_finite() {
            return Err(Error::BadParams(format!("α·horizon = {} must be at least 14", alpha * self.horizon)));
        }
        if self.paths == 0 {
            return Err(Error::BadParams("paths must be positive".into()));
        }
        Ok(())
    }
}

/// Process dynamics the simulator knows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimModel {
    Diffusion { sde: Sde, state: StateInterval },
    Ou(LevyOUSpec),
}

impl SimModel {
    pub fn from_diffusion(p: &dyn Diffusion) -> Result<Self> {
        match p.sde() {
            Some(sde) => Ok(Self::Diffusion { sde, state: p.state() }),
            None => Err(Error::UnsupportedProcess(format!("{} has no simulation scheme", p.name()))),
        }
    }

    fn state(&self) -> StateInterval {
        match self {
            Self::Diffusion { state, .. } => *state,
            Self::Ou(_) => StateInterval::real_line(),
        }
    }

    /// Coordinate in which the diffusion coefficient is constant.
    fn to_u(&self, x: f64) -> f64 {
        match self {
            Self::Diffusion { sde: Sde::Gbm { .. }, .. } => x.ln(),
            _ => x,
        }
    }

    fn to_x(&self, u: f64) -> f64 {
        match self {
            Self::Diffusion { sde: Sde::Gbm { .. }, .. } => u.exp(),
            _ => u,
        }
    }

    /// Diffusion coefficient in the `u` coordinate.
    fn u_sigma(&self) -> f64 {
        match self {
            Self::Diffusion { sde: Sde::Bm { sigma, .. } | Sde::Gbm { sigma, .. }, .. } => sigma.abs(),
            Self::Diffusion { .. } => 1.0,
            Self::Ou(s) => s.sigma,
        }
    }
}

/// Paths from `x0`, generated on demand from their seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathBatch {
    pub model: SimModel,
    pub x0: f64,
    pub config: SimConfig,
}

/// Checks the start point and scheme; the paths themselves are regenerated
/// from `(seed, index)` by each estimator.
pub fn simulate_paths(model: SimModel, x0: f64, config: SimConfig) -> Result<PathBatch> {
    if !(config.dt > 0.0 && config.paths > 0) {
        return Err(Error::BadParams(format!("bad simulation config {config:?}")));
    }
    if !model.state().contains_interior(x0) && !model.state().contains(x0) {
        return Err(Error::OutOfDomain(x0));
    }
    if let SimModel::Ou(s) = &model {
        s.validate()?;
    }
    Ok(PathBatch { model, x0, config })
}

/// Piece of a path: continuous motion from `u0` to `u1` over `[t0, t1]`, or
/// a jump at `t0 = t1`. `bridge` is one shared uniform for crossing tests.
#[derive(Debug, Clone, Copy)]
struct Segment {
    t0: f64,
    t1: f64,
    u0: f64,
    u1: f64,
    jump: bool,
    bridge: f64,
}

struct Walker<'a> {
    model: &'a SimModel,
    dt: f64,
    scheme: Scheme,
    rng: ChaCha8Rng,
    t: f64,
    u: f64,
    next_jump: f64,
    pending_jump: bool,
}

impl<'a> Walker<'a> {
    fn new(batch: &'a PathBatch, path: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(batch.config.seed);
        rng.set_stream(path as u64);
        let mut w = Self {
            model: &batch.model,
            dt: batch.config.dt,
            scheme: batch.config.scheme,
            rng,
            t: 0.0,
            u: batch.model.to_u(batch.x0),
            next_jump: f64::INFINITY,
            pending_jump: false,
        };
        if let SimModel::Ou(s) = batch.model {
            if s.lambda > 0.0 {
                w.next_jump = w.exp_clock(s.lambda);
            }
        }
        w
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn exp_clock(&mut self, rate: f64) -> f64 {
        let e: f64 = self.rng.sample(Exp1);
        e / rate
    }

    fn x(&self) -> f64 {
        self.model.to_x(self.u)
    }

    fn step(&mut self) -> Segment {
        let t0 = self.t;
        let u0 = self.u;
        if self.pending_jump {
            self.pending_jump = false;
            let SimModel::Ou(s) = *self.model else { unreachable!("jumps only in OU") };
            let size = self.exp_clock(s.beta);
            self.u += size;
            self.next_jump = t0 + self.exp_clock(s.lambda);
            let bridge = self.rng.random::<f64>();
            return Segment { t0, t1: t0, u0, u1: self.u, jump: true, bridge };
        }
        let h = if self.next_jump < t0 + self.dt {
            self.pending_jump = true;
            self.next_jump - t0
        } else {
            self.dt
        };
        let z = self.normal();
        let sq = h.sqrt();
        self.u = match *self.model {
            SimModel::Diffusion { sde, .. } => match sde {
                Sde::Bm { mu, sigma } => u0 + mu * h + sigma * sq * z,
                Sde::Gbm { mu, sigma } => match self.scheme {
                    Scheme::ExactWhereAvailable => u0 + (mu - 0.5 * sigma * sigma) * h + sigma * sq * z,
                    Scheme::EulerMaruyama => {
                        let x = u0.exp();
                        let next = x + mu * x * h + sigma * x * sq * z;
                        if next > 0.0 {
                            next.ln()
                        } else {
                            u0 + (mu - 0.5 * sigma * sigma) * h + sigma * sq * z
                        }
                    }
                },
                Sde::Reflected { mu } => (u0 + mu * h + sq * z).abs(),
                Sde::Bessel3 => {
                    // the law is rotation invariant: keep the path on the first axis
                    let (a, b, c) = (u0 + sq * z, sq * self.normal(), sq * self.normal());
                    (a * a + b * b + c * c).sqrt()
                }
            },
            SimModel::Ou(s) => match self.scheme {
                Scheme::ExactWhereAvailable => {
                    let e = (-s.gamma * h).exp();
                    let sd = s.sigma * ((1.0 - e * e) / (2.0 * s.gamma)).sqrt();
                    u0 * e + sd * z
                }
                Scheme::EulerMaruyama => u0 - s.gamma * u0 * h + s.sigma * sq * z,
            },
        };
        self.t = t0 + h;
        let bridge = self.rng.random::<f64>();
        Segment { t0, t1: self.t, u0, u1: self.u, jump: false, bridge }
    }
}

/// Stopping region prepared for crossing tests.
struct Target {
    region: RegionSet,
    /// Finite boundary points, in `u`, sorted.
    bounds: Vec<f64>,
}

impl Target {
    fn new(model: &SimModel, region: &RegionSet) -> Self {
        let mut bounds: Vec<f64> = region
            .boundary_points()
            .into_iter()
            .filter(|b| b.is_finite() && model.state().contains(*b))
            .map(|b| model.to_u(b))
            .filter(|u| u.is_finite())
            .collect();
        bounds.sort_by(f64::total_cmp);
        bounds.dedup();
        Self { region: region.clone(), bounds }
    }

    /// Entry `(time, position)` during the segment, if any.
    fn entry(&self, model: &SimModel, seg: &Segment, sigma: f64) -> Option<(f64, f64)> {
        if seg.jump {
            let x1 = model.to_x(seg.u1);
            return self.region.contains(x1).then_some((seg.t0, x1));
        }
        let (u0, u1) = (seg.u0, seg.u1);
        let (lo, hi) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
        let x1 = model.to_x(u1);
        let crossed: Option<f64> = if u1 >= u0 {
            self.bounds.iter().copied().find(|b| *b > lo && *b <= hi)
        } else {
            self.bounds.iter().rev().copied().find(|b| *b >= lo && *b < hi)
        };
        if let Some(b) = crossed {
            let s = if u1 != u0 { (b - u0) / (u1 - u0) } else { 0.0 };
            return Some((seg.t0 + s * (seg.t1 - seg.t0), model.to_x(b)));
        }
        if self.region.contains(x1) {
            return Some((seg.t1, x1));
        }
        // Brownian-bridge crossing of the nearest boundaries between grid points
        let h = seg.t1 - seg.t0;
        if sigma > 0.0 && h > 0.0 {
            let var = sigma * sigma * h;
            let up = self.bounds.iter().copied().find(|b| *b > hi);
            let down = self.bounds.iter().rev().copied().find(|b| *b < lo);
            if let Some(b) = up {
                if seg.bridge < (-2.0 * (b - u0) * (b - u1) / var).exp() {
                    return Some((seg.t0 + 0.5 * h, model.to_x(b)));
                }
            }
            if let Some(b) = down {
                if 1.0 - seg.bridge < (-2.0 * (u0 - b) * (u1 - b) / var).exp() {
                    return Some((seg.t0 + 0.5 * h, model.to_x(b)));
                }
            }
        }
        None
    }
}

/// Discounted rewards of every target along one path.
fn run_path(batch: &PathBatch, path: usize, targets: &[Target], g: &(dyn Fn(f64) -> f64 + Sync), alpha: f64) -> Vec<f64> {
    let mut out = vec![0.0; targets.len()];
    let mut open: Vec<usize> = Vec::with_capacity(targets.len());
    for (k, t) in targets.iter().enumerate() {
        if t.region.contains(batch.x0) {
            out[k] = g(batch.x0);
        } else if !t.region.is_empty() {
            open.push(k);
        }
    }
    if open.is_empty() {
        return out;
    }
    let sigma = batch.model.u_sigma();
    let mut w = Walker::new(batch, path);
    while !open.is_empty() && w.t < batch.config.horizon {
        let seg = w.step();
        open.retain(|&k| match targets[k].entry(&batch.model, &seg, sigma) {
            Some((tau, x)) => {
                out[k] = (-alpha * tau).exp() * g(x);
                false
            }
            None => true,
        });
    }
    out
}

fn workers(paths: usize) -> usize {
    thread::available_parallelism().map_or(1, |n| n.get()).min(paths).max(1)
}

/// Per-path discounted rewards for each region, one row per path.
fn per_path(batch: &PathBatch, regions: &[RegionSet], g: &(dyn Fn(f64) -> f64 + Sync), alpha: f64) -> Vec<Vec<f64>> {
    let targets: Vec<Target> = regions.iter().map(|r| Target::new(&batch.model, r)).collect();
    let n = batch.config.paths;
    let nw = workers(n);
    let chunk = n.div_ceil(nw);
    let targets = &targets;
    thread::scope(|scope| {
        let handles: Vec<_> = (0..nw)
            .map(|w| {
                scope.spawn(move || {
                    (w * chunk..((w + 1) * chunk).min(n)).map(|i| run_path(batch, i, targets, g, alpha)).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Pairwise sum, fixed order.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub paths_used: usize,
}

impl RuleEstimate {
    fn from_samples(v: &[f64]) -> Self {
        let n = v.len();
        let mean = pairwise_sum(v) / n as f64;
        let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Self { mean, std_err: (var / n as f64).sqrt(), paths_used: n }
    }

    /// `mean ± 3·std_err`.
    pub fn ci(&self) -> (f64, f64) {
        (self.mean - 3.0 * self.std_err, self.mean + 3.0 * self.std_err)
    }

    pub fn covers(&self, v: f64) -> bool {
        let (lo, hi) = self.ci();
        v >= lo && v <= hi
    }
}

/// Estimate of `E_{x0}[e^{−ατ_S} g(X_{τ_S})]`, with `τ_S = ∞` contributing 0.
pub fn estimate_rule(batch: &PathBatch, region: &RegionSet, g: &(dyn Fn(f64) -> f64 + Sync), alpha: f64) -> Result<RuleEstimate> {
    Ok(estimate_rules(batch, std::slice::from_ref(region), g, alpha)?.remove(0))
}

/// Estimates for several regions on common paths.
pub fn estimate_rules(
    batch: &PathBatch,
    regions: &[RegionSet],
    g: &(dyn Fn(f64) -> f64 + Sync),
    alpha: f64,
) -> Result<Vec<RuleEstimate>> {
    batch.config.validate(alpha)?;
    let rows = per_path(batch, regions, g, alpha);
    Ok((0..regions.len())
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            RuleEstimate::from_samples(&col)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub solver_value: f64,
    pub own: RuleEstimate,
    pub candidates: Vec<RuleEstimate>,
    /// Largest `(estimate − solver_value)/std_err` over candidates.
    pub worst_excess: f64,
}

/// Checks that no candidate beats the solver's value by more than three
/// standard errors and that the solver's own region attains it.
pub fn dominance_scan(
    batch: &PathBatch,
    own_region: &RegionSet,
    candidates: &[RegionSet],
    g: &(dyn Fn(f64) -> f64 + Sync),
    alpha: f64,
    solver_value: f64,
) -> Result<DominanceReport> {
    let mut regions = vec![own_region.clone()];
    regions.extend_from_slice(candidates);
    let mut est = estimate_rules(batch, &regions, g, alpha)?;
    let own = est.remove(0);
    let excess = |e: &RuleEstimate| {
        let d = e.mean - solver_value;
        if e.std_err > 0.0 {
            d / e.std_err
        } else if d > 1e-12 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let worst_excess = est.iter().map(excess).fold(f64::NEG_INFINITY, f64::max);
    if let Some((i, e)) = est.iter().enumerate().find(|(_, e)| e.mean > solver_value + 3.0 * e.std_err) {
        return Err(Error::DominanceViolated(format!(
            "candidate {i} estimates {} ± {} above solver value {solver_value}",
            e.mean, e.std_err
        )));
    }
    if !(own.covers(solver_value) || (own.std_err == 0.0 && (own.mean - solver_value).abs() < 1e-12)) {
        return Err(Error::DominanceViolated(format!(
            "solver region estimates {} ± {}, solver value {solver_value}",
            own.mean, own.std_err
        )));
    }
    Ok(DominanceReport { solver_value, own, candidates: est, worst_excess })
}

/// Positions at time `t` of every path.
pub fn positions_at(batch: &PathBatch, t: f64) -> Vec<f64> {
    (0..batch.config.paths)
        .map(|i| {
            let mut w = Walker::new(batch, i);
            while w.t < t - 1e-12 {
                // shorten the last step so the path lands on t
                w.dt = batch.config.dt.min(t - w.t);
                w.step();
            }
            w.x()
        })
        .collect()
}
