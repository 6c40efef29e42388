//! Ornstein–Uhlenbeck process driven by Brownian motion plus compound
//! Poisson exponential upward jumps:
//! `dX = −γX dt + σ dB + dJ`, jumps at rate λ with mean size `1/β`.
//!
//! The Green kernel is reached through its Fourier transform in `y`,
//! `Ĝ(x, z) = ∫ e^{izy} G(x, y) dy`, which solves
//! `(α + σ²z²/2 − λiz/(β − iz)) Ĝ + γz ∂Ĝ/∂z = e^{izx}`, and is inverted on a
//! uniform grid by one FFT per row.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::gauss::gauss_legendre;
use crate::error::{Error, Result};
use crate::markov::{find_root, Tolerances};
use crate::onesided::Bracket;

const GL_ORDER: usize = 20;
const NEGLIGIBLE: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyOUSpec {
    pub gamma: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl LevyOUSpec {
    pub fn new(gamma: f64, sigma: f64, lambda: f64, beta: f64, alpha: f64) -> Result<Self> {
        let s = Self { gamma, sigma, lambda, beta, alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.sigma >= 0.0
            && self.lambda >= 0.0
            && self.beta > 0.0
            && self.alpha > 0.0
            && [self.gamma, self.sigma, self.lambda, self.beta, self.alpha].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::BadParams(format!("OU spec needs γ, β, α > 0 and σ, λ ≥ 0: {self:?}")))
        }
    }

    /// `(α − L)x = (α + γ)y − λ/β`, the density against which `x` inverts.
    pub fn f(&self, y: f64) -> f64 {
        (self.alpha + self.gamma) * y - self.lambda / self.beta
    }
}

/// DFT window `[-A/2, A/2)` in `z`, sampled at `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DftParams {
    pub a: f64,
    pub n: usize,
}

impl Default for DftParams {
    fn default() -> Self {
        Self { a: 64.0, n: 4096 }
    }
}

impl DftParams {
    pub fn validate(&self) -> Result<()> {
        if self.a > 0.0 && self.a.is_finite() && self.n >= 8 && self.n.is_power_of_two() {
            Ok(())
        } else {
            Err(Error::BadParams(format!("DFT needs A > 0 and n a power of two ≥ 8: {self:?}")))
        }
    }

    /// Spacing of the `y` grid, `2π/A`.
    pub fn dy(&self) -> f64 {
        2.0 * PI / self.a
    }
}

/// Quadrature rule in `v = αs ∈ [0, V]`, `s` the time variable, so
/// `Ĝ = (1/α) ∫ e^{−v} K(z, t) e^{izxt} dv` with `t = e^{−γv/α}` and
/// smooth integrand. Panels crowd toward `v = 0`, where the Gaussian factor
/// concentrates for large `|z|`.
struct TRule {
    t: Vec<f64>,
    w: Vec<f64>,
}

const V_MAX: f64 = 38.0;

impl TRule {
    fn new(spec: &LevyOUSpec, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut edges = vec![0.0];
        edges.extend((1..30).rev().map(|k| 10f64.powf(-1.0 - 7.0 * k as f64 / 29.0)));
        edges.extend((2..=20).map(|i| 0.05 * i as f64));
        edges.extend((1..=20).map(|i| 1.0 + 0.1 * i as f64));
        edges.extend((1..=20).map(|i| 3.0 + 0.25 * i as f64));
        let mut v = 8.0;
        while v < V_MAX {
            v += 1.0;
            edges.push(v);
        }
        let p = spec.gamma / spec.alpha;
        let mut t = Vec::with_capacity(edges.len() * order);
        let mut ww = Vec::with_capacity(edges.len() * order);
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            for (xi, wi) in x.iter().zip(&w) {
                let v = a + 0.5 * (b - a) * (xi + 1.0);
                t.push((-p * v).exp());
                ww.push(0.5 * (b - a) * wi * (-v).exp());
            }
        }
        Self { t, w: ww }
    }
}

/// `x`-independent part of the integrand at `(z, t)`.
fn kernel_factor(spec: &LevyOUSpec, z: f64, t: f64) -> Complex64 {
    let gauss = -spec.sigma * spec.sigma * z * z * (1.0 - t * t) / (4.0 * spec.gamma);
    let jump = if spec.lambda > 0.0 {
        let i = Complex64::i();
        (spec.lambda / spec.gamma) * ((spec.beta - i * z * t).ln() - (spec.beta - i * z).ln())
    } else {
        Complex64::new(0.0, 0.0)
    };
    (jump + gauss).exp()
}

fn green_hat_with(spec: &LevyOUSpec, rule: &TRule, x: f64, z: f64) -> Complex64 {
    if z == 0.0 {
        return Complex64::new(1.0 / spec.alpha, 0.0);
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (t, w) in rule.t.iter().zip(&rule.w) {
        total += *w * kernel_factor(spec, z, *t) * Complex64::from_polar(1.0, z * x * t);
    }
    total / spec.alpha
}

/// `Ĝ(x, z)`, from `Ĝ = (H(z)/γ) ∫_0^z e^{iζx}/(ζH(ζ)) dζ` with
/// `H(z) = e^{−σ²z²/(4γ)} |z|^{−α/γ} (β − iz)^{−λ/γ}` (principal branch);
/// `Ĝ(x, 0) = 1/α`. Two rule orders must agree to `1e−8`.
pub fn ou_green_hat(spec: &LevyOUSpec, x: f64, z: f64) -> Result<Complex64> {
    spec.validate()?;
    let fine = green_hat_with(spec, &TRule::new(spec, GL_ORDER), x, z);
    let coarse = green_hat_with(spec, &TRule::new(spec, GL_ORDER / 2), x, z);
    if !(fine.re.is_finite() && fine.im.is_finite()) || (fine - coarse).norm() > 1e-8 * fine.norm().max(1e-3) {
        return Err(Error::NonConvergent(format!("Ĝ({x}, {z}) quadrature disagrees: {fine} vs {coarse}")));
    }
    Ok(fine)
}

/// Residual of the transform ODE at `(x, z)`, with a central difference in `z`.
pub fn ode_residual(spec: &LevyOUSpec, x: f64, z: f64) -> Result<f64> {
    let h = 1e-4 * z.abs().max(1.0);
    let g = ou_green_hat(spec, x, z)?;
    let dg = (ou_green_hat(spec, x, z + h)? - ou_green_hat(spec, x, z - h)?) / (2.0 * h);
    let i = Complex64::i();
    let coef = spec.alpha + 0.5 * spec.sigma * spec.sigma * z * z - spec.lambda * i * z / (spec.beta - i * z);
    let lhs = coef * g + spec.gamma * z * dg;
    Ok((lhs - Complex64::from_polar(1.0, z * x)).norm())
}

/// One Fourier-inverted kernel row `y ↦ G(x, y)` on the DFT grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenRow {
    pub x: f64,
    pub y: Vec<f64>,
    pub g: Vec<f64>,
    /// `Σ G Δy`, to be compared with `1/α`.
    pub mass: f64,
    /// Largest `|Im G|` relative to the largest `|Re G|`.
    pub imag_residue: f64,
    /// `α |Ĝ(x, −A/2) − Ŝ(−A/2)|`: the transform left outside the window,
    /// after the closed-form comparator is taken out.
    pub edge_magnitude: f64,
}

impl GreenRow {
    /// A row sampled from a known kernel on a uniform grid.
    pub fn from_fn(x: f64, y: Vec<f64>, kernel: impl Fn(f64) -> f64) -> Self {
        let g: Vec<f64> = y.iter().map(|&v| kernel(v)).collect();
        let mass = trapezoid(&y, &g);
        Self { x, y, g, mass, imag_residue: 0.0, edge_magnitude: 0.0 }
    }

    /// Linear interpolation, zero outside the grid.
    pub fn value_at(&self, v: f64) -> f64 {
        let n = self.y.len();
        if n == 0 || v < self.y[0] || v > self.y[n - 1] {
            return 0.0;
        }
        let i = self.y.partition_point(|q| *q <= v).clamp(1, n - 1);
        let (y0, y1) = (self.y[i - 1], self.y[i]);
        let s = (v - y0) / (y1 - y0);
        self.g[i - 1] + s * (self.g[i] - self.g[i - 1])
    }

    /// Trapezoid `∫_lo^hi f(y) G(x, y) dy` on the grid, with linearly
    /// interpolated partial cells at both ends.
    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.y.len();
        if n < 2 {
            return 0.0;
        }
        let lo = lo.max(self.y[0]);
        let hi = hi.min(self.y[n - 1]);
        if lo >= hi {
            return 0.0;
        }
        let h = |v: f64| f(v) * self.value_at(v);
        let mut pts = vec![(lo, h(lo))];
        for (v, g) in self.y.iter().zip(&self.g).filter(|(v, _)| **v > lo && **v < hi) {
            pts.push((*v, f(*v) * g));
        }
        pts.push((hi, h(hi)));
        pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum()
    }
}

fn trapezoid(y: &[f64], g: &[f64]) -> f64 {
    y.windows(2).zip(g.windows(2)).map(|(y, g)| 0.5 * (g[0] + g[1]) * (y[1] - y[0])).sum()
}

/// Rows of `G` on a shared `y` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridGreenKernel {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// `values[i][k] = G(x_i, y_k)`.
    pub values: Vec<Vec<f64>>,
    pub dft: DftParams,
}

/// Green density of Brownian motion with the OU drift frozen at `x`,
/// `b = −γx`, and killing `α`. It carries the same kink and curvature jump
/// at `y = x` as `G(x, ·)`, so `Ĝ − Ŝ` decays like `z⁻⁴` and the DFT only
/// sees the smooth remainder.
struct Comparator {
    x: f64,
    b: f64,
    d: f64,
    sigma2: f64,
    kill: f64,
}

impl Comparator {
    fn new(spec: &LevyOUSpec, x: f64) -> Option<Self> {
        if spec.sigma <= 0.0 {
            return None;
        }
        let sigma2 = spec.sigma * spec.sigma;
        let b = -spec.gamma * x;
        let kill = spec.alpha;
        let d = (b * b + 2.0 * kill * sigma2).sqrt();
        Some(Self { x, b, d, sigma2, kill })
    }

    /// `e^{izx}/(α − ibz + σ²z²/2)`.
    fn transform(&self, z: f64) -> Complex64 {
        Complex64::from_polar(1.0, z * self.x) / Complex64::new(self.kill + 0.5 * self.sigma2 * z * z, -self.b * z)
    }

    fn density(&self, y: f64) -> f64 {
        let u = y - self.x;
        let r = if u > 0.0 { (self.b - self.d) / self.sigma2 } else { (self.b + self.d) / self.sigma2 };
        (r * u).exp() / self.d
    }
}

/// Precomputed transform weights for one spec and DFT window.
pub struct OuKernel {
    spec: LevyOUSpec,
    dft: DftParams,
    /// `z_m = mA/n`, `m = 0..=n/2`.
    z_half: Vec<f64>,
    /// Nodes `(t_q, w_q K(z_m, t_q)/α)` per `z_m`, negligible ones dropped.
    weights: Vec<Vec<(f64, Complex64)>>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for OuKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OuKernel").field("spec", &self.spec).field("dft", &self.dft).finish()
    }
}

impl OuKernel {
    pub fn new(spec: LevyOUSpec, dft: DftParams) -> Result<Self> {
        spec.validate()?;
        dft.validate()?;
        let rule = TRule::new(&spec, GL_ORDER);
        let z_half: Vec<f64> = (0..=dft.n / 2).map(|m| m as f64 * dft.a / dft.n as f64).collect();
        let floor = NEGLIGIBLE / spec.alpha;
        let mut weights = Vec::with_capacity(z_half.len());
        for &z in &z_half {
            let mut row = Vec::new();
            for (tq, wq) in rule.t.iter().zip(&rule.w) {
                // the jump factor has modulus ≤ 1, so the Gaussian bounds it
                let gauss = -spec.sigma * spec.sigma * z * z * (1.0 - tq * tq) / (4.0 * spec.gamma);
                if wq * gauss.exp() < floor {
                    continue;
                }
                let w = *wq / spec.alpha * kernel_factor(&spec, z, *tq);
                if !(w.re.is_finite() && w.im.is_finite()) {
                    return Err(Error::NonConvergent("transform weights overflow".into()));
                }
                row.push((*tq, w));
            }
            weights.push(row);
        }
        let fft = FftPlanner::new().plan_fft_forward(dft.n);
        Ok(Self { spec, dft, z_half, weights, fft })
    }

    pub fn spec(&self) -> &LevyOUSpec {
        &self.spec
    }

    pub fn dft(&self) -> &DftParams {
        &self.dft
    }

    /// `Ĝ(x, z_m)` for `z_m ≥ 0`.
    fn half_transform(&self, x: f64) -> Vec<Complex64> {
        self.z_half
            .iter()
            .zip(&self.weights)
            .map(|(&z, row)| row.iter().map(|(tq, wq)| wq * Complex64::from_polar(1.0, z * x * tq)).sum())
            .collect()
    }

    /// `v_j = Ĝ(x, z_j)`, `z_j = −A/2 + jA/n`, using `Ĝ(x, −z) = conj Ĝ(x, z)`.
    pub fn transform_samples(&self, x: f64) -> Vec<Complex64> {
        let half = self.half_transform(x);
        let n = self.dft.n;
        (0..n).map(|j| if j >= n / 2 { half[j - n / 2] } else { half[n / 2 - j].conj() }).collect()
    }

    /// Inverts one row: `G(x, y_k) ≈ (1/2π)(A/n) e^{iπk} w_k` with
    /// `w = DFT(v)` and `y_k = 2πk/A`; indices `k > n/2` stand for
    /// `y_k − 2πn/A`. The comparator is removed from `v` before the DFT and
    /// added back in closed form. The row is returned sorted in `y`.
    pub fn row(&self, x: f64) -> Result<GreenRow> {
        let n = self.dft.n;
        let mut buf = self.transform_samples(x);
        let comparator = Comparator::new(&self.spec, x);
        if let Some(c) = &comparator {
            for (j, v) in buf.iter_mut().enumerate() {
                *v -= c.transform(-self.dft.a / 2.0 + j as f64 * self.dft.a / n as f64);
            }
        }
        let edge_magnitude = buf[0].norm() * self.spec.alpha;
        // ±A/2 share one DFT slot: half weight each, trapezoid style
        buf[0] = Complex64::new(buf[0].re, 0.0);
        self.fft.process(&mut buf);
        let scale = self.dft.a / (2.0 * PI * n as f64);
        let dy = self.dft.dy();
        let mut pairs: Vec<(f64, Complex64)> = buf
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let y = if k > n / 2 { (k as f64 - n as f64) * dy } else { k as f64 * dy };
                (y, w * (sign * scale))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let re_max = pairs.iter().fold(0.0f64, |m, p| m.max(p.1.re.abs()));
        let im_max = pairs.iter().fold(0.0f64, |m, p| m.max(p.1.im.abs()));
        let imag_residue = if re_max > 0.0 { im_max / re_max } else { im_max };
        if imag_residue > 1e-6 {
            return Err(Error::ImaginaryResidue(imag_residue));
        }
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let g: Vec<f64> = match &comparator {
            Some(c) => pairs.iter().map(|p| p.1.re + c.density(p.0)).collect(),
            None => pairs.iter().map(|p| p.1.re).collect(),
        };
        let mass = g.iter().sum::<f64>() * dy;
        let expected = 1.0 / self.spec.alpha;
        if (mass - expected).abs() > 0.05 * expected {
            return Err(Error::AliasingDetected { mass, expected });
        }
        Ok(GreenRow { x, y, g, mass, imag_residue, edge_magnitude })
    }

    /// Rows at each `x`, on the common `y` grid.
    pub fn grid(&self, xs: &[f64]) -> Result<GridGreenKernel> {
        let rows = xs.iter().map(|&x| self.row(x)).collect::<Result<Vec<_>>>()?;
        let y_grid = rows.first().map(|r| r.y.clone()).unwrap_or_default();
        Ok(GridGreenKernel {
            x_grid: xs.to_vec(),
            y_grid,
            values: rows.into_iter().map(|r| r.g).collect(),
            dft: self.dft,
        })
    }

    /// `∫_{(c, ∞)} f(y) G(x, y) dy` on the grid.
    pub fn tail_integral(&self, x: f64, c: f64) -> Result<f64> {
        let row = self.row(x)?;
        Ok(row.integrate(c, f64::INFINITY, |y| self.spec.f(y)))
    }
}

/// One inverted row; see [`OuKernel::row`].
pub fn invert_green_dft(spec: &LevyOUSpec, x: f64, dft: DftParams) -> Result<GreenRow> {
    OuKernel::new(*spec, dft)?.row(x)
}

/// Threshold for `g = x⁺`, with the sign and majorant checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpThreshold {
    pub x_star: f64,
    /// `x* − ∫_{(x*, ∞)} f G(x*, ·)` at the returned root.
    pub residual: f64,
    /// `f(x*)`; nonnegative, so `f ≥ 0` on `[x*, ∞)`.
    pub f_at_star: f64,
    /// Smallest `V − g` sampled below `x*`.
    pub majorant_margin: f64,
}

const BELOW_SAMPLES: usize = 15;

/// Solves `x = ∫_{(x, ∞)} f(y) G(x, y) dy` in the bracket; then checks
/// `f ≥ 0` beyond the root and `V ≥ x⁺` on points below it.
pub fn find_threshold_jump(kernel: &OuKernel, bracket: Bracket, tol: &Tolerances) -> Result<JumpThreshold> {
    let spec = kernel.spec;
    let root_tol = Tolerances { root_abs: tol.root_abs.max(1e-9), ..*tol };
    let residual = |x: f64| kernel.tail_integral(x, x).map_or(f64::NAN, |v| x - v);
    let x_star = find_root(residual, bracket.lo, bracket.hi, &root_tol)?;
    let res = residual(x_star);
    let f_at_star = spec.f(x_star);
    if spec.alpha + spec.gamma <= 0.0 || f_at_star < 0.0 {
        return Err(Error::HypothesisViolated(format!("f({x_star}) = {f_at_star} < 0")));
    }
    let mut margin = f64::INFINITY;
    for k in 1..=BELOW_SAMPLES {
        let x = x_star - 0.2 * k as f64;
        let v = kernel.tail_integral(x, x_star)?;
        margin = margin.min(v - x.max(0.0));
    }
    if margin < -1e-6 {
        return Err(Error::HypothesisViolated(format!("V < x⁺ below {x_star} (margin {margin:e})")));
    }
    Ok(JumpThreshold { x_star, residual: res, f_at_star, majorant_margin: margin })
}

/// `V(x) = ∫_{(x*, ∞)} f(y) G(x, y) dy` next to `g(x) = x⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValuePoint {
    pub x: f64,
    pub v: f64,
    pub g: f64,
}

/// Value table on `xs`; fails if `V < g` somewhere below `x*`.
pub fn value_function_jump(kernel: &OuKernel, x_star: f64, xs: &[f64]) -> Result<Vec<ValuePoint>> {
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let v = kernel.tail_integral(x, x_star)?;
        let g = x.max(0.0);
        if x < x_star && v < g - 1e-4 {
            return Err(Error::MajorantViolated { at: x, margin: v - g });
        }
        out.push(ValuePoint { x, v, g });
    }
    Ok(out)
}

/// `G(x, H)/G(z, H)` across sets `H` below `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub ratios: Vec<f64>,
    /// `(max − min)/mean` of the ratios.
    pub spread: f64,
    pub consistent: bool,
}

/// For upward jumps the process passes `z` continuously on its way down, so
/// the ratio is the same for every `H` below `z`.
pub fn green_ratio_check(row_x: &GreenRow, row_z: &GreenRow, sets: &[(f64, f64)]) -> RatioReport {
    let ratios: Vec<f64> = sets
        .iter()
        .map(|&(lo, hi)| row_x.integrate(lo, hi, |_| 1.0) / row_z.integrate(lo, hi, |_| 1.0))
        .collect();
    let (min, max) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(*r), b.max(*r)));
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let spread = if ratios.is_empty() { 0.0 } else { (max - min) / mean.abs() };
    RatioReport { consistent: spread.is_finite() && spread <= 0.02, spread, ratios }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::integrate_fn;

    fn spec(lambda: f64) -> LevyOUSpec {
        LevyOUSpec::new(1.0, 1.0, lambda, 1.0, 1.0).unwrap()
    }

    /// `erfi(v) = (2/√π) ∫_0^v e^{s²} ds` by composite Simpson.
    fn erfi(v: f64) -> f64 {
        let n = 20_000;
        let h = v / n as f64;
        let f = |s: f64| (s * s).exp();
        let mut s = f(0.0) + f(v);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0 * 2.0 / PI.sqrt()
    }

    #[test]
    fn zero_frequency_is_one_over_alpha() {
        let s = LevyOUSpec::new(0.7, 1.2, 0.5, 2.0, 1.3).unwrap();
        assert_eq!(ou_green_hat(&s, 0.4, 0.0).unwrap(), Complex64::new(1.0 / 1.3, 0.0));
        let near = ou_green_hat(&s, 0.4, 1e-6).unwrap();
        assert!((near - 1.0 / 1.3).norm() < 1e-5);
    }

    #[test]
    fn gaussian_case_matches_erfi_form() {
        // λ = 0, α = γ = 1, x = 0: Ĝ(0, z) = √π e^{−z²/4} erfi(z/2)/z
        let z: f64 = 2.0;
        let expect = PI.sqrt() * (-z * z / 4.0).exp() * erfi(z / 2.0) / z;
        let got = ou_green_hat(&spec(0.0), 0.0, z).unwrap();
        assert!((got - expect).norm() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn jump_case_matches_erfi_form() {
        // α = β = γ = λ = 1, x = 0, z = 1:
        // Ĝ = e^{−1/4}/(1 − i) (√π erfi(1/2) − 2i(e^{1/4} − 1))
        let i = Complex64::i();
        let expect = (-0.25f64).exp() / (1.0 - i) * (PI.sqrt() * erfi(0.5) - 2.0 * i * (0.25f64.exp() - 1.0));
        let got = ou_green_hat(&spec(1.0), 0.0, 1.0).unwrap();
        assert!((got - expect).norm() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn time_domain_oracle() {
        // Ĝ(x, z) = ∫_0^∞ e^{−αt} E_x[e^{izX_t}] dt
        let s = LevyOUSpec::new(0.8, 0.6, 0.7, 1.5, 1.1).unwrap();
        let (x, z) = (0.3, 2.5);
        let i = Complex64::i();
        let cf = |t: f64| {
            let e = (-s.gamma * t).exp();
            let gauss = -s.sigma * s.sigma * z * z * (1.0 - e * e) / (4.0 * s.gamma);
            let jump = (s.lambda / s.gamma) * ((s.beta - i * z * e).ln() - (s.beta - i * z).ln());
            (-s.alpha * t + i * z * x * e + gauss + jump).exp()
        };
        let tol = Tolerances { quad_rel: 1e-12, ..Tolerances::default() };
        let expect: Complex64 = integrate_fn(&cf, 0.0, f64::INFINITY, &tol).unwrap();
        let got = ou_green_hat(&s, x, z).unwrap();
        assert!((got - expect).norm() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn transform_solves_its_ode() {
        for s in [spec(1.0), spec(0.0), LevyOUSpec::new(0.5, 0.8, 2.0, 3.0, 0.7).unwrap()] {
            for (x, z) in [(0.0, 0.5), (1.0, 2.0), (-0.7, 5.0)] {
                let r = ode_residual(&s, x, z).unwrap();
                assert!(r < 1e-4, "{s:?} at ({x}, {z}): {r:e}");
            }
        }
    }

    #[test]
    fn rows_have_unit_mass_and_are_nonnegative() {
        for lambda in [0.0, 1.0] {
            let row = invert_green_dft(&spec(lambda), 0.0, DftParams::default()).unwrap();
            assert!((row.mass - 1.0).abs() < 0.01, "mass {}", row.mass);
            assert!(row.g.iter().all(|g| *g >= -1e-6));
            assert!(row.imag_residue <= 1e-6);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LevyOUSpec::new(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(OuKernel::new(spec(1.0), DftParams { a: 64.0, n: 1000 }).is_err());
    }

    #[test]
    fn aliasing_is_detected() {
        // y range ±π/4 cuts off most of the mass
        let err = invert_green_dft(&spec(1.0), 0.0, DftParams { a: 64.0, n: 16 }).unwrap_err();
        assert!(matches!(err, Error::AliasingDetected { .. } | Error::ImaginaryResidue(_)), "{err:?}");
    }

    #[test]
    fn thresholds() {
        let tol = Tolerances::default();
        let br = Bracket::new(0.3, 2.0).unwrap();
        let k1 = OuKernel::new(spec(1.0), DftParams::default()).unwrap();
        let t1 = find_threshold_jump(&k1, br, &tol).unwrap();
        assert!((t1.x_star - 1.1442).abs() < 0.01, "{t1:?}");
        assert!((t1.f_at_star - (2.0 * t1.x_star - 1.0)).abs() < 1e-12 && t1.f_at_star > 0.0);
        let k0 = OuKernel::new(spec(0.0), DftParams::default()).unwrap();
        let t0 = find_threshold_jump(&k0, br, &tol).unwrap();
        assert!((t0.x_star - 0.5939).abs() < 0.01, "{t0:?}");
    }

    #[test]
    fn value_table() {
        let k = OuKernel::new(spec(1.0), DftParams::default()).unwrap();
        let x_star = find_threshold_jump(&k, Bracket::new(0.3, 2.0).unwrap(), &Tolerances::default()).unwrap().x_star;
        let table = value_function_jump(&k, x_star, &[-1.0, 0.0, 0.5, x_star, x_star + 0.5, x_star + 1.5]).unwrap();
        assert!((table[3].v - x_star).abs() < 1e-6);
        assert!(table[1].v > 0.0 && table[1].v < table[3].v);
        assert!(table[0].v < table[1].v && table[1].v < table[2].v);
        for p in &table[4..] {
            assert!((p.v - p.x).abs() < 5e-3, "{p:?}");
        }
    }

    #[test]
    fn ratio_is_independent_of_the_set() {
        let k = OuKernel::new(spec(1.0), DftParams::default()).unwrap();
        let (rx, rz) = (k.row(1.0).unwrap(), k.row(0.0).unwrap());
        let rep = green_ratio_check(&rx, &rz, &[(-3.0, -2.5), (-2.5, -1.8), (-1.8, -1.0)]);
        assert!(rep.consistent, "{rep:?}");
        let same = green_ratio_check(&rz, &rz, &[(-3.0, -1.0)]);
        assert_eq!(same.ratios, vec![1.0]);
    }

    #[test]
    fn ratio_for_a_diffusion_is_the_hitting_transform() {
        use crate::diffusion::{green, hitting_transform, BmDrift, Diffusion};
        let p = BmDrift::new(1.0, 0.4).unwrap();
        let ys: Vec<f64> = (0..=4000).map(|i| -10.0 + 0.005 * i as f64).collect();
        let row = |x: f64| GreenRow::from_fn(x, ys.clone(), |y| green(&p, x, y).unwrap() * p.speed_density(y));
        let rep = green_ratio_check(&row(1.0), &row(0.0), &[(-3.0, -2.0), (-2.0, -0.5)]);
        let h = hitting_transform(&p, 1.0, 0.0).unwrap();
        for r in &rep.ratios {
            assert!((r - h).abs() < 1e-4 * h, "{r} vs {h}");
        }
    }

    #[test]
    fn slow_reversion_approaches_brownian_kernel() {
        // λ = 0, small γ: near 0 the kernel is close to e^{−√(2α)|x−y|}/√(2α)
        let s = LevyOUSpec::new(0.02, 1.0, 0.0, 1.0, 1.0).unwrap();
        let row = invert_green_dft(&s, 0.0, DftParams { a: 64.0, n: 4096 }).unwrap();
        let r2 = 2f64.sqrt();
        for y in [-0.5f64, 0.0, 0.5, 1.0] {
            let bm = (-r2 * y.abs()).exp() / r2;
            let v = row.value_at(y);
            assert!((v - bm).abs() < 0.05 * bm, "y = {y}: {v} vs {bm}");
        }
    }
}
