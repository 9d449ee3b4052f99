//! Marginal densities of one-dimensional stochastic convolutions by Fourier
//! inversion of `e^{-E(h)}`, with the Fisher-type integral, total-variation
//! distances and gradient norms built on top.

use std::fmt::Write as _;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::bernstein::IntegratedExponent;
use crate::defaults;
use crate::error::{Error, Result};

/// A characteristic exponent `E(h)`, even and nondecreasing in `|h|`, so that
/// the law has characteristic function `e^{-E(h)}`.
pub trait Exponent: Sync {
    fn exponent(&self, h: f64) -> Result<f64>;
}

impl<F: Fn(f64) -> Result<f64> + Sync> Exponent for F {
    fn exponent(&self, h: f64) -> Result<f64> {
        self(h)
    }
}

/// `E(h) = F_t(h²)` for a subordinate Brownian driver.
pub struct SubordinateExponent<'a>(pub &'a IntegratedExponent);

impl Exponent for SubordinateExponent<'_> {
    fn exponent(&self, h: f64) -> Result<f64> {
        self.0.eval(h * h)
    }
}

/// `E(h) = (σ|h|)^α`, a symmetric α-stable law of scale `σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableExponent {
    pub alpha: f64,
    pub scale: f64,
}

impl Exponent for StableExponent {
    fn exponent(&self, h: f64) -> Result<f64> {
        Ok((self.scale * h.abs()).powf(self.alpha))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityOptions {
    pub initial_points: usize,
    pub max_points: usize,
    pub edge_ratio: f64,
    /// Grid points per characteristic width `1/h₁`, where `E(h₁) = 1`.
    pub resolution: f64,
    pub cf_cutoff: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            initial_points: defaults::DENSITY_POINTS,
            max_points: defaults::DENSITY_MAX_POINTS,
            edge_ratio: defaults::DENSITY_EDGE_RATIO,
            resolution: defaults::DENSITY_RESOLUTION,
            cf_cutoff: defaults::CF_CUTOFF,
        }
    }
}

/// Explicit grid: `points` samples (a power of two) spaced by `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridParams {
    pub step: f64,
    pub points: usize,
}

/// Density and derivative on the symmetric grid `x_i = (i - center)·step`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityGrid {
    pub step: f64,
    pub half_width: f64,
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    /// `|1 - Σ p·step|`.
    pub mass_defect: f64,
    /// Bound on the density error from ignoring frequencies beyond `h_cutoff`.
    pub inversion_tail_bound: f64,
    pub h_cutoff: f64,
    /// Total mass removed by clipping negative values to zero.
    pub clipped_mass: f64,
    /// Most negative value before clipping.
    pub min_raw_value: f64,
    /// `max(p at the two edges) / max p`.
    pub edge_ratio: f64,
}

impl DensityGrid {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn center(&self) -> usize {
        self.p.len() / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.step
    }

    pub fn max_p(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }

    /// Largest relative deviation from `p` even and `p'` odd.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        let scale_p = self.max_p();
        let scale_dp = self.dp.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        (0..n / 2)
            .map(|i| {
                let j = n - 1 - i;
                ((self.p[i] - self.p[j]).abs() / scale_p).max((self.dp[i] + self.dp[j]).abs() / scale_dp)
            })
            .fold(0.0, f64::max)
    }

    /// Density at an arbitrary `x` by cubic Hermite interpolation from `p, p'`;
    /// zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let u = x / self.step + self.center() as f64;
        if u < 0.0 || u > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.len() - 2);
        let s = u - i as f64;
        if s == 0.0 {
            return self.p[i];
        }
        let (p0, p1) = (self.p[i], self.p[i + 1]);
        let (m0, m1) = (self.dp[i] * self.step, self.dp[i + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
    }

    /// CSV with `#` metadata lines followed by `x,p,dp` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# step={:e}", self.step);
        let _ = writeln!(out, "# half_width={:e}", self.half_width);
        let _ = writeln!(out, "# mass_defect={:e}", self.mass_defect);
        let _ = writeln!(out, "# inversion_tail_bound={:e}", self.inversion_tail_bound);
        let _ = writeln!(out, "# clipped_mass={:e}", self.clipped_mass);
        let _ = writeln!(out, "# edge_ratio={:e}", self.edge_ratio);
        out.push_str("x,p,dp\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "{:e},{:e},{:e}", self.x(i), self.p[i], self.dp[i]);
        }
        out
    }
}

/// Smallest `h` (to relative precision 1e-4) with `E(h) ≥ level`.
fn level_crossing(e: &dyn Exponent, level: f64) -> Result<Option<f64>> {
    let mut lo = 0.0;
    let mut hi = 1e-8;
    while e.exponent(hi)? < level {
        lo = hi;
        hi *= 2.0;
        if hi > 1e150 {
            return Ok(None);
        }
    }
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if e.exponent(mid)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

struct Scales {
    width: f64,
    h_cutoff: f64,
}

fn scales(e: &dyn Exponent, opts: &DensityOptions) -> Result<Scales> {
    let h1 = level_crossing(e, 1.0)?.ok_or_else(|| {
        Error::Grid("characteristic exponent never reaches 1; the law has no density of this kind".into())
    })?;
    let h_cutoff = level_crossing(e, -opts.cf_cutoff.ln())?.ok_or_else(|| {
        Error::Grid(
            "characteristic function does not decay below the cutoff; the exponent must grow faster than log(1 + h²)"
                .into(),
        )
    })?;
    Ok(Scales {
        width: 1.0 / h1,
        h_cutoff,
    })
}

/// Grid parameters chosen from the exponent alone: resolve both `π/H*` and the
/// characteristic width, then widen until the edges are negligible and shrink
/// when most of the grid carries no mass.
pub fn auto_params(e: &dyn Exponent, opts: &DensityOptions) -> Result<GridParams> {
    Ok(compute_auto(e, opts)?.0)
}

fn compute_auto(e: &dyn Exponent, opts: &DensityOptions) -> Result<(GridParams, DensityGrid)> {
    let sc = scales(e, opts)?;
    let mut params = GridParams {
        step: (std::f64::consts::PI / sc.h_cutoff).min(sc.width / opts.resolution),
        points: opts.initial_points.next_power_of_two(),
    };
    let mut shrinks = 0;
    loop {
        let grid = compute_density_with(e, &params, opts)?;
        if grid.edge_ratio > opts.edge_ratio && params.points < opts.max_points {
            params.points *= 2;
            continue;
        }
        let floor = defaults::FISHER_FLOOR * grid.max_p();
        let support = grid.p.iter().filter(|v| **v >= floor).count() as f64 / grid.len() as f64;
        if support < 0.5 && shrinks < 6 {
            params.step *= support / 0.6;
            shrinks += 1;
            continue;
        }
        return Ok((params, grid));
    }
}

/// Density with automatically chosen grid.
pub fn compute_density(e: &dyn Exponent, opts: &DensityOptions) -> Result<DensityGrid> {
    Ok(compute_auto(e, opts)?.1)
}

/// Densities of two laws on a common grid (finest step, widest extent).
pub fn compute_density_pair(a: &dyn Exponent, b: &dyn Exponent, opts: &DensityOptions) -> Result<(DensityGrid, DensityGrid)> {
    let pa = auto_params(a, opts)?;
    let pb = auto_params(b, opts)?;
    let step = pa.step.min(pb.step);
    let width = (pa.step * pa.points as f64).max(pb.step * pb.points as f64);
    let points = ((width / step).ceil() as usize).next_power_of_two().min(opts.max_points.max(pa.points).max(pb.points));
    let params = GridParams { step, points };
    Ok((compute_density_with(a, &params, opts)?, compute_density_with(b, &params, opts)?))
}

/// `p(x) = (1/2π) ∫ e^{-ihx} e^{-E(h)} dh` and its derivative on an explicit grid.
pub fn compute_density_with(e: &dyn Exponent, params: &GridParams, opts: &DensityOptions) -> Result<DensityGrid> {
    let m = params.points;
    if m < 16 || !m.is_power_of_two() {
        return Err(Error::Grid(format!("grid size must be a power of two ≥ 16, got {m}")));
    }
    if !(params.step > 0.0 && params.step.is_finite()) {
        return Err(Error::Grid(format!("grid step must be positive, got {}", params.step)));
    }
    let dx = params.step;
    let dh = 2.0 * std::f64::consts::PI / (m as f64 * dx);
    let cutoff_level = -opts.cf_cutoff.ln();

    // φ(k·dh) for k = 0..=m/2, zero once E passes the cutoff level.
    let half = m / 2;
    let phi: Vec<Result<f64>> = (0..=half)
        .into_par_iter()
        .map(|k| {
            let v = e.exponent(k as f64 * dh)?;
            Ok(if v >= cutoff_level { 0.0 } else { (-v).exp() })
        })
        .collect();
    let phi: Vec<f64> = phi.into_iter().collect::<Result<_>>()?;
    let h_cutoff = phi
        .iter()
        .rposition(|v| *v > 0.0)
        .map_or(0.0, |k| (k + 1) as f64 * dh);

    // Bound on (1/π)∫_{H}^∞ e^{-E}: E nondecreasing, dyadic blocks.
    let mut inversion_tail_bound = 0.0;
    let mut h = h_cutoff.max(dh);
    for _ in 0..200 {
        let v = e.exponent(h)?;
        let term = h * (-v).exp();
        inversion_tail_bound += term;
        if term <= 1e-3 * inversion_tail_bound || term == 0.0 {
            break;
        }
        h *= 2.0;
    }
    inversion_tail_bound /= std::f64::consts::PI;

    // Frequency k' = k (k < m/2) or k - m, with (-1)^k centring the output.
    let mut buf_p = vec![Complex::new(0.0, 0.0); m];
    let mut buf_dp = vec![Complex::new(0.0, 0.0); m];
    for k in 0..m {
        if k == half {
            continue;
        }
        let kk = if k < half { k as f64 } else { k as f64 - m as f64 };
        let v = phi[kk.abs() as usize];
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        buf_p[k] = Complex::new(sign * v, 0.0);
        // (-ih)φ(h)
        buf_dp[k] = Complex::new(0.0, -sign * kk * dh * v);
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    fft.process(&mut buf_p);
    fft.process(&mut buf_dp);
    let norm = dh / (2.0 * std::f64::consts::PI);

    // Drop index 0 (x = -L/2) so the grid is symmetric about its centre.
    let mut p: Vec<f64> = buf_p[1..].iter().map(|c| c.re * norm).collect();
    let dp: Vec<f64> = buf_dp[1..].iter().map(|c| c.re * norm).collect();

    let min_raw_value = p.iter().copied().fold(f64::INFINITY, f64::min);
    let mut clipped_mass = 0.0;
    for v in p.iter_mut() {
        if *v < 0.0 {
            clipped_mass += -*v * dx;
            *v = 0.0;
        }
    }
    let peak = p.iter().copied().fold(0.0, f64::max);
    let edge_ratio = p[0].max(p[p.len() - 1]) / peak;
    let mass: f64 = p.iter().sum::<f64>() * dx;
    let half_width = (half - 1) as f64 * dx;

    Ok(DensityGrid {
        step: dx,
        half_width,
        p,
        dp,
        mass_defect: (1.0 - mass).abs(),
        inversion_tail_bound,
        h_cutoff,
        clipped_mass,
        min_raw_value,
        edge_ratio,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FisherIntegral {
    pub value: f64,
    /// Grid points excluded because `p` fell below the floor.
    pub excluded_points: usize,
    /// `true` when some of the grid was excluded, so `value` omits a tail piece.
    pub unevaluated_tail: bool,
}

/// `∫ p'²/p` over the grid points where `p ≥ floor·max p`.
pub fn fisher_integral(g: &DensityGrid) -> Result<FisherIntegral> {
    let floor = defaults::FISHER_FLOOR * g.max_p();
    let mut value = 0.0;
    let mut excluded = 0;
    for (p, dp) in g.p.iter().zip(&g.dp) {
        if *p >= floor && *p > 0.0 {
            value += dp * dp / p;
        } else {
            excluded += 1;
        }
    }
    if excluded * 2 > g.len() {
        return Err(Error::Grid(format!(
            "{excluded} of {} grid points lie below the positivity floor",
            g.len()
        )));
    }
    Ok(FisherIntegral {
        value: value * g.step,
        excluded_points: excluded,
        unevaluated_tail: excluded > 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvEstimate {
    /// `(1/2) ∫ |p - q|`.
    pub value: f64,
    pub uncertainty: f64,
}

/// `(1/2) Σ |p(z) - p(z - δ)|·step`.
pub fn tv_distance_1d(g: &DensityGrid, delta: f64) -> Result<TvEstimate> {
    tv_between(g, g, delta)
}

/// `(1/2) ∫ |p(z) - q(z - δ)| dz` for two densities sharing a grid step.
pub fn tv_between(p: &DensityGrid, q: &DensityGrid, delta: f64) -> Result<TvEstimate> {
    if (p.step - q.step).abs() > 1e-12 * p.step || p.len() != q.len() {
        return Err(Error::Grid("densities must share the grid".into()));
    }
    if !(delta.abs() <= p.half_width / 4.0) {
        return Err(Error::Grid(format!(
            "shift {delta:e} exceeds a quarter of the half width {:e}",
            p.half_width
        )));
    }
    if delta == 0.0 && std::ptr::eq(p, q) {
        return Ok(TvEstimate {
            value: 0.0,
            uncertainty: 0.0,
        });
    }
    let diff: Vec<f64> = (0..p.len())
        .into_par_iter()
        .map(|i| p.p[i] - q.interpolate(p.x(i) - delta))
        .collect();
    let value = 0.5 * abs_integral(&diff, p.step);
    let edge = p.edge_ratio * p.max_p() + q.edge_ratio * q.max_p();
    let uncertainty = p.mass_defect + q.mass_defect + p.clipped_mass + q.clipped_mass + edge * (delta.abs() + p.step);
    Ok(TvEstimate {
        value: value.clamp(0.0, 1.0),
        uncertainty,
    })
}

/// `e^{-γt} ∫ |p'|`, the norm of the gradient of the one-mode Mehler semigroup.
pub fn gradient_norm_1d(g: &DensityGrid, gamma: f64, t: f64) -> f64 {
    (-gamma * t).exp() * abs_integral(&g.dp, g.step)
}

/// `∫ |d|` from samples of a smooth `d` on a uniform grid. The plain sum is
/// spectrally accurate except at sign changes, where `|d|` has jumps in its
/// derivatives. A kink at fractional offset `θ` with derivative jumps `J_k`
/// biases the sum by `-Σ (-1)^{k+1} J_k h^{k+1} B_{k+1}(θ)/(k+1)!`, corrected
/// here for `k ≤ 3`. The
/// root and derivatives come from a local cubic through four samples.
pub fn abs_integral(d: &[f64], h: f64) -> f64 {
    let n = d.len();
    let mut sum: f64 = d.iter().map(|v| v.abs()).sum::<f64>() * h;
    for i in 0..n.saturating_sub(1) {
        let (a, b) = (d[i], d[i + 1]);
        let at_node = a == 0.0 && i > 0 && b != 0.0 && (d[i - 1] < 0.0) != (b < 0.0);
        let inside = a != 0.0 && b != 0.0 && (a < 0.0) != (b < 0.0);
        if !(at_node || inside) {
            continue;
        }
        let theta0 = if at_node { 0.0 } else { a / (a - b) };
        let (theta, d1, d2, d3) = if i >= 1 && i + 2 < n {
            kink_cubic([d[i - 1], a, b, d[i + 2]], theta0)
        } else {
            (theta0, b - a, 0.0, 0.0)
        };
        // jumps of |d|^{(k)} scaled by h^k
        let s = d1.signum();
        let (j1, j2, j3) = (2.0 * d1.abs(), 2.0 * s * d2, 2.0 * s * d3);
        let t2 = theta * theta;
        let b2 = t2 - theta + 1.0 / 6.0;
        let b3 = t2 * theta - 1.5 * t2 + 0.5 * theta;
        let b4 = t2 * t2 - 2.0 * t2 * theta + t2 - 1.0 / 30.0;
        sum += h * (j1 * b2 / 2.0 - j2 * b3 / 6.0 + j3 * b4 / 24.0);
    }
    sum
}

/// Root in `[0, 1]` of the cubic through `y` at `u = -1, 0, 1, 2`, with the
/// first three derivatives there (per unit `u`).
fn kink_cubic(y: [f64; 4], theta0: f64) -> (f64, f64, f64, f64) {
    let d1 = y[1] - y[0];
    let d2 = y[2] - 2.0 * y[1] + y[0];
    let d3 = y[3] - 3.0 * y[2] + 3.0 * y[1] - y[0];
    let p = |u: f64| y[0] + d1 * (u + 1.0) + 0.5 * d2 * (u * u + u) + d3 / 6.0 * (u * u * u - u);
    let dp = |u: f64| d1 + 0.5 * d2 * (2.0 * u + 1.0) + d3 / 6.0 * (3.0 * u * u - 1.0);
    let mut u = theta0;
    for _ in 0..20 {
        let slope = dp(u);
        if slope == 0.0 {
            break;
        }
        let next = (u - p(u) / slope).clamp(0.0, 1.0);
        if (next - u).abs() < 1e-15 {
            u = next;
            break;
        }
        u = next;
    }
    (u, dp(u), d2 + d3 * u, d3)
}
