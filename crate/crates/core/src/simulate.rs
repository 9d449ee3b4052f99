//! Exact-in-law sampling of OU mode coefficients and empirical characteristic
//! functions for checking sampled laws.
//!
//! Randomness is counter based: every `(scenario, mode, replicate, step)` tuple
//! owns an independent ChaCha8 stream keyed from the master seed, so results do
//! not depend on the order in which parallel workers run.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bernstein::{BernsteinKind, BernsteinSpec};
use crate::criteria::{ergodicity_criterion, CriterionOptions, CriterionReport};
use crate::defaults;
use crate::error::{Error, Result};
use crate::levy::stable_symbol_constant;
use crate::spectrum::{ModeNoise, SpectrumSpec};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed from which all substreams are derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RngStreamSpec {
    pub master_seed: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Stream for `(scenario, mode, replicate)`.
    pub fn stream(&self, scenario: u64, mode: u64, replicate: u64) -> ChaCha8Rng {
        self.stream_at(scenario, mode, replicate, 0)
    }

    /// Stream for `(scenario, mode, replicate, step)`.
    pub fn stream_at(&self, scenario: u64, mode: u64, replicate: u64, step: u64) -> ChaCha8Rng {
        let mut h = splitmix(self.master_seed);
        for id in [scenario, mode, replicate, step] {
            h = splitmix(h ^ splitmix(id));
        }
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_mut(8).enumerate() {
            h = splitmix(h.wrapping_add(i as u64));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Stable numeric id for a named scenario.
pub fn scenario_id(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Symmetric α-stable draw with characteristic function `e^{-σ^α |h|^α}`
/// (Chambers-Mallows-Stuck).
pub fn sample_sym_stable<R: Rng + ?Sized>(alpha: f64, sigma: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha <= 2.0 && sigma >= 0.0);
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let x = if alpha == 1.0 {
        v.tan()
    } else {
        (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
    };
    sigma * x
}

/// Scale of `∫₀ᵗ e^{-γ(t-s)} dZ_s` for a unit symmetric α-stable `Z`.
pub fn ou_stable_scale(alpha: f64, gamma: f64, t: f64) -> f64 {
    if gamma == 0.0 {
        t.powf(1.0 / alpha)
    } else if t.is_infinite() {
        (1.0 / (alpha * gamma)).powf(1.0 / alpha)
    } else {
        (-(-alpha * gamma * t).exp_m1() / (alpha * gamma)).powf(1.0 / alpha)
    }
}

/// One exact draw of `∫₀ᵗ e^{-γ(t-s)} dZ_s` for a unit symmetric α-stable `Z`.
pub fn sample_ou_stable_convolution<R: Rng + ?Sized>(alpha: f64, gamma: f64, t: f64, rng: &mut R) -> f64 {
    sample_sym_stable(alpha, ou_stable_scale(alpha, gamma, t), rng)
}

/// Positive stable draw with Laplace transform `e^{-r^a}`, `a ∈ (0, 1)` (Kanter).
fn sample_positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let num = (a * u).sin().powf(a / (1.0 - a)) * ((1.0 - a) * u).sin();
    let den = u.sin().powf(1.0 / (1.0 - a));
    (num / den / e).powf((1.0 - a) / a)
}

/// Increment over time `dt` of the subordinator with Laplace exponent `f`.
pub fn sample_subordinator<R: Rng + ?Sized>(f: &BernsteinSpec, dt: f64, rng: &mut R) -> Result<f64> {
    if dt == 0.0 {
        return Ok(0.0);
    }
    Ok(match f.kind() {
        BernsteinKind::Stable { a, c } => {
            if *a == 1.0 {
                c * dt
            } else {
                (c * dt).powf(1.0 / a) * sample_positive_stable(*a, rng)
            }
        }
        BernsteinKind::Relativistic { a, m } => {
            // tempered stable: accept a stable draw with probability e^{-λS}
            let lambda = m.powf(1.0 / a);
            let pieces = (dt * m).ceil().max(1.0) as usize;
            let h = dt / pieces as f64;
            let scale = h.powf(1.0 / a);
            let mut total = 0.0;
            for _ in 0..pieces {
                loop {
                    let s = scale * sample_positive_stable(*a, rng);
                    if rng.random::<f64>() <= (-lambda * s).exp() {
                        total += s;
                        break;
                    }
                }
            }
            total
        }
        BernsteinKind::Log { b } => Gamma::new(dt, 1.0 / b)
            .map_err(|e| Error::InvalidInput(format!("gamma increment: {e}")))?
            .sample(rng),
        BernsteinKind::Scaled { inner, lambda } => lambda * sample_subordinator(inner, dt, rng)?,
        BernsteinKind::TimeScaled { inner, kappa } => sample_subordinator(inner, kappa * dt, rng)?,
        BernsteinKind::Sum { terms } => {
            let mut total = 0.0;
            for t in terms {
                total += sample_subordinator(t, dt, rng)?;
            }
            total
        }
    })
}

/// Midpoint-rule draw of `∫₀ᵗ e^{-γ(t-s)} dW_{S_s}` with `W` of variance `2s`.
pub fn sample_convolution_generic<R: Rng + ?Sized>(
    f: &BernsteinSpec,
    gamma: f64,
    t: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_steps == 0 || !(t >= 0.0) {
        return Err(Error::InvalidInput("need n_steps > 0 and t ≥ 0".into()));
    }
    let h = t / n_steps as f64;
    let mut acc = 0.0;
    for i in 0..n_steps {
        let mid = (i as f64 + 0.5) * h;
        let ds = sample_subordinator(f, h, rng)?;
        let z: f64 = StandardNormal.sample(rng);
        acc += (-gamma * (t - mid)).exp() * (2.0 * ds).sqrt() * z;
    }
    Ok(acc)
}

/// Per-mode transition law used by the field sampler.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeLaw {
    /// Symmetric α-stable noise with `ψ(h) = scale^α |h|^α`.
    Stable { gamma: f64, alpha: f64, scale: f64 },
    /// Subordinate Brownian noise integrated with `n_steps` midpoints.
    Subordinate { gamma: f64, f: BernsteinSpec, n_steps: usize },
}

impl ModeLaw {
    pub fn gamma(&self) -> f64 {
        match self {
            ModeLaw::Stable { gamma, .. } | ModeLaw::Subordinate { gamma, .. } => *gamma,
        }
    }

    fn noise_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        match self {
            ModeLaw::Stable { gamma, alpha, scale } => Ok(scale * sample_ou_stable_convolution(*alpha, *gamma, dt, rng)),
            ModeLaw::Subordinate { gamma, f, n_steps } => sample_convolution_generic(f, *gamma, dt, *n_steps, rng),
        }
    }
}

/// Truncated field state at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldSample {
    pub t: f64,
    pub coefficients: Vec<f64>,
    pub truncation_n: usize,
    /// Bound on `E‖discarded modes‖^{α_m}`.
    pub tail_norm_bound: f64,
}

impl FieldSample {
    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// First `N` modes of a spectrum with their samplers.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldModel {
    pub laws: Vec<ModeLaw>,
    pub tail_norm_bound: f64,
    pub scenario: u64,
}

/// Midpoints used for subordinate modes without a stable law.
pub const GENERIC_STEPS: usize = 256;

impl FieldModel {
    pub fn new(spectrum: &SpectrumSpec, truncation_n: usize, scenario: u64) -> Result<Self> {
        let laws = spectrum
            .modes(truncation_n)?
            .into_iter()
            .map(|m| {
                if let Some((alpha, k)) = m.noise.stable_params() {
                    return Ok(ModeLaw::Stable {
                        gamma: m.gamma,
                        alpha,
                        scale: (k * stable_symbol_constant(alpha)).powf(1.0 / alpha),
                    });
                }
                match &m.noise {
                    ModeNoise::Subordinate(f) => Ok(ModeLaw::Subordinate {
                        gamma: m.gamma,
                        f: f.clone(),
                        n_steps: GENERIC_STEPS,
                    }),
                    ModeNoise::Levy(_) => Err(Error::Unsupported(format!(
                        "mode {} has no samplable law (only stable and subordinate noises are simulated)",
                        m.index
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            laws,
            tail_norm_bound: 0.0,
            scenario,
        })
    }

    pub fn with_tail_bound(mut self, bound: f64) -> Self {
        self.tail_norm_bound = bound;
        self
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    /// Deterministic state at time 0, padded or cut to the truncation.
    pub fn initial(&self, x0: &[f64]) -> FieldSample {
        let coefficients = (0..self.len()).map(|i| x0.get(i).copied().unwrap_or(0.0)).collect();
        FieldSample {
            t: 0.0,
            coefficients,
            truncation_n: self.len(),
            tail_norm_bound: self.tail_norm_bound,
        }
    }

    /// One Markov step of length `delta`: `x_n ← e^{-γ_n Δ} x_n + noise`.
    pub fn step(&self, state: &FieldSample, delta: f64, rng: &RngStreamSpec, replicate: u64, step: u64) -> Result<FieldSample> {
        if state.coefficients.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "state has {} modes, model has {}",
                state.coefficients.len(),
                self.len()
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("step must be positive, got {delta}")));
        }
        let coefficients = self
            .laws
            .iter()
            .zip(&state.coefficients)
            .enumerate()
            .map(|(i, (law, x))| {
                let mut r = rng.stream_at(self.scenario, i as u64 + 1, replicate, step);
                Ok((-law.gamma() * delta).exp() * x + law.noise_increment(delta, &mut r)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldSample {
            t: state.t + delta,
            coefficients,
            truncation_n: self.len(),
            tail_norm_bound: self.tail_norm_bound,
        })
    }

    /// Draw of the field at time `t` started from `x0`, in a single exact step.
    pub fn sample_at(&self, x0: &[f64], t: f64, rng: &RngStreamSpec, replicate: u64) -> Result<FieldSample> {
        self.step(&self.initial(x0), t, rng, replicate, 0)
    }

    /// `replicates` independent draws at time `t`, in replicate order.
    pub fn sample_many(&self, x0: &[f64], t: f64, rng: &RngStreamSpec, replicates: usize) -> Result<Vec<FieldSample>> {
        (0..replicates)
            .into_par_iter()
            .map(|j| self.sample_at(x0, t, rng, j as u64))
            .collect()
    }
}

/// `E‖Y‖^{α_m}` bound `S₂^{α_m/2} + S_α` over modes beyond `n` and over all modes.
fn tail_from_reports(s2: &CriterionReport, sa: &CriterionReport, n: usize, alpha_m: f64) -> Result<(f64, f64)> {
    let total = |r: &CriterionReport| {
        r.value
            .ok_or_else(|| Error::Divergent(format!("criterion {} is {:?}", r.criterion, r.verdict)))
    };
    let (t2, ta) = (total(s2)?, total(sa)?);
    let head = |r: &CriterionReport| if n == 0 { 0.0 } else { r.partial_sums.get(n - 1).copied().unwrap_or(r.last_partial_sum()) };
    let tail = (t2 - head(s2)).max(0.0).powf(0.5 * alpha_m) + (ta - head(sa)).max(0.0);
    Ok((tail, t2.powf(0.5 * alpha_m) + ta))
}

/// Analytic bound on the `α_m`-moment of the modes beyond `n`.
pub fn truncation_tail_bound(spectrum: &SpectrumSpec, n: usize, alpha_m: f64, opts: &CriterionOptions) -> Result<f64> {
    let (s2, sa) = ergodicity_criterion(spectrum, alpha_m, opts)?;
    Ok(tail_from_reports(&s2, &sa, n, alpha_m)?.0)
}

/// Smallest truncation whose tail bound is below `rel` times the full moment
/// bound, capped at `n_cap`. Returns `(N, tail bound)`.
pub fn choose_truncation(
    spectrum: &SpectrumSpec,
    alpha_m: f64,
    rel: f64,
    n_cap: usize,
    opts: &CriterionOptions,
) -> Result<(usize, f64)> {
    if let Some(len) = spectrum.len() {
        if len <= n_cap {
            return Ok((len, 0.0));
        }
    }
    let (s2, sa) = ergodicity_criterion(spectrum, alpha_m, opts)?;
    let mut best = (n_cap, tail_from_reports(&s2, &sa, n_cap, alpha_m)?.0);
    for n in 1..=n_cap.min(s2.partial_sums.len()) {
        let (tail, full) = tail_from_reports(&s2, &sa, n, alpha_m)?;
        if tail < rel * full {
            best = (n, tail);
            break;
        }
    }
    Ok(best)
}

/// Empirical characteristic function value with its confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CfPoint {
    pub h: f64,
    pub re: f64,
    pub im: f64,
    pub half_width: f64,
}

/// `(1/M) Σ e^{i h X_j}` for each `h`, with half-width `3/√M`.
pub fn empirical_cf(samples: &[f64], h_grid: &[f64]) -> Vec<CfPoint> {
    let m = samples.len().max(1) as f64;
    let half_width = defaults::CF_BAND / m.sqrt();
    h_grid
        .iter()
        .map(|&h| {
            let (re, im) = samples
                .par_iter()
                .map(|x| {
                    let (s, c) = (h * x).sin_cos();
                    (c, s)
                })
                .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            CfPoint {
                h,
                re: re / m,
                im: im / m,
                half_width,
            }
        })
        .collect()
}

/// Largest modulus gap between the empirical CF and `e^{-ψ(h)}`.
pub fn max_cf_deviation<F: Fn(f64) -> f64>(points: &[CfPoint], psi: F) -> f64 {
    points
        .iter()
        .map(|p| (p.re - (-psi(p.h)).exp()).hypot(p.im))
        .fold(0.0, f64::max)
}
