//! Diagonal spectra: eigenvalues `γ_n` with one independent noise per mode.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinSpec;
use crate::error::{Error, Result};
use crate::levy::{stable_symbol_constant, IntegrabilityHint, LevyKind, LevyMeasureSpec};
use crate::quadrature::{self, QuadConfig};

/// Noise driving a single mode: a symmetric pure-jump Lévy process given by its
/// measure, or a subordinate Brownian motion with symbol `f(h²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeNoise {
    Levy(LevyMeasureSpec),
    Subordinate(BernsteinSpec),
}

/// `ρ(z) = ∫₀^∞ (4πs)^{-1/2} e^{-z²/4s} μ(s) ds`, the jump density of `W_{S_t}`
/// where `W` has variance `2t`.
fn subordinate_density(f: &BernsteinSpec, z: f64) -> f64 {
    let z2 = z * z;
    let cfg = QuadConfig::with_rel_tol(1e-11);
    let g = |s: f64| (-z2 / (4.0 * s)).exp() / (4.0 * PI * s).sqrt() * f.levy_density(s);
    let head = quadrature::integrate_from_zero(g, z2, &cfg).and_then(|p| quadrature::converged(p, "mixture"));
    let tail = quadrature::integrate_to_infinity(g, z2, z2, &cfg).and_then(|p| quadrature::converged(p, "mixture"));
    match (head, tail) {
        (Ok(h), Ok(t)) => h.value + t.value,
        _ => f64::NAN,
    }
}

impl ModeNoise {
    /// The Lévy measure of the mode noise.
    pub fn levy_measure(&self) -> Result<LevyMeasureSpec> {
        match self {
            ModeNoise::Levy(nu) => Ok(nu.clone()),
            ModeNoise::Subordinate(f) => {
                if let Some((a, c)) = f.power_law() {
                    if a == 1.0 {
                        return Err(Error::Unsupported(
                            "a linear exponent gives a Brownian mode, which has no jumps".into(),
                        ));
                    }
                    return LevyMeasureSpec::stable_sym(2.0 * a, c / stable_symbol_constant(2.0 * a));
                }
                if f.drift() > 0.0 {
                    return Err(Error::Unsupported(
                        "subordinators with a drift add a Gaussian part to the mode noise".into(),
                    ));
                }
                if let crate::bernstein::BernsteinKind::Log { b } = f.kind() {
                    let root = b.sqrt();
                    return LevyMeasureSpec::custom(
                        Arc::new(move |z: f64| (-root * z.abs()).exp() / z.abs()),
                        IntegrabilityHint {
                            exponent_at_zero: 1.0,
                            exponent_at_infinity: f64::INFINITY,
                        },
                    );
                }
                let hint = IntegrabilityHint {
                    exponent_at_zero: 1.0 + 2.0 * f.small_jump_index(),
                    exponent_at_infinity: f.heavy_tail_index().map_or(f64::INFINITY, |a| 1.0 + 2.0 * a),
                };
                let f = f.clone();
                LevyMeasureSpec::custom(Arc::new(move |z: f64| subordinate_density(&f, z)), hint)
            }
        }
    }

    /// `f` with characteristic exponent `f(h²)` when the mode is a subordinate
    /// Brownian motion.
    pub fn subordinate_exponent(&self) -> Option<BernsteinSpec> {
        match self {
            ModeNoise::Subordinate(f) => Some(f.clone()),
            ModeNoise::Levy(nu) => match nu.kind() {
                LevyKind::StableSym { alpha, intensity } => {
                    BernsteinSpec::stable(0.5 * alpha, intensity * stable_symbol_constant(*alpha)).ok()
                }
                _ => None,
            },
        }
    }

    /// `f` with `ρ(z) ≥ |z|^{-1} f(z^{-2})`.
    pub fn dominating_exponent(&self) -> Option<BernsteinSpec> {
        match self {
            ModeNoise::Levy(nu) => match nu.kind() {
                LevyKind::StableSym { alpha, intensity } => BernsteinSpec::stable(0.5 * alpha, *intensity).ok(),
                LevyKind::BernsteinLower { f } => Some(f.clone()),
                LevyKind::Custom(_) => None,
            },
            ModeNoise::Subordinate(f) => {
                let (a, c) = f.power_law()?;
                if a == 1.0 {
                    return None;
                }
                BernsteinSpec::stable(a, c / stable_symbol_constant(2.0 * a)).ok()
            }
        }
    }

    /// `Some((α, K))` when the mode noise is symmetric α-stable with density `K|z|^{-1-α}`.
    pub fn stable_params(&self) -> Option<(f64, f64)> {
        match self {
            ModeNoise::Levy(nu) => nu.stable_params(),
            ModeNoise::Subordinate(f) => {
                let (a, c) = f.power_law()?;
                (a < 1.0).then(|| (2.0 * a, c / stable_symbol_constant(2.0 * a)))
            }
        }
    }
}

/// One entry of an explicit spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitMode {
    pub gamma: f64,
    #[serde(flatten)]
    pub noise: ModeNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumDoc {
    /// Modes `n ∈ ℕ^d`, `γ_n = |n|²`, noise `|n|^β Z^n` with `Z^n ~ StableSym(α, K)`.
    HeatEquation {
        d: usize,
        alpha: f64,
        beta: f64,
        intensity: f64,
    },
    Explicit { modes: Vec<ExplicitMode> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumDoc", into = "SpectrumDoc")]
pub struct SpectrumSpec {
    doc: SpectrumDoc,
}

impl TryFrom<SpectrumDoc> for SpectrumSpec {
    type Error = Error;

    fn try_from(doc: SpectrumDoc) -> Result<Self> {
        match &doc {
            SpectrumDoc::HeatEquation {
                d,
                alpha,
                beta,
                intensity,
            } => {
                if !(1..=8).contains(d) {
                    return Err(Error::InvalidSpec(format!("dimension d must lie in 1..=8, got {d}")));
                }
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::InvalidSpec(format!("alpha must lie in (0, 2), got {alpha}")));
                }
                if !beta.is_finite() {
                    return Err(Error::InvalidSpec(format!("beta must be finite, got {beta}")));
                }
                if !(*intensity > 0.0 && intensity.is_finite()) {
                    return Err(Error::InvalidSpec(format!("intensity must be positive, got {intensity}")));
                }
            }
            SpectrumDoc::Explicit { modes } => {
                for (i, m) in modes.iter().enumerate() {
                    if !(m.gamma > 0.0 && m.gamma.is_finite()) {
                        return Err(Error::InvalidSpec(format!(
                            "mode {} has eigenvalue {}, must be positive",
                            i + 1,
                            m.gamma
                        )));
                    }
                }
            }
        }
        Ok(Self { doc })
    }
}

impl From<SpectrumSpec> for SpectrumDoc {
    fn from(s: SpectrumSpec) -> Self {
        s.doc
    }
}

/// A single enumerated mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    /// 1-based position in the enumeration.
    pub index: usize,
    /// Lattice index for heat-equation spectra, `[index]` for explicit ones.
    pub multi_index: Vec<u32>,
    pub gamma: f64,
    pub noise: ModeNoise,
}

impl SpectrumSpec {
    pub fn heat_equation(d: usize, alpha: f64, beta: f64, intensity: f64) -> Result<Self> {
        SpectrumDoc::HeatEquation {
            d,
            alpha,
            beta,
            intensity,
        }
        .try_into()
    }

    pub fn explicit(modes: Vec<(f64, ModeNoise)>) -> Result<Self> {
        SpectrumDoc::Explicit {
            modes: modes.into_iter().map(|(gamma, noise)| ExplicitMode { gamma, noise }).collect(),
        }
        .try_into()
    }

    pub fn doc(&self) -> &SpectrumDoc {
        &self.doc
    }

    /// Number of modes, `None` for an infinite spectrum.
    pub fn len(&self) -> Option<usize> {
        match &self.doc {
            SpectrumDoc::HeatEquation { .. } => None,
            SpectrumDoc::Explicit { modes } => Some(modes.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Same spectrum with every mode measure multiplied by `lambda`.
    pub fn with_intensity_scaled(&self, lambda: f64) -> Result<Self> {
        match &self.doc {
            SpectrumDoc::HeatEquation {
                d,
                alpha,
                beta,
                intensity,
            } => Self::heat_equation(*d, *alpha, *beta, intensity * lambda),
            SpectrumDoc::Explicit { modes } => {
                let scaled = modes
                    .iter()
                    .map(|m| {
                        let noise = match &m.noise {
                            ModeNoise::Levy(nu) => match nu.kind() {
                                LevyKind::StableSym { alpha, intensity } => {
                                    ModeNoise::Levy(LevyMeasureSpec::stable_sym(*alpha, intensity * lambda)?)
                                }
                                LevyKind::BernsteinLower { f } => ModeNoise::Levy(LevyMeasureSpec::bernstein_lower(
                                    BernsteinSpec::time_scaled(f.clone(), lambda)?,
                                )?),
                                LevyKind::Custom(_) => {
                                    return Err(Error::Unsupported("rescaling a custom density".into()))
                                }
                            },
                            ModeNoise::Subordinate(f) => {
                                ModeNoise::Subordinate(BernsteinSpec::time_scaled(f.clone(), lambda)?)
                            }
                        };
                        Ok((m.gamma, noise))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::explicit(scaled)
            }
        }
    }

    /// The first `n` modes in enumeration order.
    pub fn modes(&self, n: usize) -> Result<Vec<Mode>> {
        match &self.doc {
            SpectrumDoc::HeatEquation {
                d,
                alpha,
                beta,
                intensity,
            } => enumerate_modes(*d, n)
                .into_iter()
                .enumerate()
                .map(|(i, (multi_index, gamma))| {
                    let g = gamma as f64;
                    // weight |n|^β enters the stable intensity as |n|^{αβ}
                    let k = intensity * g.powf(0.5 * alpha * beta);
                    Ok(Mode {
                        index: i + 1,
                        multi_index,
                        gamma: g,
                        noise: ModeNoise::Levy(LevyMeasureSpec::stable_sym(*alpha, k)?),
                    })
                })
                .collect(),
            SpectrumDoc::Explicit { modes } => Ok(modes
                .iter()
                .take(n)
                .enumerate()
                .map(|(i, m)| Mode {
                    index: i + 1,
                    multi_index: vec![i as u32 + 1],
                    gamma: m.gamma,
                    noise: m.noise.clone(),
                })
                .collect()),
        }
    }
}

fn push_lattice(d: usize, bound: u64, prefix: &mut Vec<u32>, partial: u64, out: &mut Vec<(Vec<u32>, u64)>) {
    if prefix.len() == d {
        out.push((prefix.clone(), partial));
        return;
    }
    let mut k: u64 = 1;
    while partial + k * k + (d - prefix.len() - 1) as u64 <= bound {
        prefix.push(k as u32);
        push_lattice(d, bound, prefix, partial + k * k, out);
        prefix.pop();
        k += 1;
    }
}

/// The first `n` multi-indices of `ℕ^d` ordered by `(|m|², lexicographic)`,
/// paired with `γ = |m|²`.
pub fn enumerate_modes(d: usize, n: usize) -> Vec<(Vec<u32>, u64)> {
    if n == 0 {
        return Vec::new();
    }
    // Volume estimate of the positive-orthant ball, then grow until enough points.
    let unit_ball = PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0 + 1.0);
    let radius = (n as f64 * 2f64.powi(d as i32) / unit_ball).powf(1.0 / d as f64) + d as f64;
    let mut bound = (radius * radius).ceil() as u64;
    loop {
        let mut out = Vec::new();
        push_lattice(d, bound, &mut Vec::with_capacity(d), 0, &mut out);
        if out.len() >= n {
            out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            out.truncate(n);
            return out;
        }
        bound = bound * 3 / 2 + 1;
    }
}
