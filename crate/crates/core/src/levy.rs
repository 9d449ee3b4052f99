//! One-dimensional symmetric Lévy measures: moment functionals, characteristic
//! exponents and the dominance condition by `|z|^{-1} f(z^{-2})`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bernstein::{BernsteinKind, BernsteinSpec};
use crate::error::{Error, Result};
use crate::quadrature::{self, Estimate, QuadConfig};

/// Power-law behaviour of a custom density, `ρ(z) ≈ z^{-p}`, used to validate
/// integrability before any functional is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityHint {
    /// Must be `< 3` so that `z² ρ` is integrable at the origin.
    pub exponent_at_zero: f64,
    /// Must be `> 1` so that the tail mass is finite.
    pub exponent_at_infinity: f64,
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CustomDensity {
    density: DensityFn,
    hint: IntegrabilityHint,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity").field("hint", &self.hint).finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum LevyKind {
    /// Density `K |z|^{-1-α}`.
    StableSym { alpha: f64, intensity: f64 },
    /// Density `|z|^{-1} f(z^{-2})`.
    BernsteinLower { f: BernsteinSpec },
    Custom(CustomDensity),
}

#[derive(Clone, Debug)]
pub struct LevyMeasureSpec {
    kind: LevyKind,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LevyDoc {
    StableSym { alpha: f64, intensity: f64 },
    BernsteinLower { f: BernsteinSpec },
}

impl Serialize for LevyMeasureSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.kind {
            LevyKind::StableSym { alpha, intensity } => LevyDoc::StableSym {
                alpha: *alpha,
                intensity: *intensity,
            }
            .serialize(s),
            LevyKind::BernsteinLower { f } => LevyDoc::BernsteinLower { f: f.clone() }.serialize(s),
            LevyKind::Custom(_) => Err(serde::ser::Error::custom("custom Lévy densities cannot be serialized")),
        }
    }
}

impl<'de> Deserialize<'de> for LevyMeasureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match LevyDoc::deserialize(d)? {
            LevyDoc::StableSym { alpha, intensity } => LevyMeasureSpec::stable_sym(alpha, intensity),
            LevyDoc::BernsteinLower { f } => LevyMeasureSpec::bernstein_lower(f),
        }
        .map_err(serde::de::Error::custom)
    }
}

impl PartialEq for LevyMeasureSpec {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (
                LevyKind::StableSym { alpha, intensity },
                LevyKind::StableSym {
                    alpha: a2,
                    intensity: k2,
                },
            ) => alpha == a2 && intensity == k2,
            (LevyKind::BernsteinLower { f }, LevyKind::BernsteinLower { f: g }) => f == g,
            (LevyKind::Custom(a), LevyKind::Custom(b)) => Arc::ptr_eq(&a.density, &b.density),
            _ => false,
        }
    }
}

/// `2∫₀^∞ (1 - cos v) v^{-1-α} dv`, so that `StableSym(α, K)` has symbol `K κ(α) |h|^α`.
pub fn stable_symbol_constant(alpha: f64) -> f64 {
    let x = 0.5 * PI * (1.0 - alpha);
    let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
    PI * gamma(2.0 - alpha) * sinc / alpha
}

/// True when `f(r)/r` has a positive limit, i.e. `f` carries a linear drift.
fn has_drift(f: &BernsteinSpec) -> bool {
    match f.kind() {
        BernsteinKind::Stable { a, .. } => *a == 1.0,
        BernsteinKind::Relativistic { .. } | BernsteinKind::Log { .. } => false,
        BernsteinKind::Scaled { inner, .. } | BernsteinKind::TimeScaled { inner, .. } => has_drift(inner),
        BernsteinKind::Sum { terms } => terms.iter().any(has_drift),
    }
}

/// A moment functional that may legitimately be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Moment {
    Finite { value: f64 },
    Divergent,
}

impl Moment {
    pub fn value_or_inf(&self) -> f64 {
        match self {
            Moment::Finite { value } => *value,
            Moment::Divergent => f64::INFINITY,
        }
    }
}

fn quad_cfg() -> QuadConfig {
    QuadConfig::with_rel_tol(1e-11)
}

impl LevyMeasureSpec {
    pub fn stable_sym(alpha: f64, intensity: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidSpec(format!("stable index must lie in (0, 2), got {alpha}")));
        }
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::InvalidSpec(format!("intensity must be positive, got {intensity}")));
        }
        Ok(Self {
            kind: LevyKind::StableSym { alpha, intensity },
        })
    }

    pub fn bernstein_lower(f: BernsteinSpec) -> Result<Self> {
        if has_drift(&f) {
            return Err(Error::InvalidSpec(
                "a Bernstein function with linear growth gives a density |z|^-3 near 0, which is not a Lévy measure"
                    .into(),
            ));
        }
        Ok(Self {
            kind: LevyKind::BernsteinLower { f },
        })
    }

    /// Validates evenness, positivity and `∫ (1 ∧ z²) ρ < ∞` numerically.
    pub fn custom(density: DensityFn, hint: IntegrabilityHint) -> Result<Self> {
        if !(hint.exponent_at_zero < 3.0) {
            return Err(Error::InvalidSpec(format!(
                "exponent at zero {} makes z²ρ non-integrable",
                hint.exponent_at_zero
            )));
        }
        if !(hint.exponent_at_infinity > 1.0) {
            return Err(Error::InvalidSpec(format!(
                "exponent at infinity {} gives infinite tail mass",
                hint.exponent_at_infinity
            )));
        }
        for &z in &crate::bernstein::geometric_grid(1e-6, 1e6, 49) {
            let (p, m) = (density(z), density(-z));
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidSpec(format!("density must be finite and nonnegative, ρ({z:e}) = {p}")));
            }
            if (p - m).abs() > 1e-12 * p.abs().max(m.abs()) {
                return Err(Error::InvalidSpec(format!("density is not even at z = {z:e}")));
            }
        }
        let spec = Self {
            kind: LevyKind::Custom(CustomDensity { density, hint }),
        };
        spec.truncated_second_moment(1.0)
            .map_err(|e| Error::InvalidSpec(format!("∫ z² ρ near 0 not finite: {e}")))?;
        match spec.tail_mass_moment(1.0, 0.0)? {
            Moment::Finite { .. } => Ok(spec),
            Moment::Divergent => Err(Error::InvalidSpec("tail mass is infinite".into())),
        }
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    /// `Some((α, K))` when the density is exactly `K |z|^{-1-α}`.
    pub fn stable_params(&self) -> Option<(f64, f64)> {
        match &self.kind {
            LevyKind::StableSym { alpha, intensity } => Some((*alpha, *intensity)),
            LevyKind::BernsteinLower { f } => f.power_law().map(|(a, c)| (2.0 * a, c)),
            LevyKind::Custom(_) => None,
        }
    }

    /// Image under `z ↦ w·z`, the law of `w·Z` for a driver `Z` with this measure.
    pub fn weighted(&self, w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInput(format!("mode weight must be positive, got {w}")));
        }
        if w == 1.0 {
            return Ok(self.clone());
        }
        match &self.kind {
            LevyKind::StableSym { alpha, intensity } => Self::stable_sym(*alpha, intensity * w.powf(*alpha)),
            LevyKind::BernsteinLower { f } => {
                // ρ(z/w)/w = |z|^{-1} f(w² z^{-2})
                Self::bernstein_lower(BernsteinSpec::scaled(f.clone(), w * w)?)
            }
            LevyKind::Custom(c) => {
                let inner = c.density.clone();
                let density: DensityFn = Arc::new(move |z| inner(z / w) / w);
                Ok(Self {
                    kind: LevyKind::Custom(CustomDensity { density, hint: c.hint }),
                })
            }
        }
    }

    /// `ρ(z)` for `z ≠ 0`.
    pub fn density(&self, z: f64) -> f64 {
        let z = z.abs();
        match &self.kind {
            LevyKind::StableSym { alpha, intensity } => intensity * z.powf(-1.0 - alpha),
            LevyKind::BernsteinLower { f } => f.eval(z.powi(-2)) / z,
            LevyKind::Custom(c) => (c.density)(z),
        }
    }

    /// `∫_{|z| ≤ R} z² ν(dz)`.
    pub fn truncated_second_moment(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        if let Some((alpha, k)) = self.stable_params() {
            return Ok(2.0 * k * r.powf(2.0 - alpha) / (2.0 - alpha));
        }
        let est = quadrature::converged(
            quadrature::integrate_from_zero(|z| z * z * self.density(z), r, &quad_cfg())?,
            "truncated second moment",
        )?;
        Ok(2.0 * est.value)
    }

    /// `ν(|z| > R)`.
    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        match self.tail_mass_moment(r, 0.0)? {
            Moment::Finite { value } => Ok(value),
            Moment::Divergent => Err(Error::Divergent("tail mass of the Lévy measure".into())),
        }
    }

    /// `∫_{|z| > R} |z|^{α_m} ν(dz)` for `α_m ∈ (0, 1]`.
    pub fn tail_alpha_moment(&self, r: f64, alpha_m: f64) -> Result<Moment> {
        if !(alpha_m > 0.0 && alpha_m <= 1.0) {
            return Err(Error::InvalidInput(format!("moment order must lie in (0, 1], got {alpha_m}")));
        }
        self.tail_mass_moment(r, alpha_m)
    }

    fn tail_mass_moment(&self, r: f64, p: f64) -> Result<Moment> {
        check_radius(r)?;
        if let Some((alpha, k)) = self.stable_params() {
            return Ok(if p >= alpha {
                Moment::Divergent
            } else {
                Moment::Finite {
                    value: 2.0 * k * r.powf(p - alpha) / (alpha - p),
                }
            });
        }
        if let LevyKind::Custom(c) = &self.kind {
            if p >= c.hint.exponent_at_infinity - 1.0 {
                return Ok(Moment::Divergent);
            }
        }
        let g = |z: f64| if p == 0.0 { self.density(z) } else { z.powf(p) * self.density(z) };
        Ok(match quadrature::integrate_to_infinity(g, r, r, &quad_cfg())? {
            quadrature::PanelSum::Converged(e) => Moment::Finite { value: 2.0 * e.value },
            quadrature::PanelSum::Divergent { .. } => Moment::Divergent,
        })
    }

    /// `∫ (1 ∧ z²) ν(dz)`.
    pub fn unit_moment(&self) -> Result<f64> {
        Ok(self.truncated_second_moment(1.0)? + self.tail_mass(1.0)?)
    }

    pub fn symbol(&self) -> SymbolEvaluator {
        SymbolEvaluator {
            measure: self.clone(),
            cfg: QuadConfig::with_rel_tol(1e-10),
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("radius must be positive and finite, got {r}")))
    }
}

/// Characteristic exponent `ψ(h) = ∫ (1 - cos hz) ν(dz)` of a symmetric measure.
#[derive(Clone, Debug)]
pub struct SymbolEvaluator {
    pub measure: LevyMeasureSpec,
    pub cfg: QuadConfig,
}

impl SymbolEvaluator {
    pub fn psi(&self, h: f64) -> Result<f64> {
        let h = h.abs();
        if h == 0.0 {
            return Ok(0.0);
        }
        if let Some((alpha, k)) = self.measure.stable_params() {
            return Ok(k * stable_symbol_constant(alpha) * h.powf(alpha));
        }
        self.psi_quadrature(h).map(|e| e.value)
    }

    /// `(2/|h|) ∫₀^∞ (1 - cos v) ρ(v/|h|) dv` by half-period summation.
    pub fn psi_quadrature(&self, h: f64) -> Result<Estimate> {
        let h = h.abs();
        if h == 0.0 {
            return Ok(Estimate::ZERO);
        }
        let est = quadrature::one_minus_cos_integral(|v| self.measure.density(v / h) / h, &self.cfg)?;
        Ok(Estimate {
            value: 2.0 * est.value,
            abs_err: 2.0 * est.abs_err,
        })
    }

    /// `∫₀ᵗ ψ(e^{-γs} h) ds`, the exponent of `∫₀ᵗ e^{-γ(t-s)} dZ_s` at frequency `h`.
    pub fn ou_symbol(&self, gamma: f64, t: f64, h: f64) -> Result<f64> {
        if !(t > 0.0) || !(gamma >= 0.0) {
            return Err(Error::InvalidInput(format!("need t > 0 and gamma ≥ 0, got t = {t}, gamma = {gamma}")));
        }
        if h == 0.0 {
            return Ok(0.0);
        }
        if gamma == 0.0 {
            return Ok(t * self.psi(h)?);
        }
        if let Some((alpha, k)) = self.measure.stable_params() {
            let time = -(-alpha * gamma * t).exp_m1() / (alpha * gamma);
            return Ok(k * stable_symbol_constant(alpha) * h.abs().powf(alpha) * time);
        }
        self.ou_symbol_quadrature(gamma, t, h)
    }

    pub fn ou_symbol_quadrature(&self, gamma: f64, t: f64, h: f64) -> Result<f64> {
        let mut err = None;
        let est = quadrature::integrate(
            |s| match self.psi_quadrature((-gamma * s).exp() * h) {
                Ok(e) => e.value,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            0.0,
            t,
            &QuadConfig::with_rel_tol(1e-9),
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(est.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    pub pass: bool,
    /// `min (ρ(z) - z^{-1} f(z^{-2})) / (z^{-1} f(z^{-2}))` over the grid.
    pub worst_relative_margin: f64,
    pub worst_absolute_margin: f64,
    pub worst_location: f64,
}

/// Checks `ρ_ν(z) ≥ z^{-1} f(z^{-2})` on `z_grid`.
pub fn dominance_check(nu: &LevyMeasureSpec, f: &BernsteinSpec, z_grid: &[f64]) -> Result<DominanceReport> {
    if z_grid.is_empty() || z_grid.iter().any(|z| !(*z > 0.0)) {
        return Err(Error::InvalidInput("dominance grid must be nonempty and positive".into()));
    }
    let mut worst = (f64::INFINITY, f64::INFINITY, z_grid[0]);
    for &z in z_grid {
        let lower = f.eval(z.powi(-2)) / z;
        let abs = nu.density(z) - lower;
        let rel = if lower > 0.0 { abs / lower } else { f64::INFINITY };
        if rel < worst.0 || (rel == worst.0 && abs < worst.1) {
            worst = (rel, abs, z);
        }
    }
    Ok(DominanceReport {
        pass: worst.0 >= -1e-12,
        worst_relative_margin: worst.0,
        worst_absolute_margin: worst.1,
        worst_location: worst.2,
    })
}

/// `φ¹(h²) = 2∫₀ᵗ ∫₀^∞ (1 - cos u) u^{-1} f(e^{-2γs} u^{-2} h²) du ds` by nested quadrature.
pub fn split_exponent_phi1(f: &BernsteinSpec, gamma: f64, t: f64, h: f64) -> Result<f64> {
    if !(t > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("need t > 0 and gamma > 0, got t = {t}, gamma = {gamma}")));
    }
    let h2 = h * h;
    if h2 == 0.0 {
        return Ok(0.0);
    }
    let inner_cfg = QuadConfig::with_rel_tol(1e-10);
    let mut err = None;
    let outer = quadrature::integrate(
        |s| {
            let scale = (-2.0 * gamma * s).exp() * h2;
            match quadrature::one_minus_cos_integral(|u| f.eval(scale / (u * u)) / u, &inner_cfg) {
                Ok(e) => 2.0 * e.value,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        t,
        &QuadConfig::with_rel_tol(1e-9),
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(outer.value),
    }
}

/// `(cos 1)/2 · min(t f(e^{-2γt} h²), (1 - e^{-γt})/(2γ) · f(e^{-γt} h²))`.
pub fn phi1_lower_bound(f: &BernsteinSpec, gamma: f64, t: f64, h: f64) -> f64 {
    let h2 = h * h;
    let first = t * f.eval((-2.0 * gamma * t).exp() * h2);
    let second = -(-gamma * t).exp_m1() / (2.0 * gamma) * f.eval((-gamma * t).exp() * h2);
    0.5 * 1f64.cos() * first.min(second)
}
