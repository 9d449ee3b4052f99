//! Bernstein functions, the integrated exponent `F_t(r) = ∫₀ᵗ f(e^{-2γs} r) ds`
//! and the decay integrals `∫₀^∞ e^{-E(r)} dr` built from them.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::defaults;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadConfig};

/// Variants of the Bernstein catalogue. Nested specs are validated when the
/// enclosing [`BernsteinSpec`] is built, so holding a `BernsteinKind` never
/// bypasses validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BernsteinKind {
    /// `c·r^a`
    Stable { a: f64, c: f64 },
    /// `(r + m^{1/a})^a - m`
    Relativistic { a: f64, m: f64 },
    /// `log(1 + r/b)`
    Log { b: f64 },
    /// `inner(λ·r)`
    Scaled {
        inner: Box<BernsteinSpec>,
        lambda: f64,
    },
    Sum { terms: Vec<BernsteinSpec> },
    /// `κ·inner(r)`
    TimeScaled {
        inner: Box<BernsteinSpec>,
        kappa: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BernsteinKind", into = "BernsteinKind")]
pub struct BernsteinSpec {
    kind: BernsteinKind,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
    }
}

impl TryFrom<BernsteinKind> for BernsteinSpec {
    type Error = Error;

    fn try_from(kind: BernsteinKind) -> Result<Self> {
        match &kind {
            BernsteinKind::Stable { a, c } => {
                if !(*a > 0.0 && *a <= 1.0) {
                    return Err(Error::InvalidSpec(format!("stable exponent a must lie in (0, 1], got {a}")));
                }
                positive("stable scale c", *c)?;
            }
            BernsteinKind::Relativistic { a, m } => {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "relativistic exponent a must lie in (0, 1), got {a}"
                    )));
                }
                positive("relativistic mass m", *m)?;
            }
            BernsteinKind::Log { b } => positive("log parameter b", *b)?,
            BernsteinKind::Scaled { lambda, .. } => positive("scaling lambda", *lambda)?,
            BernsteinKind::TimeScaled { kappa, .. } => positive("time scaling kappa", *kappa)?,
            BernsteinKind::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidSpec("sum needs at least one term".into()));
                }
            }
        }
        Ok(Self { kind })
    }
}

impl From<BernsteinSpec> for BernsteinKind {
    fn from(spec: BernsteinSpec) -> Self {
        spec.kind
    }
}

impl BernsteinSpec {
    pub fn stable(a: f64, c: f64) -> Result<Self> {
        BernsteinKind::Stable { a, c }.try_into()
    }

    pub fn relativistic(a: f64, m: f64) -> Result<Self> {
        BernsteinKind::Relativistic { a, m }.try_into()
    }

    pub fn log(b: f64) -> Result<Self> {
        BernsteinKind::Log { b }.try_into()
    }

    pub fn scaled(inner: BernsteinSpec, lambda: f64) -> Result<Self> {
        BernsteinKind::Scaled {
            inner: Box::new(inner),
            lambda,
        }
        .try_into()
    }

    pub fn sum(terms: Vec<BernsteinSpec>) -> Result<Self> {
        BernsteinKind::Sum { terms }.try_into()
    }

    pub fn time_scaled(inner: BernsteinSpec, kappa: f64) -> Result<Self> {
        BernsteinKind::TimeScaled {
            inner: Box::new(inner),
            kappa,
        }
        .try_into()
    }

    pub fn kind(&self) -> &BernsteinKind {
        &self.kind
    }

    /// `f(r)` for `r ≥ 0`.
    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0, "Bernstein functions are evaluated on [0, ∞)");
        let r = r.max(0.0);
        match &self.kind {
            BernsteinKind::Stable { a, c } => {
                if r == 0.0 {
                    0.0
                } else {
                    c * r.powf(*a)
                }
            }
            BernsteinKind::Relativistic { a, m } => {
                let s = m.powf(1.0 / a);
                m * (a * (r / s).ln_1p()).exp_m1()
            }
            BernsteinKind::Log { b } => (r / b).ln_1p(),
            BernsteinKind::Scaled { inner, lambda } => inner.eval(lambda * r),
            BernsteinKind::Sum { terms } => terms.iter().map(|t| t.eval(r)).sum(),
            BernsteinKind::TimeScaled { inner, kappa } => kappa * inner.eval(r),
        }
    }

    /// `Some((a, c))` when `f(r) = c·r^a` exactly.
    pub fn power_law(&self) -> Option<(f64, f64)> {
        match &self.kind {
            BernsteinKind::Stable { a, c } => Some((*a, *c)),
            BernsteinKind::Scaled { inner, lambda } => inner.power_law().map(|(a, c)| (a, c * lambda.powf(a))),
            BernsteinKind::TimeScaled { inner, kappa } => inner.power_law().map(|(a, c)| (a, c * kappa)),
            BernsteinKind::Sum { terms } => {
                let mut parts = terms.iter().map(|t| t.power_law());
                let (a, mut c) = parts.next()??;
                for p in parts {
                    let (a2, c2) = p?;
                    if a2 != a {
                        return None;
                    }
                    c += c2;
                }
                Some((a, c))
            }
            BernsteinKind::Relativistic { .. } | BernsteinKind::Log { .. } => None,
        }
    }

    /// Linear coefficient `lim f(r)/r` of the subordinator.
    pub fn drift(&self) -> f64 {
        match &self.kind {
            BernsteinKind::Stable { a, c } => {
                if *a == 1.0 {
                    *c
                } else {
                    0.0
                }
            }
            BernsteinKind::Relativistic { .. } | BernsteinKind::Log { .. } => 0.0,
            BernsteinKind::Scaled { inner, lambda } => lambda * inner.drift(),
            BernsteinKind::TimeScaled { inner, kappa } => kappa * inner.drift(),
            BernsteinKind::Sum { terms } => terms.iter().map(|t| t.drift()).sum(),
        }
    }

    /// Density of the subordinator's Lévy measure at `s > 0`, so that
    /// `f(r) = drift·r + ∫ (1 - e^{-rs}) μ(s) ds`.
    pub fn levy_density(&self, s: f64) -> f64 {
        match &self.kind {
            BernsteinKind::Stable { a, c } => {
                if *a == 1.0 {
                    0.0
                } else {
                    c * a / gamma(1.0 - a) * s.powf(-1.0 - a)
                }
            }
            BernsteinKind::Relativistic { a, m } => {
                a / gamma(1.0 - a) * s.powf(-1.0 - a) * (-m.powf(1.0 / a) * s).exp()
            }
            BernsteinKind::Log { b } => (-b * s).exp() / s,
            BernsteinKind::Scaled { inner, lambda } => inner.levy_density(s / lambda) / lambda,
            BernsteinKind::TimeScaled { inner, kappa } => kappa * inner.levy_density(s),
            BernsteinKind::Sum { terms } => terms.iter().map(|t| t.levy_density(s)).sum(),
        }
    }

    /// Largest power `p` with `μ(s) ≈ s^{-1-p}` near zero (0 for the log case).
    pub fn small_jump_index(&self) -> f64 {
        match &self.kind {
            BernsteinKind::Stable { a, .. } | BernsteinKind::Relativistic { a, .. } => *a,
            BernsteinKind::Log { .. } => 0.0,
            BernsteinKind::Scaled { inner, .. } | BernsteinKind::TimeScaled { inner, .. } => inner.small_jump_index(),
            BernsteinKind::Sum { terms } => terms.iter().map(|t| t.small_jump_index()).fold(0.0, f64::max),
        }
    }

    /// Smallest `a` among stable components, whose jumps have power tails; `None`
    /// when every component has exponentially light large jumps.
    pub fn heavy_tail_index(&self) -> Option<f64> {
        match &self.kind {
            BernsteinKind::Stable { a, .. } => (*a < 1.0).then_some(*a),
            BernsteinKind::Relativistic { .. } | BernsteinKind::Log { .. } => None,
            BernsteinKind::Scaled { inner, .. } | BernsteinKind::TimeScaled { inner, .. } => inner.heavy_tail_index(),
            BernsteinKind::Sum { terms } => terms.iter().filter_map(|t| t.heavy_tail_index()).reduce(f64::min),
        }
    }
}

/// `F_t(r) = ∫₀ᵗ f(e^{-2γs} r) ds`. `t = ∞` is allowed when `γ > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedExponent {
    pub f: BernsteinSpec,
    pub gamma: f64,
    pub t: f64,
}

impl IntegratedExponent {
    pub fn new(f: BernsteinSpec, gamma: f64, t: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be nonnegative, got {gamma}")));
        }
        if !(t > 0.0) || (t.is_infinite() && gamma == 0.0) || t.is_nan() {
            return Err(Error::InvalidInput(format!(
                "time must be positive (and finite when gamma = 0), got t = {t}"
            )));
        }
        Ok(Self { f, gamma, t })
    }

    /// `∫₀ᵗ e^{-2aγs} ds`, the time factor of the power-law closed form.
    fn power_time_factor(&self, a: f64) -> f64 {
        if self.gamma == 0.0 {
            self.t
        } else {
            let k = 2.0 * a * self.gamma;
            -(-k * self.t).exp_m1() / k
        }
    }

    /// `Some((a, c_t))` with `F_t(r) = c_t·r^a` when `f` is a power law.
    pub fn power_law(&self) -> Option<(f64, f64)> {
        self.f.power_law().map(|(a, c)| (a, c * self.power_time_factor(a)))
    }

    /// Closed form when available, quadrature otherwise.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        if self.gamma == 0.0 {
            return Ok(self.t * self.f.eval(r));
        }
        if let Some((a, c)) = self.power_law() {
            return Ok(c * r.powf(a));
        }
        self.eval_quadrature(r)
    }

    /// Quadrature path, also used to cross-check the closed forms. With
    /// `v = 2γs` the integral becomes `(2γ)^{-1} ∫₀^{2γt} f(e^{-v} r) dv`.
    pub fn eval_quadrature(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        if self.gamma == 0.0 {
            return Ok(self.t * self.f.eval(r));
        }
        let cfg = QuadConfig::default();
        let g = |v: f64| self.f.eval((-v).exp() * r);
        let two_gamma = 2.0 * self.gamma;
        let upper = two_gamma * self.t;
        let est = if upper.is_finite() && upper <= 745.0 {
            quadrature::integrate(g, 0.0, upper, &cfg)?
        } else {
            let head = quadrature::integrate(g, 0.0, 1.0, &cfg)?;
            let tail = quadrature::converged(quadrature::integrate_to_infinity(g, 1.0, 1.0, &cfg)?, "integrated exponent")?;
            quadrature::Estimate {
                value: head.value + tail.value,
                abs_err: head.abs_err + tail.abs_err,
            }
        };
        Ok(est.value / two_gamma)
    }
}

/// Outcome of `∫₀^∞ e^{-E(r)} dr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DecayIntegral {
    /// `value` includes the conservative tail bound beyond `cutoff`.
    Finite {
        value: f64,
        abs_err: f64,
        tail_bound: f64,
        cutoff: f64,
    },
    /// `E` grows no faster than `log(1 + r)` up to the probe limit.
    Divergent { probe: f64, growth_ratio: f64 },
    /// Growth is super-logarithmic but too slow to control the tail by `R_max`.
    Inconclusive { probe: f64, growth_ratio: f64 },
}

impl DecayIntegral {
    /// The value, with `+∞` for anything that is not certified finite.
    pub fn value_or_inf(&self) -> f64 {
        match self {
            DecayIntegral::Finite { value, .. } => *value,
            _ => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, DecayIntegral::Finite { .. })
    }

    /// `∫₀^∞ e^{-c r^a} dr = Γ(1 + 1/a) c^{-1/a}`.
    pub fn power_law(a: f64, c: f64) -> DecayIntegral {
        DecayIntegral::Finite {
            value: gamma(1.0 + 1.0 / a) * c.powf(-1.0 / a),
            abs_err: 0.0,
            tail_bound: 0.0,
            cutoff: f64::INFINITY,
        }
    }
}

/// `∫₀^∞ e^{-E(r)} dr` for nondecreasing `E` with `E(0) = 0`.
///
/// `tol` is the tail cutoff relative to a lower bound of the integral.
pub fn exp_decay_integral<E>(mut e: E, tol: f64) -> Result<DecayIntegral>
where
    E: FnMut(f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let e0 = e(0.0)?;
    if e0.abs() > 1e-12 {
        return Err(Error::ContractViolation(format!("decay exponent must vanish at 0, got {e0}")));
    }

    // Scale: first dyadic probe with E ≥ 1.
    let mut prev_val = 0.0;
    let mut r1 = f64::NAN;
    let mut r = 2f64.powi(-60);
    while r < defaults::DECAY_R_MAX {
        let v = e(r)?;
        if v + 1e-12 * v.abs().max(1.0) < prev_val {
            return Err(Error::ContractViolation(format!(
                "decay exponent decreases near r = {r:e} ({v} < {prev_val})"
            )));
        }
        prev_val = v;
        if v >= 1.0 {
            r1 = r;
            break;
        }
        r *= 2.0;
    }
    if r1.is_nan() {
        return Ok(DecayIntegral::Divergent {
            probe: r,
            growth_ratio: prev_val / r.ln_1p(),
        });
    }

    // Cutoff: e^{-E(R)}·R small relative to the guaranteed mass r1/e.
    let floor = r1 * (-1.0f64).exp();
    let target = tol / 10.0 * floor;
    let mut cutoff = r1;
    let mut e_cut = e(cutoff)?;
    while (-e_cut).exp() * cutoff >= target {
        let next = cutoff * 2.0;
        if next >= defaults::DECAY_R_MAX {
            let growth_ratio = e_cut / cutoff.ln_1p();
            return Ok(if growth_ratio <= 1.0 + 1e-9 {
                DecayIntegral::Divergent {
                    probe: cutoff,
                    growth_ratio,
                }
            } else {
                DecayIntegral::Inconclusive {
                    probe: cutoff,
                    growth_ratio,
                }
            });
        }
        let v = e(next)?;
        if v + 1e-12 * v.abs().max(1.0) < e_cut {
            return Err(Error::ContractViolation(format!(
                "decay exponent decreases near r = {next:e}"
            )));
        }
        cutoff = next;
        e_cut = v;
    }

    // Body on [0, r1] and dyadic panels up to the cutoff.
    let cfg = QuadConfig::default();
    let mut err_slot: Option<Error> = None;
    let mut integrand = |x: f64| match e(x) {
        Ok(v) => (-v).exp(),
        Err(err) => {
            err_slot.get_or_insert(err);
            0.0
        }
    };
    let mut value = 0.0;
    let mut abs_err = 0.0;
    let mut lo = 0.0;
    let mut hi = r1;
    while lo < cutoff {
        let est = quadrature::integrate(&mut integrand, lo, hi, &cfg)?;
        value += est.value;
        abs_err += est.abs_err;
        lo = hi;
        hi *= 2.0;
    }
    if let Some(err) = err_slot {
        return Err(err);
    }

    // Tail: on [2^j R, 2^{j+1} R] the integrand is at most e^{-E(2^j R)}.
    let mut tail_bound = 0.0;
    let mut x = cutoff;
    for _ in 0..200 {
        let term = x * (-e(x)?).exp();
        tail_bound += term;
        if term <= 1e-3 * tail_bound || term == 0.0 {
            break;
        }
        x *= 2.0;
        if x >= defaults::DECAY_R_MAX {
            break;
        }
    }

    Ok(DecayIntegral::Finite {
        value: value + tail_bound,
        abs_err,
        tail_bound,
        cutoff,
    })
}

/// `∫₀^∞ e^{-κ F_t(r)} dr`, closed form for power laws and quadrature otherwise.
pub fn decay_of_exponent(exponent: &IntegratedExponent, kappa: f64) -> Result<DecayIntegral> {
    if let Some((a, c)) = exponent.power_law() {
        return Ok(DecayIntegral::power_law(a, kappa * c));
    }
    exp_decay_integral(|r| exponent.eval(r).map(|v| kappa * v), defaults::DECAY_TOL)
}

/// Result of the finite-difference Bernstein test.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MonotonicityVerdict {
    Pass,
    /// The divided difference of `order` starting at grid `index` has the wrong
    /// sign by `magnitude` beyond the rounding slack.
    Fail { index: usize, order: usize, magnitude: f64 },
    /// A violation shows up at one grid spacing but not at the doubled spacing.
    Inconclusive { index: usize, order: usize },
}

fn first_violation(grid: &[f64], values: &[f64], order: usize, rel_noise: f64) -> Option<(usize, usize, f64)> {
    let mut diff: Vec<f64> = values.to_vec();
    let mut noise: Vec<f64> = values
        .iter()
        .map(|v| v.abs() * (8.0 * f64::EPSILON + rel_noise))
        .collect();
    for k in 1..=order {
        let mut next = Vec::with_capacity(diff.len().saturating_sub(1));
        let mut next_noise = Vec::with_capacity(diff.len().saturating_sub(1));
        for i in 0..diff.len().saturating_sub(1) {
            let span = grid[i + k] - grid[i];
            next.push((diff[i + 1] - diff[i]) / span);
            next_noise.push((noise[i + 1] + noise[i]) / span * (1.0 + 4.0 * f64::EPSILON));
        }
        diff = next;
        noise = next_noise;
        // Bernstein sign pattern: (-1)^{k+1} Δ^k f ≥ 0.
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        for (i, (d, n)) in diff.iter().zip(&noise).enumerate() {
            let signed = sign * d;
            if signed < -4.0 * n {
                return Some((i, k, -signed));
            }
        }
    }
    None
}

/// Finite-difference test of the Bernstein sign pattern of `f` on `grid` up to
/// `order`. Also requires `f ≥ 0`. `rel_noise` widens the rounding slack for
/// callables that are themselves computed by quadrature.
pub fn verify_complete_monotonicity_fn<F: Fn(f64) -> f64>(
    f: F,
    grid: &[f64],
    order: usize,
    rel_noise: f64,
) -> Result<MonotonicityVerdict> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("order must be at least 2, got {order}")));
    }
    if grid.len() < 2 * order + 2 {
        return Err(Error::InvalidInput(format!(
            "grid of {} points too short for order {order}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
        return Err(Error::InvalidInput("grid must be nonnegative and strictly increasing".into()));
    }
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Ok(MonotonicityVerdict::Fail {
            index: i,
            order: 0,
            magnitude: -*v,
        });
    }
    let fine = first_violation(grid, &values, order, rel_noise);
    let coarse_grid: Vec<f64> = grid.iter().step_by(2).copied().collect();
    let coarse_values: Vec<f64> = values.iter().step_by(2).copied().collect();
    let coarse = if coarse_grid.len() > order + 1 {
        first_violation(&coarse_grid, &coarse_values, order, rel_noise)
    } else {
        None
    };
    Ok(match (fine, coarse) {
        (None, None) => MonotonicityVerdict::Pass,
        (Some((index, order, magnitude)), Some(_)) => MonotonicityVerdict::Fail {
            index,
            order,
            magnitude,
        },
        (Some((index, order, _)), None) => MonotonicityVerdict::Inconclusive { index, order },
        (None, Some((index, order, _))) => MonotonicityVerdict::Inconclusive { index: 2 * index, order },
    })
}

pub fn verify_complete_monotonicity(spec: &BernsteinSpec, grid: &[f64], order: usize) -> Result<MonotonicityVerdict> {
    verify_complete_monotonicity_fn(|r| spec.eval(r), grid, order, 0.0)
}

/// Heuristic verdict on `f(r)/log(1 + r) → ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub verdict: GrowthVerdict,
    pub probes: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Always `true`: a limit condition cannot be decided from finitely many probes.
    pub heuristic: bool,
}

/// Ratio at the last probe needed for `Satisfied`.
pub const SUPERLOG_THRESHOLD: f64 = 10.0;

/// Samples `f(R)/log(1 + R)` on a geometric grid spanning at least 8 decades.
pub fn superlog_growth_check(spec: &BernsteinSpec, probes: &[f64]) -> Result<GrowthReport> {
    superlog_growth_check_fn(|r| spec.eval(r), probes)
}

pub fn superlog_growth_check_fn<F: Fn(f64) -> f64>(f: F, probes: &[f64]) -> Result<GrowthReport> {
    if probes.len() < 3 || probes.windows(2).any(|w| !(w[1] > w[0])) || !(probes[0] > 0.0) {
        return Err(Error::InvalidInput("probe grid must be positive and strictly increasing".into()));
    }
    let decades = (probes[probes.len() - 1] / probes[0]).log10();
    if decades < 8.0 {
        return Err(Error::InvalidInput(format!("probe grid spans {decades:.1} decades, need at least 8")));
    }
    let ratios: Vec<f64> = probes.iter().map(|&r| f(r) / r.ln_1p()).collect();
    let n = ratios.len();
    let mid = ratios[n / 2];
    let last = ratios[n - 1];
    let increasing = ratios[n / 2..].windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let verdict = if increasing && last >= SUPERLOG_THRESHOLD && last >= 2.0 * mid {
        GrowthVerdict::Satisfied
    } else if last <= 1.1 * mid {
        GrowthVerdict::Violated
    } else {
        GrowthVerdict::Inconclusive
    };
    Ok(GrowthReport {
        verdict,
        probes: probes.to_vec(),
        ratios,
        heuristic: true,
    })
}

/// `n` points from `lo` to `hi` in geometric progression.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalogue() -> Vec<BernsteinSpec> {
        let s = BernsteinSpec::stable(0.5, 1.0).unwrap();
        vec![
            s.clone(),
            BernsteinSpec::stable(1.0, 2.0).unwrap(),
            BernsteinSpec::stable(0.25, 0.3).unwrap(),
            BernsteinSpec::relativistic(0.5, 1.0).unwrap(),
            BernsteinSpec::log(1.0).unwrap(),
            BernsteinSpec::scaled(s.clone(), 3.0).unwrap(),
            BernsteinSpec::time_scaled(BernsteinSpec::log(2.0).unwrap(), 0.7).unwrap(),
            BernsteinSpec::sum(vec![s, BernsteinSpec::log(1.0).unwrap()]).unwrap(),
        ]
    }

    // Composite Simpson on [0, t] in the original time variable.
    fn simpson_f_t(f: &BernsteinSpec, gamma: f64, t: f64, r: f64) -> f64 {
        let n = 20_000;
        let h = t / n as f64;
        let g = |s: f64| f.eval((-2.0 * gamma * s).exp() * r);
        let mut acc = g(0.0) + g(t);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn eval_examples() {
        assert_eq!(BernsteinSpec::stable(0.5, 1.0).unwrap().eval(4.0), 2.0);
        let l = BernsteinSpec::log(1.0).unwrap();
        assert!((l.eval(std::f64::consts::E - 1.0) - 1.0).abs() < 1e-15);
        for f in catalogue() {
            assert_eq!(f.eval(0.0), 0.0);
        }
        // (r + m^{1/a})^a - m directly
        let rel = BernsteinSpec::relativistic(0.5, 2.0).unwrap();
        let direct = (3.0f64 + 4.0).sqrt() - 2.0;
        assert!((rel.eval(3.0) - direct).abs() < 1e-14);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(BernsteinSpec::stable(0.0, 1.0).is_err());
        assert!(BernsteinSpec::stable(1.2, 1.0).is_err());
        assert!(BernsteinSpec::stable(0.5, -1.0).is_err());
        assert!(BernsteinSpec::relativistic(1.0, 1.0).is_err());
        assert!(BernsteinSpec::log(0.0).is_err());
        assert!(BernsteinSpec::sum(vec![]).is_err());
        assert!(serde_json::from_str::<BernsteinSpec>(r#"{"kind":"stable","a":2.0,"c":1.0}"#).is_err());
        assert!(
            serde_json::from_str::<BernsteinSpec>(r#"{"kind":"sum","terms":[{"kind":"log","b":-1.0}]}"#).is_err()
        );
    }

    #[test]
    fn json_round_trip_uses_fixed_keys() {
        let s = BernsteinSpec::stable(0.5, 1.0).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"kind":"stable","a":0.5,"c":1.0}"#);
        let sum = BernsteinSpec::sum(vec![s, BernsteinSpec::log(1.0).unwrap()]).unwrap();
        let text = serde_json::to_string(&sum).unwrap();
        assert!(text.starts_with(r#"{"kind":"sum","terms":["#));
        for f in catalogue() {
            let back: BernsteinSpec = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn power_law_detection() {
        let s = BernsteinSpec::stable(0.5, 2.0).unwrap();
        assert_eq!(BernsteinSpec::scaled(s.clone(), 4.0).unwrap().power_law(), Some((0.5, 4.0)));
        assert_eq!(BernsteinSpec::time_scaled(s.clone(), 3.0).unwrap().power_law(), Some((0.5, 6.0)));
        assert_eq!(BernsteinSpec::sum(vec![s.clone(), s.clone()]).unwrap().power_law(), Some((0.5, 4.0)));
        assert_eq!(BernsteinSpec::log(1.0).unwrap().power_law(), None);
    }

    #[test]
    fn integrated_exponent_examples() {
        let f = BernsteinSpec::stable(0.5, 1.0).unwrap();
        let big_t = IntegratedExponent::new(f.clone(), 1.0, 50.0).unwrap();
        assert!((big_t.eval(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((big_t.eval_quadrature(1.0).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(big_t.eval(0.0).unwrap(), 0.0);
        let flat = IntegratedExponent::new(BernsteinSpec::log(1.0).unwrap(), 0.0, 2.0).unwrap();
        assert!((flat.eval(std::f64::consts::E - 1.0).unwrap() - 2.0).abs() < 1e-14);
        let stationary = IntegratedExponent::new(f, 1.0, f64::INFINITY).unwrap();
        assert!((stationary.eval_quadrature(4.0).unwrap() - 2.0).abs() < 1e-9);
        assert!(IntegratedExponent::new(BernsteinSpec::log(1.0).unwrap(), 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn integrated_exponent_matches_simpson_oracle() {
        for f in catalogue() {
            for &(gamma, t, r) in &[(1.0, 1.0, 2.0), (0.3, 3.0, 50.0), (4.0, 0.5, 0.1)] {
                let fe = IntegratedExponent::new(f.clone(), gamma, t).unwrap();
                let oracle = simpson_f_t(&f, gamma, t, r);
                let got = fe.eval_quadrature(r).unwrap();
                assert!((got - oracle).abs() <= 1e-9 * oracle, "{f:?} {gamma} {t} {r}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn exp_decay_examples() {
        let v = exp_decay_integral(|r| Ok(r.sqrt()), 1e-10).unwrap();
        assert!((v.value_or_inf() - 2.0).abs() < 1e-8, "{v:?}");
        let v = exp_decay_integral(|r| Ok(2.0 * r.sqrt()), 1e-10).unwrap();
        assert!((v.value_or_inf() - 0.5).abs() < 1e-8 * 0.5, "{v:?}");
        let v = exp_decay_integral(|r| Ok(r.ln_1p()), 1e-10).unwrap();
        assert!(matches!(v, DecayIntegral::Divergent { .. }), "{v:?}");
        // log growth with coefficient 2: ∫ (1 + r)^{-2} = 1
        let v = exp_decay_integral(|r| Ok(2.0 * r.ln_1p()), 1e-10).unwrap();
        assert!((v.value_or_inf() - 1.0).abs() < 1e-8, "{v:?}");
        let err = exp_decay_integral(|r| Ok(-r), 1e-10);
        assert!(matches!(err, Err(Error::ContractViolation(_))));
    }

    #[test]
    fn complete_monotonicity_examples() {
        let grid: Vec<f64> = (10..=1000).map(|i| i as f64 * 0.01).collect();
        let s = BernsteinSpec::stable(0.5, 1.0).unwrap();
        assert_eq!(verify_complete_monotonicity(&s, &grid, 4).unwrap(), MonotonicityVerdict::Pass);
        let square = verify_complete_monotonicity_fn(|r| r * r, &grid, 4, 0.0).unwrap();
        assert!(matches!(square, MonotonicityVerdict::Fail { order: 2, .. }), "{square:?}");
        let sum = BernsteinSpec::sum(vec![s, BernsteinSpec::log(1.0).unwrap()]).unwrap();
        assert_eq!(verify_complete_monotonicity(&sum, &grid, 4).unwrap(), MonotonicityVerdict::Pass);
        // a decreasing function fails at order 1
        let dec = verify_complete_monotonicity_fn(|r| 1.0 / (1.0 + r), &grid, 3, 0.0).unwrap();
        assert!(matches!(dec, MonotonicityVerdict::Fail { order: 1, .. }));
    }

    #[test]
    fn whole_catalogue_is_bernstein() {
        let grid = geometric_grid(1e-2, 1e2, 400);
        for f in catalogue() {
            assert_eq!(verify_complete_monotonicity(&f, &grid, 4).unwrap(), MonotonicityVerdict::Pass, "{f:?}");
            let fe = IntegratedExponent::new(f.clone(), 0.7, 1.3).unwrap();
            let v = verify_complete_monotonicity_fn(|r| fe.eval_quadrature(r).unwrap(), &grid, 3, 1e-12).unwrap();
            assert_eq!(v, MonotonicityVerdict::Pass, "F_t of {f:?}");
        }
    }

    #[test]
    fn superlog_examples() {
        let probes = geometric_grid(1.0, 1e30, 61);
        let check = |f: BernsteinSpec| superlog_growth_check(&f, &probes).unwrap().verdict;
        assert_eq!(check(BernsteinSpec::stable(0.5, 1.0).unwrap()), GrowthVerdict::Satisfied);
        assert_eq!(check(BernsteinSpec::log(1.0).unwrap()), GrowthVerdict::Violated);
        let two_logs = BernsteinSpec::sum(vec![BernsteinSpec::log(1.0).unwrap(), BernsteinSpec::log(2.0).unwrap()]).unwrap();
        assert_eq!(check(two_logs), GrowthVerdict::Violated);
        assert!(superlog_growth_check(&BernsteinSpec::log(1.0).unwrap(), &geometric_grid(1.0, 1e5, 10)).is_err());
    }

    #[test]
    fn levy_density_reproduces_bernstein_function() {
        let cfg = QuadConfig::default();
        for f in catalogue() {
            if f.drift() > 0.0 {
                continue;
            }
            for r in [0.3, 2.0, 40.0] {
                let g = |s: f64| -(-r * s).exp_m1() * f.levy_density(s);
                let head = quadrature::converged(quadrature::integrate_from_zero(g, 1.0, &cfg).unwrap(), "h").unwrap();
                let tail = quadrature::converged(quadrature::integrate_to_infinity(g, 1.0, 1.0, &cfg).unwrap(), "t").unwrap();
                let v = head.value + tail.value;
                assert!((v - f.eval(r)).abs() < 1e-8 * f.eval(r), "{f:?} at {r}: {v}");
            }
        }
    }

    proptest! {
        #[test]
        fn stable_closed_forms_match_quadrature(
            a in 0.1f64..=1.0,
            c in 0.1f64..10.0,
            gamma in 0.05f64..5.0,
            t in 0.05f64..5.0,
            r in 1e-3f64..1e3,
        ) {
            let fe = IntegratedExponent::new(BernsteinSpec::stable(a, c).unwrap(), gamma, t).unwrap();
            let closed = fe.eval(r).unwrap();
            let quad = fe.eval_quadrature(r).unwrap();
            prop_assert!((closed - quad).abs() <= 1e-8 * closed);

            let (pa, pc) = fe.power_law().unwrap();
            let exact = DecayIntegral::power_law(pa, pc).value_or_inf();
            let numeric = exp_decay_integral(|x| fe.eval_quadrature(x), 1e-10).unwrap().value_or_inf();
            prop_assert!((numeric - exact).abs() <= 1e-6 * exact, "{} vs {}", numeric, exact);
        }

        #[test]
        fn integrated_exponent_monotone(t1 in 0.1f64..3.0, dt in 0.0f64..3.0, r1 in 0.0f64..100.0, dr in 0.0f64..100.0) {
            let f = BernsteinSpec::relativistic(0.4, 1.5).unwrap();
            let e = |t: f64, r: f64| IntegratedExponent::new(f.clone(), 0.8, t).unwrap().eval(r).unwrap();
            prop_assert!(e(t1 + dt, r1) >= e(t1, r1) * (1.0 - 1e-12));
            prop_assert!(e(t1, r1 + dr) >= e(t1, r1) * (1.0 - 1e-12));
        }
    }
}
