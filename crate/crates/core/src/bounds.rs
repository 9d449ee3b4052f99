//! Sup-over-modes constants controlling gradients and total variation of the
//! OU semigroup, and the bounds assembled from them.
//!
//! Per-mode terms are evaluated in parallel chunks; the running maximum is
//! reduced sequentially in enumeration order so reports are reproducible.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bernstein::{decay_of_exponent, exp_decay_integral, BernsteinSpec, DecayIntegral, IntegratedExponent};
use crate::criteria::{CriterionReport, Verdict};
use crate::defaults;
use crate::error::{Error, Result};
use crate::spectrum::{Mode, SpectrumSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FormulaId {
    #[serde(rename = "A_t")]
    AT,
    #[serde(rename = "C_t_sub")]
    CtSub,
    #[serde(rename = "C_t_general")]
    CtGeneral,
}

impl FormulaId {
    pub fn name(self) -> &'static str {
        match self {
            FormulaId::AT => "A_t",
            FormulaId::CtSub => "C_t_sub",
            FormulaId::CtGeneral => "C_t_general",
        }
    }
}

/// Serialize non-finite values as the string `"inf"` since JSON has no infinity.
pub fn serialize_f64_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeTerm {
    pub index: usize,
    pub gamma: f64,
    /// The `t f` branch; for `A_t` the single term.
    #[serde(serialize_with = "serialize_f64_or_inf")]
    pub first: f64,
    /// The branch carrying `e^{-γt}`; it bounds every later term for large `γ`.
    #[serde(serialize_with = "serialize_f64_or_inf")]
    pub second: f64,
    #[serde(serialize_with = "serialize_f64_or_inf")]
    pub term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub formula_id: FormulaId,
    pub t: f64,
    #[serde(serialize_with = "serialize_f64_or_inf")]
    pub value: f64,
    /// 1-based mode attaining the supremum.
    pub argmax_mode: usize,
    pub modes_scanned: usize,
    /// Mode after which the envelope stayed below the running max.
    pub stabilized_at: usize,
    /// False when the scan hit `k_max` before stabilizing.
    pub stabilized: bool,
    /// First mode whose integral is not certified finite.
    pub divergent_mode: Option<usize>,
    pub per_mode_terms: Vec<ModeTerm>,
}

impl BoundReport {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    /// `index,gamma,first,second,term` rows.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("index,gamma,first,second,term\n");
        for m in &self.per_mode_terms {
            let _ = writeln!(out, "{},{},{:e},{:e},{:e}", m.index, m.gamma, m.first, m.second, m.term);
        }
        out
    }
}

/// `∫₀^∞ e^{-κ f(r)} dr`.
pub fn decay_of_bernstein(f: &BernsteinSpec, kappa: f64) -> Result<DecayIntegral> {
    if let Some((a, c)) = f.power_law() {
        return Ok(DecayIntegral::power_law(a, kappa * c));
    }
    exp_decay_integral(|r| Ok(kappa * f.eval(r)), defaults::DECAY_TOL)
}

/// `(1 - e^{-2γt}) / (2γ)`, equal to `t` at `γ = 0`.
fn relaxation(gamma: f64, t: f64) -> f64 {
    if gamma == 0.0 {
        t
    } else {
        -(-2.0 * gamma * t).exp_m1() / (2.0 * gamma)
    }
}

/// `x · I`, with `0 · ∞ = ∞` so a divergent integral is never hidden by underflow.
fn damped(factor: f64, integral: f64) -> f64 {
    if integral.is_infinite() {
        f64::INFINITY
    } else {
        factor * integral
    }
}

fn mode_exponent(formula: FormulaId, mode: &Mode) -> Result<BernsteinSpec> {
    let f = match formula {
        FormulaId::AT | FormulaId::CtSub => mode.noise.subordinate_exponent(),
        FormulaId::CtGeneral => mode.noise.dominating_exponent(),
    };
    f.ok_or_else(|| {
        Error::Unsupported(format!(
            "mode {} has no {} Bernstein exponent",
            mode.index,
            if formula == FormulaId::CtGeneral {
                "dominating"
            } else {
                "subordinate"
            }
        ))
    })
}

/// Per-mode term of the chosen constant at time `t`.
pub fn mode_term(formula: FormulaId, mode: &Mode, t: f64) -> Result<ModeTerm> {
    let f = mode_exponent(formula, mode)?;
    let g = mode.gamma;
    let (first, second) = match formula {
        FormulaId::AT => {
            let integral = decay_of_exponent(&IntegratedExponent::new(f, g, t)?, 1.0)?.value_or_inf();
            let v = damped((-2.0 * g * t).exp(), integral);
            (v, v)
        }
        FormulaId::CtSub | FormulaId::CtGeneral => {
            let scale = if formula == FormulaId::CtGeneral {
                0.5 * 1f64.cos()
            } else {
                1.0
            };
            let first = decay_of_bernstein(&f, scale * t)?.value_or_inf();
            let second = damped(
                (-g * t).exp(),
                decay_of_bernstein(&f, scale * relaxation(g, t))?.value_or_inf(),
            );
            (first, second)
        }
    };
    Ok(ModeTerm {
        index: mode.index,
        gamma: g,
        first,
        second,
        term: first.min(second),
    })
}

/// `√(2 sup_k term_k)` over the spectrum, scanning at most `k_max` modes.
pub fn bound(formula: FormulaId, spectrum: &SpectrumSpec, t: f64, k_max: usize) -> Result<BoundReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be positive and finite, got {t}")));
    }
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be positive".into()));
    }
    let n = spectrum.len().map_or(k_max, |len| len.min(k_max));
    let modes = spectrum.modes(n)?;
    let exhaustive = spectrum.len().is_some_and(|len| len <= k_max);

    let mut terms: Vec<ModeTerm> = Vec::with_capacity(n);
    let mut sup = f64::NEG_INFINITY;
    let mut argmax = 1;
    let mut last_violation = 1;
    let mut stabilized = false;
    let mut divergent_mode = None;
    'scan: for chunk in modes.chunks(defaults::BOUND_CHUNK) {
        let computed: Vec<ModeTerm> = chunk
            .par_iter()
            .map(|m| mode_term(formula, m, t))
            .collect::<Result<_>>()?;
        for m in computed {
            let k = m.index;
            if m.term > sup {
                sup = m.term;
                argmax = k;
            }
            if argmax == k || m.second > sup {
                last_violation = k;
            }
            terms.push(m);
            if sup.is_infinite() {
                divergent_mode = Some(k);
                break 'scan;
            }
            // a full decade of modes past the last envelope crossing
            if k >= 10 * last_violation && k > last_violation {
                stabilized = true;
                break 'scan;
            }
        }
    }
    if divergent_mode.is_none() && exhaustive {
        stabilized = true;
    }
    let value = if sup.is_infinite() {
        f64::INFINITY
    } else {
        (2.0 * sup.max(0.0)).sqrt()
    };
    Ok(BoundReport {
        formula_id: formula,
        t,
        value,
        argmax_mode: argmax,
        modes_scanned: terms.len(),
        stabilized_at: if stabilized {
            last_violation.min(terms.len())
        } else {
            terms.len()
        },
        stabilized,
        divergent_mode,
        per_mode_terms: terms,
    })
}

/// `A_t = √(2 sup_k e^{-2γ_k t} ∫₀^∞ e^{-F_{k,t}(r)} dr)`.
pub fn a_t(spectrum: &SpectrumSpec, t: f64, k_max: usize) -> Result<BoundReport> {
    bound(FormulaId::AT, spectrum, t, k_max)
}

/// Constant for subordinate Brownian mode noises.
pub fn c_t_subordinate(spectrum: &SpectrumSpec, t: f64, k_max: usize) -> Result<BoundReport> {
    bound(FormulaId::CtSub, spectrum, t, k_max)
}

/// Constant for mode noises dominating `|z|^{-1} f_k(z^{-2})`, with the `cos 1` factors.
pub fn c_t_general(spectrum: &SpectrumSpec, t: f64, k_max: usize) -> Result<BoundReport> {
    bound(FormulaId::CtGeneral, spectrum, t, k_max)
}

/// Euclidean distance of two coefficient vectors, padding the shorter one with zeros.
pub fn coefficient_distance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().max(y.len());
    (0..n)
        .map(|i| {
            let d = x.get(i).copied().unwrap_or(0.0) - y.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `2 C_t ‖x - y‖`, a bound on `‖P_t(x,·) - P_t(y,·)‖_var`.
pub fn tv_upper_bound(c_t: &BoundReport, x: &[f64], y: &[f64]) -> f64 {
    let dist = coefficient_distance(x, y);
    if dist == 0.0 {
        0.0
    } else {
        2.0 * c_t.value * dist
    }
}

fn finite_value(report: &CriterionReport) -> Result<f64> {
    match (report.verdict, report.value) {
        (Verdict::Finite, Some(v)) => Ok(v),
        _ => Err(Error::Divergent(format!(
            "criterion {} is {:?}, the ergodicity bound needs a finite value",
            report.criterion, report.verdict
        ))),
    }
}

/// `2 C_t^{α_m} (2‖x‖^{α_m} + S₂^{α_m/2} + S_α)`, a bound on `‖P_t(x,·) - μ‖_var`.
pub fn ergodicity_bound(
    c_t: &BoundReport,
    s2: &CriterionReport,
    s_alpha: &CriterionReport,
    x: &[f64],
    alpha_m: f64,
) -> Result<f64> {
    if !(alpha_m > 0.0 && alpha_m <= 1.0) {
        return Err(Error::InvalidInput(format!("alpha_m must lie in (0, 1], got {alpha_m}")));
    }
    let m = finite_value(s2)?.powf(0.5 * alpha_m) + finite_value(s_alpha)?;
    let norm = coefficient_distance(x, &[]);
    Ok(2.0 * c_t.value.powf(alpha_m) * (2.0 * norm.powf(alpha_m) + m))
}
