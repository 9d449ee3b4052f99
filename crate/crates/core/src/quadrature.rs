//! Adaptive quadrature on finite, semi-infinite and oscillatory domains.
//!
//! The finite-interval driver is a 21-point Gauss-Kronrod rule with greedy
//! bisection of the interval carrying the largest error estimate. Semi-infinite
//! integrals are summed over geometrically growing (or shrinking) panels and the
//! remainder is extrapolated from the observed panel ratio. Integrals of the form
//! `∫₀^∞ (1 - cos v) g(v) dv` are split into a near-origin part, a block of whole
//! half-periods, a monotone tail and an alternating cosine tail that is summed
//! with Wynn's epsilon algorithm.

use crate::defaults;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: defaults::QUAD_REL_TOL,
            abs_tol: defaults::QUAD_ABS_TOL,
            max_subdivisions: defaults::QUAD_MAX_SUBDIVISIONS,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// A quadrature value with its absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        abs_err: 0.0,
    };

    fn add(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            abs_err: self.abs_err + other.abs_err,
        }
    }
}

/// Outcome of a semi-infinite panel summation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PanelSum {
    Converged(Estimate),
    /// Panel contributions stopped shrinking; `last_ratio` is the ratio of the
    /// final two panels.
    Divergent { panels: usize, last_ratio: f64 },
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gauss_kronrod_21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..5 {
        let jtw = 2 * j + 1;
        let x = half * XGK[jtw];
        let (f1, f2) = (f(center - x), f(center + x));
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let x = half * XGK[jtwm1];
        let (f1, f2) = (f(center - x), f(center + x));
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() || !err.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite integrand on [{a:e}, {b:e}]"
        )));
    }
    Ok(Panel { a, b, value, err })
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::ZERO);
    }
    if a > b {
        let est = integrate(f, b, a, cfg)?;
        return Ok(Estimate {
            value: -est.value,
            abs_err: est.abs_err,
        });
    }
    let mut panels = vec![gauss_kronrod_21(&mut f, a, b)?];
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if err <= target {
            return Ok(Estimate {
                value: total,
                abs_err: err,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty panel list");
        let Panel { a: lo, b: hi, .. } = panels[worst];
        let mid = 0.5 * (lo + hi);
        let unsplittable = mid <= lo || mid >= hi || (hi - lo) <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs());
        if panels.len() >= cfg.max_subdivisions || unsplittable {
            return Err(Error::Quadrature {
                best: total,
                achieved: if total != 0.0 { err / total.abs() } else { err },
                requested: cfg.rel_tol,
            });
        }
        let left = gauss_kronrod_21(&mut f, lo, mid)?;
        let right = gauss_kronrod_21(&mut f, mid, hi)?;
        panels[worst] = left;
        panels.push(right);
    }
}

/// Sums integrals over a sequence of panels whose contributions are expected to
/// decay geometrically, extrapolating the remainder from the panel ratio.
fn sum_geometric_panels<F, P>(mut f: F, mut panel: P, max_panels: usize, cfg: &QuadConfig) -> Result<PanelSum>
where
    F: FnMut(f64) -> f64,
    P: FnMut(usize) -> Option<(f64, f64)>,
{
    let inner = QuadConfig {
        rel_tol: cfg.rel_tol * 0.1,
        ..*cfg
    };
    let mut sum = Estimate::ZERO;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut zero_run = 0;
    let mut slow_run = 0;
    let mut last_ratio = f64::NAN;

    for k in 0..max_panels {
        let Some((lo, hi)) = panel(k) else {
            break;
        };
        let est = integrate(&mut f, lo, hi, &inner)?;
        sum = sum.add(est);
        let cur = est.value;

        if cur == 0.0 {
            zero_run += 1;
            if zero_run >= 3 {
                return Ok(PanelSum::Converged(sum));
            }
            prev = Some(cur);
            continue;
        }
        zero_run = 0;

        if let Some(p) = prev.filter(|p| *p != 0.0) {
            let ratio = cur / p;
            last_ratio = ratio;
            if ratio >= 0.999 {
                slow_run += 1;
            } else {
                slow_run = 0;
            }
            if slow_run >= 12 && k >= 40 {
                return Ok(PanelSum::Divergent {
                    panels: k + 1,
                    last_ratio: ratio,
                });
            }
            let tiny = cur.abs() <= 0.1 * cfg.rel_tol * sum.value.abs();
            if k >= 3 && tiny && ratio.abs() < 1.0 {
                let rem = cur * ratio / (1.0 - ratio);
                return Ok(PanelSum::Converged(Estimate {
                    value: sum.value + rem,
                    abs_err: sum.abs_err + rem.abs(),
                }));
            }
            if let Some(pr) = prev_ratio {
                let stable = (ratio - pr).abs() <= 1e-6 * ratio.abs().max(1e-300);
                if k >= 8 && stable && ratio > 0.0 && ratio < 0.999 {
                    let rem = cur * ratio / (1.0 - ratio);
                    if rem.abs() <= 1e-2 * sum.value.abs() || (ratio - pr).abs() / (1.0 - ratio) <= cfg.rel_tol {
                        let drift = (ratio - pr).abs() / (1.0 - ratio);
                        return Ok(PanelSum::Converged(Estimate {
                            value: sum.value + rem,
                            abs_err: sum.abs_err + rem.abs() * drift + f64::EPSILON * rem.abs(),
                        }));
                    }
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(cur);
    }
    if last_ratio.is_finite() && last_ratio >= 0.99 {
        return Ok(PanelSum::Divergent {
            panels: max_panels,
            last_ratio,
        });
    }
    Err(Error::Quadrature {
        best: sum.value,
        achieved: f64::NAN,
        requested: cfg.rel_tol,
    })
}

/// `∫_a^∞ f`, with panels `[a + s(2^k - 1), a + s(2^{k+1} - 1)]`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(f: F, a: f64, scale: f64, cfg: &QuadConfig) -> Result<PanelSum> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!("panel scale must be positive, got {scale}")));
    }
    let panel = |k: usize| {
        let lo = a + scale * (2f64.powi(k as i32) - 1.0);
        let hi = a + scale * (2f64.powi(k as i32 + 1) - 1.0);
        (hi.is_finite() && hi < 1e300).then_some((lo, hi))
    };
    sum_geometric_panels(f, panel, 1000, cfg)
}

/// `∫_0^b f` for integrands that may be singular (but integrable) at the origin,
/// with dyadic panels `[b 2^{-k-1}, b 2^{-k}]`.
pub fn integrate_from_zero<F: FnMut(f64) -> f64>(f: F, b: f64, cfg: &QuadConfig) -> Result<PanelSum> {
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("upper limit must be positive, got {b}")));
    }
    let panel = |k: usize| {
        let hi = b * 0.5f64.powi(k as i32);
        let lo = 0.5 * hi;
        (lo > 0.0 && lo.is_normal()).then_some((lo, hi))
    };
    sum_geometric_panels(f, panel, 1020, cfg)
}

/// Unwraps a panel sum, mapping divergence to an error.
pub fn converged(sum: PanelSum, what: &str) -> Result<Estimate> {
    match sum {
        PanelSum::Converged(e) => Ok(e),
        PanelSum::Divergent { last_ratio, .. } => Err(Error::Divergent(format!(
            "{what}: panel contributions stopped decaying (ratio {last_ratio:.4})"
        ))),
    }
}

/// Wynn's epsilon extrapolation of a sequence of partial sums. Returns the
/// accelerated limit and the difference to the previous accelerated value.
pub fn wynn_epsilon(partial: &[f64]) -> (f64, f64) {
    let n = partial.len();
    if n < 3 {
        let last = partial.last().copied().unwrap_or(0.0);
        return (last, f64::INFINITY);
    }
    // columns[k][j] holds epsilon_k^{(j)}
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial.to_vec();
    let mut best = *partial.last().unwrap();
    let mut best_prev = partial[n - 2];
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let diff = cur[j + 1] - cur[j];
            if diff == 0.0 {
                // sequence already converged to machine precision in this column
                return if k % 2 == 0 { (cur[j + 1], 0.0) } else { (best, (best - best_prev).abs()) };
            }
            next.push(prev[j + 1] + 1.0 / diff);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 && !cur.is_empty() {
            let last = *cur.last().unwrap();
            if !last.is_finite() {
                break;
            }
            best_prev = if cur.len() >= 2 { cur[cur.len() - 2] } else { best };
            best = last;
        }
    }
    (best, (best - best_prev).abs())
}

/// `∫₀^∞ (1 - cos v) g(v) dv` for nonnegative `g` that decays at infinity and
/// may be singular at the origin as long as `v² g(v)` is integrable there.
pub fn one_minus_cos_integral<F: FnMut(f64) -> f64>(mut g: F, cfg: &QuadConfig) -> Result<Estimate> {
    use std::f64::consts::PI;
    const HALF_PERIODS: usize = 16;
    const COS_TERMS: usize = 48;

    let inner = QuadConfig {
        rel_tol: cfg.rel_tol * 0.1,
        ..*cfg
    };
    let near = converged(
        integrate_from_zero(
            |v| {
                let s = (0.5 * v).sin();
                2.0 * s * s * g(v)
            },
            PI,
            &inner,
        )?,
        "(1 - cos) integral near the origin",
    )?;

    let mut middle = Estimate::ZERO;
    for k in 1..HALF_PERIODS {
        let lo = k as f64 * PI;
        middle = middle.add(integrate(
            |v| {
                let s = (0.5 * v).sin();
                2.0 * s * s * g(v)
            },
            lo,
            lo + PI,
            &inner,
        )?);
    }
    let start = HALF_PERIODS as f64 * PI;

    let mono = converged(
        integrate_to_infinity(&mut g, start, PI, &inner)?,
        "(1 - cos) integral monotone tail",
    )?;

    let mut partial = Vec::with_capacity(COS_TERMS);
    let mut acc = 0.0;
    let mut cos_err = 0.0;
    for j in 0..COS_TERMS {
        let lo = start + j as f64 * PI;
        let est = integrate(|v| v.cos() * g(v), lo, lo + PI, &inner)?;
        acc += est.value;
        cos_err += est.abs_err;
        partial.push(acc);
    }
    let (cos_tail, wynn_err) = wynn_epsilon(&partial);

    let value = near.value + middle.value + mono.value - cos_tail;
    let abs_err = near.abs_err + middle.abs_err + mono.abs_err + cos_err + wynn_err;
    Ok(Estimate { value, abs_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn polynomial_and_smooth_integrals() {
        let cfg = QuadConfig::default();
        let e = integrate(|x| x * x, 0.0, 3.0, &cfg).unwrap();
        assert!(rel(e.value, 9.0) < 1e-14);
        let e = integrate(|x| x.sin(), 0.0, PI, &cfg).unwrap();
        assert!(rel(e.value, 2.0) < 1e-13);
        let e = integrate(|x| x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!(rel(e.value, 2.0 / 3.0) < 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let cfg = QuadConfig::default();
        let e = integrate(|x| x.exp(), 1.0, 0.0, &cfg).unwrap();
        assert!(rel(e.value, -(1f64.exp() - 1.0)) < 1e-13);
    }

    #[test]
    fn exhausted_budget_reports_best_estimate() {
        let cfg = QuadConfig {
            rel_tol: 1e-15,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        match integrate(|x| (1.0 / x).sin(), 1e-3, 1.0, &cfg) {
            Err(Error::Quadrature { best, .. }) => assert!(best.is_finite()),
            other => panic!("expected quadrature failure, got {other:?}"),
        }
    }

    #[test]
    fn power_tail_is_extrapolated() {
        let cfg = QuadConfig::default();
        // ∫_1^∞ x^{-1.5} dx = 2
        let e = converged(integrate_to_infinity(|x| x.powf(-1.5), 1.0, 1.0, &cfg).unwrap(), "t").unwrap();
        assert!(rel(e.value, 2.0) < 1e-8, "{}", e.value);
        // ∫_0^∞ e^{-x} dx = 1
        let e = converged(integrate_to_infinity(|x| (-x).exp(), 0.0, 1.0, &cfg).unwrap(), "t").unwrap();
        assert!(rel(e.value, 1.0) < 1e-10);
    }

    #[test]
    fn harmonic_tail_is_divergent() {
        let cfg = QuadConfig::default();
        let out = integrate_to_infinity(|x| 1.0 / x, 1.0, 1.0, &cfg).unwrap();
        assert!(matches!(out, PanelSum::Divergent { .. }), "{out:?}");
    }

    #[test]
    fn integrable_singularity_at_origin() {
        let cfg = QuadConfig::default();
        // ∫_0^1 x^{-0.9} dx = 10
        let e = converged(integrate_from_zero(|x| x.powf(-0.9), 1.0, &cfg).unwrap(), "z").unwrap();
        assert!(rel(e.value, 10.0) < 1e-8, "{}", e.value);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // log 2 = 1 - 1/2 + 1/3 - ...
        let mut acc = 0.0;
        let partial: Vec<f64> = (1..=20)
            .map(|k| {
                acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                acc
            })
            .collect();
        let (v, _) = wynn_epsilon(&partial);
        assert!((v - 2f64.ln()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn one_minus_cos_against_closed_forms() {
        let cfg = QuadConfig::default();
        // ∫ (1 - cos v) v^{-2} dv = π/2
        let e = one_minus_cos_integral(|v| v.powi(-2), &cfg).unwrap();
        assert!(rel(e.value, PI / 2.0) < 1e-9, "{}", e.value);
        // ∫ (1 - cos v) v^{-1-α} dv = Γ(1-α) cos(πα/2) / α; α = 0.5 gives √π·√2/2·2 = √(2π)
        let e = one_minus_cos_integral(|v| v.powf(-1.5), &cfg).unwrap();
        assert!(rel(e.value, (2.0 * PI).sqrt()) < 1e-8, "{}", e.value);
        // ∫ (1 - cos v) e^{-v} dv = 1 - 1/2
        let e = one_minus_cos_integral(|v| (-v).exp(), &cfg).unwrap();
        assert!(rel(e.value, 0.5) < 1e-10, "{}", e.value);
    }
}
