//! Experiment drivers confronting exact or simulated quantities with the
//! explicit bounds.
//!
//! Total variation between infinite product laws is out of reach, so the
//! aggregate quantity is the sum of per-mode total variation norms. For product
//! measures that sum bounds the product distance from above, which is the
//! direction needed when checking upper bounds.

use rayon::prelude::*;

use super::config::{ScenarioConfig, SweepGrid};
use super::report::{PhaseCell, Row, RunReport};
use crate::bernstein::{decay_of_exponent, IntegratedExponent};
use crate::bounds::{self, FormulaId};
use crate::criteria::{ergodicity_criterion, heat_equation_threshold, state_space_criterion, CriterionOptions, Verdict};
use crate::density::{
    compute_density, compute_density_pair, fisher_integral, gradient_norm_1d, tv_between, tv_distance_1d,
    DensityGrid, DensityOptions, Exponent, StableExponent,
};
use crate::error::{Error, Result};
use crate::levy::stable_symbol_constant;
use crate::simulate::{ou_stable_scale, scenario_id, truncation_tail_bound, FieldModel, RngStreamSpec};
use crate::spectrum::{Mode, ModeNoise, SpectrumSpec};

pub const PROXY_NOTE: &str =
    "aggregate total variation is the sum of per-mode total variation norms, an upper bound for product laws";
pub const NORM_NOTE: &str = "distances are total variation norms (twice the largest difference of probabilities)";

/// Characteristic exponent of the noise part `Y_t` of one mode.
pub enum ModeLawExponent {
    Stable(StableExponent),
    Subordinate(IntegratedExponent),
}

impl Exponent for ModeLawExponent {
    fn exponent(&self, h: f64) -> Result<f64> {
        match self {
            ModeLawExponent::Stable(s) => s.exponent(h),
            ModeLawExponent::Subordinate(e) => e.eval(h * h),
        }
    }
}

/// Law of `Y_t` for a mode; `t = ∞` gives the stationary law.
pub fn mode_law(mode: &Mode, t: f64) -> Result<ModeLawExponent> {
    if let Some((alpha, k)) = mode.noise.stable_params() {
        let unit = (k * stable_symbol_constant(alpha)).powf(1.0 / alpha);
        return Ok(ModeLawExponent::Stable(StableExponent {
            alpha,
            scale: unit * ou_stable_scale(alpha, mode.gamma, t),
        }));
    }
    match &mode.noise {
        ModeNoise::Subordinate(f) => Ok(ModeLawExponent::Subordinate(IntegratedExponent::new(
            f.clone(),
            mode.gamma,
            t,
        )?)),
        ModeNoise::Levy(_) => Err(Error::Unsupported(format!(
            "mode {} has no closed-form characteristic exponent for density inversion",
            mode.index
        ))),
    }
}

fn criterion_options(cfg: &ScenarioConfig) -> CriterionOptions {
    CriterionOptions {
        n_max: cfg.n_max,
        tol: cfg.tolerances.criterion_tol,
    }
}

fn require_t_grid(cfg: &ScenarioConfig) -> Result<()> {
    if cfg.t_grid.is_empty() {
        return Err(Error::Config("t_grid: this experiment needs at least one time".into()));
    }
    Ok(())
}

/// Total variation norm `∫|p - p(·-δ)|`, capped at 2 when the shift leaves the grid.
fn shifted_norm(grid: &DensityGrid, delta: f64) -> Result<(f64, f64)> {
    if delta == 0.0 {
        return Ok((0.0, 0.0));
    }
    if delta.abs() > grid.half_width / 4.0 {
        return Ok((2.0, 0.0));
    }
    let tv = tv_distance_1d(grid, delta)?;
    Ok((2.0 * tv.value, 2.0 * tv.uncertainty))
}

fn started(name: &str, cfg: &ScenarioConfig) -> (RunReport, std::time::Instant) {
    (
        RunReport::new(name, cfg.sha256(), cfg.master_seed),
        std::time::Instant::now(),
    )
}

/// Best available constant for the total variation bound: the subordinate
/// constant when every mode is a subordinate Brownian motion, else the general one.
fn tv_constant(spectrum: &SpectrumSpec, t: f64, k_max: usize) -> Result<(bounds::BoundReport, Option<f64>, Option<f64>)> {
    let sub = bounds::c_t_subordinate(spectrum, t, k_max);
    let gen = bounds::c_t_general(spectrum, t, k_max);
    let (sv, gv) = (
        sub.as_ref().ok().map(|r| r.value),
        gen.as_ref().ok().map(|r| r.value),
    );
    match (sub, gen) {
        (Ok(s), _) => Ok((s, sv, gv)),
        (Err(_), Ok(g)) => Ok((g, sv, gv)),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Per-mode total variation of `P_t(x0,·)` against `P_t(y0,·)` versus `2 C_t ‖x0 - y0‖`.
pub fn run_tv_decay(cfg: &ScenarioConfig) -> Result<RunReport> {
    require_t_grid(cfg)?;
    let (mut report, clock) = started("tv_decay", cfg);
    report.notes.push(PROXY_NOTE.into());
    report.notes.push(NORM_NOTE.into());
    let (x, y) = (cfg.x0_vec()?, cfg.y0_vec()?);
    let n = cfg.modes_in_use().min(x.len().max(y.len()));
    let modes = cfg.spectrum.modes(n)?;
    let opts = DensityOptions::default();
    for &t in &cfg.t_grid {
        let (c, c_sub, c_gen) = tv_constant(&cfg.spectrum, t, cfg.k_max)?;
        let mut total = 0.0;
        let mut uncertainty = 0.0;
        let mut mode_rows = Vec::new();
        for m in &modes {
            let i = m.index - 1;
            let diff = x.get(i).copied().unwrap_or(0.0) - y.get(i).copied().unwrap_or(0.0);
            if diff == 0.0 {
                continue;
            }
            let grid = compute_density(&mode_law(m, t)?, &opts)?;
            let (norm, unc) = shifted_norm(&grid, (-m.gamma * t).exp() * diff)?;
            total += norm;
            uncertainty += unc;
            mode_rows.push(
                Row::new(
                    t,
                    Some(m.index),
                    "tv_mode",
                    norm,
                    2.0 * c.value * diff.abs(),
                    cfg.tolerances.slack + unc,
                )
                .with("shift", (-m.gamma * t).exp() * diff.abs()),
            );
        }
        let dist = bounds::coefficient_distance(&x, &y);
        let mut row = Row::new(
            t,
            None,
            "tv_proxy",
            total,
            bounds::tv_upper_bound(&c, &x, &y),
            cfg.tolerances.slack + uncertainty,
        )
        .with("distance", dist)
        .with("c_t", c.value);
        if let Some(v) = c_sub {
            row = row.with("c_t_sub", v);
        }
        if let Some(v) = c_gen {
            row = row.with("c_t_general", v);
        }
        report.rows.push(row);
        report.rows.extend(mode_rows);
    }
    report.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

/// One-mode gradient norms `e^{-γt}∫|p'|` against their per-mode share of `A_t`,
/// then the mode maximum against `A_t` and `A_t` against the subordinate `C_t`.
pub fn run_gradient_check(cfg: &ScenarioConfig) -> Result<RunReport> {
    require_t_grid(cfg)?;
    let (mut report, clock) = started("gradient_check", cfg);
    let n = cfg.modes_in_use().min(cfg.exact_modes.max(1));
    let modes = cfg.spectrum.modes(n)?;
    let opts = DensityOptions::default();
    let slack = cfg.tolerances.slack;
    for &t in &cfg.t_grid {
        let a = bounds::a_t(&cfg.spectrum, t, cfg.k_max)?;
        let c = bounds::c_t_subordinate(&cfg.spectrum, t, cfg.k_max)?;
        let per_mode: Vec<(Row, Row, f64)> = modes
            .par_iter()
            .map(|m| {
                let law = mode_law(m, t)?;
                let grid = compute_density(&law, &opts)?;
                let g = gradient_norm_1d(&grid, m.gamma, t);
                let share = bounds::mode_term(FormulaId::AT, m, t)?.term;
                let f = m
                    .noise
                    .subordinate_exponent()
                    .ok_or_else(|| Error::Unsupported(format!("mode {} is not subordinate", m.index)))?;
                let decay = decay_of_exponent(&IntegratedExponent::new(f, m.gamma, t)?, 1.0)?.value_or_inf();
                let fisher = fisher_integral(&grid)?.value;
                Ok((
                    Row::new(t, Some(m.index), "gradient_norm", g, (2.0 * share).sqrt(), slack),
                    Row::new(t, Some(m.index), "fisher", fisher, 2.0 * decay, slack.max(1e-4 * fisher)),
                    g,
                ))
            })
            .collect::<Result<_>>()?;
        let max_g = per_mode.iter().map(|p| p.2).fold(0.0, f64::max);
        report.rows.push(Row::new(t, None, "max_gradient_norm", max_g, a.value, slack).with("argmax_mode_a_t", a.argmax_mode as f64));
        report.rows.push(Row::new(t, None, "A_t", a.value, c.value, slack * a.value.max(1.0)));
        for (g, f, _) in per_mode {
            report.rows.push(g);
            report.rows.push(f);
        }
    }
    report.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

/// `‖law(σX) - law(σ'X)‖_var ≤ 2 log(σ'/σ)` for a symmetric unimodal `X` and
/// `σ ≤ σ'`; with stable scales this is `-(2/α) log(1 - e^{-αγt})`.
pub fn stable_scale_gap_bound(alpha: f64, gamma: f64, t: f64) -> f64 {
    (-(2.0 / alpha) * (-(-alpha * gamma * t).exp()).ln_1p()).min(2.0)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Distance of `P_t(x0,·)` to the invariant law versus the explicit ergodicity bound.
pub fn run_ergodicity(cfg: &ScenarioConfig) -> Result<RunReport> {
    require_t_grid(cfg)?;
    let opts = criterion_options(cfg);
    let (s2, sa) = ergodicity_criterion(&cfg.spectrum, cfg.alpha_m, &opts)?;
    for r in [&s2, &sa] {
        if r.verdict != Verdict::Finite {
            return Err(Error::Divergent(format!(
                "criterion {} is {:?} at {} modes (fitted exponent {:?}); run the criteria command for the per-mode report",
                r.criterion, r.verdict, r.modes_used, r.fitted_exponent
            )));
        }
    }
    let (mut report, clock) = started("ergodicity", cfg);
    report.notes.push(PROXY_NOTE.into());
    report.notes.push(NORM_NOTE.into());
    report.notes.push(format!(
        "modes beyond the first {} use the scale-gap bound -(2/alpha) log(1 - exp(-alpha gamma t))",
        cfg.exact_modes
    ));
    let x = cfg.x0_vec()?;
    let n_all = cfg.spectrum.len().map_or(cfg.n_max, |len| len.min(cfg.n_max));
    let modes = cfg.spectrum.modes(n_all)?;
    let n_exact = cfg.exact_modes.max(x.len()).min(modes.len());
    let stable: Vec<(f64, f64)> = modes
        .iter()
        .map(|m| {
            m.noise
                .stable_params()
                .ok_or_else(|| Error::Unsupported(format!("mode {} is not stable; the invariant law is not explicit", m.index)))
        })
        .collect::<Result<_>>()?;
    let dopts = DensityOptions::default();
    let mut proxies = Vec::new();
    let mut c_alphas = Vec::new();
    for &t in &cfg.t_grid {
        let c = bounds::c_t_general(&cfg.spectrum, t, cfg.k_max)?;
        let bound = bounds::ergodicity_bound(&c, &s2, &sa, &x, cfg.alpha_m)?;
        let exact: Vec<(f64, f64)> = modes[..n_exact]
            .par_iter()
            .map(|m| {
                let shift = (-m.gamma * t).exp() * x.get(m.index - 1).copied().unwrap_or(0.0);
                let (stationary, now) = compute_density_pair(&mode_law(m, f64::INFINITY)?, &mode_law(m, t)?, &dopts)?;
                if shift.abs() > stationary.half_width / 4.0 {
                    return Ok((2.0, 0.0));
                }
                let tv = tv_between(&stationary, &now, shift)?;
                Ok((2.0 * tv.value, 2.0 * tv.uncertainty))
            })
            .collect::<Result<_>>()?;
        let exact_part: f64 = exact.iter().map(|e| e.0).sum();
        let unc: f64 = exact.iter().map(|e| e.1).sum();
        let tail_part: f64 = modes[n_exact..]
            .iter()
            .zip(&stable[n_exact..])
            .map(|(m, (alpha, _))| stable_scale_gap_bound(*alpha, m.gamma, t))
            .sum();
        let proxy = exact_part + tail_part;
        proxies.push(proxy);
        c_alphas.push(c.value.powf(cfg.alpha_m));
        report.rows.push(
            Row::new(t, None, "tv_to_stationary", proxy, bound, cfg.tolerances.slack + unc)
                .with("c_t_general", c.value)
                .with("exact_part", exact_part)
                .with("tail_part", tail_part)
                .with("s2", s2.value.unwrap_or(f64::INFINITY))
                .with("s_alpha", sa.value.unwrap_or(f64::INFINITY)),
        );
    }
    let monotone = proxies.windows(2).all(|w| w[1] <= w[0]);
    report.notes.push(format!("proxy nonincreasing in t: {monotone}"));
    let (lx, ly): (Vec<f64>, Vec<f64>) = c_alphas
        .iter()
        .zip(&proxies)
        .filter(|(c, p)| **c > 0.0 && **p > 0.0)
        .map(|(c, p)| (c.ln(), p.ln()))
        .unzip();
    if let Some(s) = least_squares_slope(&lx, &ly) {
        report.notes.push(format!("diagnostic slope of log proxy against log C_t^alpha_m: {s:.4}"));
    }
    report.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

/// Monte Carlo mean of `‖X_t‖^{α_m}` over the truncated field against
/// `‖x0‖^{α_m} + S₂^{α_m/2} + S_α` plus the analytic truncation tail.
pub fn run_moment_check(cfg: &ScenarioConfig) -> Result<RunReport> {
    require_t_grid(cfg)?;
    if cfg.mc_replicates < 2 {
        return Err(Error::Config("mc_replicates: need at least two replicates".into()));
    }
    let opts = criterion_options(cfg);
    let (s2, sa) = ergodicity_criterion(&cfg.spectrum, cfg.alpha_m, &opts)?;
    let (m2, ma) = match (s2.value, sa.value, s2.verdict, sa.verdict) {
        (Some(a), Some(b), Verdict::Finite, Verdict::Finite) => (a, b),
        _ => return Err(Error::Divergent("moment sums are not finite".into())),
    };
    let (mut report, clock) = started("moments", cfg);
    let n = cfg.modes_in_use();
    let tail = truncation_tail_bound(&cfg.spectrum, n, cfg.alpha_m, &opts)?;
    let model = FieldModel::new(&cfg.spectrum, n, scenario_id(&cfg.name))?.with_tail_bound(tail);
    let rng = RngStreamSpec::new(cfg.master_seed);
    let x = cfg.x0_vec()?;
    let limit = bounds::coefficient_distance(&x, &[]).powf(cfg.alpha_m) + m2.powf(0.5 * cfg.alpha_m) + ma;
    for &t in &cfg.t_grid {
        let samples = model.sample_many(&x, t, &rng, cfg.mc_replicates)?;
        let vals: Vec<f64> = samples.iter().map(|s| s.norm().powf(cfg.alpha_m)).collect();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        let se = (var / m).sqrt();
        report.rows.push(
            Row::new(t, None, "alpha_moment", mean, limit, cfg.tolerances.slack + 3.0 * se)
                .with("std_err", se)
                .with("truncation_n", n as f64)
                .with("tail_norm_bound", tail),
        );
    }
    report.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

/// Closed-form threshold against numeric criteria over a heat-equation grid.
pub fn run_membership_sweep(grid: &SweepGrid, cfg: &ScenarioConfig) -> Result<RunReport> {
    let (mut report, clock) = started("sweep", cfg);
    report
        .notes
        .push("alpha_m = min(alpha, 1)/2 in every cell; conclusive means the state-space verdict is conclusive".into());
    let opts = criterion_options(cfg);
    let mut cells = Vec::new();
    for &d in &grid.d {
        for &alpha in &grid.alpha {
            for &beta in &grid.beta {
                cells.push((d, alpha, beta));
            }
        }
    }
    let phase: Vec<PhaseCell> = cells
        .par_iter()
        .map(|&(d, alpha, beta)| {
            let spectrum = SpectrumSpec::heat_equation(d, alpha, beta, 1.0)?;
            let thr = heat_equation_threshold(d, alpha, beta)?;
            let alpha_m = 0.5 * alpha.min(1.0);
            let ss = state_space_criterion(&spectrum, &opts)?;
            let (s2, sa) = ergodicity_criterion(&spectrum, alpha_m, &opts)?;
            let conclusive = ss.verdict != Verdict::Inconclusive;
            let agrees = conclusive.then(|| {
                [ss.verdict, s2.verdict, sa.verdict]
                    .iter()
                    .filter(|v| **v != Verdict::Inconclusive)
                    .all(|v| (*v == Verdict::Finite) == thr.met)
            });
            Ok(PhaseCell {
                d,
                alpha,
                beta,
                alpha_m,
                margin: thr.margin,
                threshold_met: thr.met,
                state_space: ss.verdict,
                s2: s2.verdict,
                s_alpha: sa.verdict,
                fitted_exponent: ss.fitted_exponent,
                conclusive,
                agrees,
            })
        })
        .collect::<Result<_>>()?;
    let conclusive = phase.iter().filter(|c| c.conclusive).count();
    report.notes.push(format!("conclusive cells: {conclusive} of {}", phase.len()));
    report.phase = phase;
    report.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasureSpec;
    use std::f64::consts::PI;

    fn cauchy_cfg(x: f64) -> ScenarioConfig {
        let spectrum = SpectrumSpec::explicit(vec![(
            1.0,
            ModeNoise::Levy(LevyMeasureSpec::stable_sym(1.0, 1.0 / PI).unwrap()),
        )])
        .unwrap();
        let mut cfg = ScenarioConfig::new(spectrum);
        cfg.t_grid = vec![0.5, 1.0, 2.0];
        cfg.x0.insert("1".into(), x);
        cfg
    }

    #[test]
    fn cauchy_tv_decay_matches_closed_form() {
        let cfg = cauchy_cfg(1.0);
        let rep = run_tv_decay(&cfg).unwrap();
        assert!(rep.violations().is_empty());
        for r in rep.rows.iter().filter(|r| r.quantity == "tv_proxy") {
            let sigma = 1.0 - (-r.t).exp();
            let delta = (-r.t).exp();
            let exact = 2.0 * 2.0 / PI * (delta / (2.0 * sigma)).atan();
            assert!((r.value - exact).abs() < 1e-5, "{} {exact}", r.value);
        }
        let same = run_tv_decay(&cauchy_cfg(0.0)).unwrap();
        assert!(same.rows.iter().all(|r| r.value == 0.0 && r.satisfied));
    }

    #[test]
    fn gradient_rows_hold() {
        let rep = run_gradient_check(&cauchy_cfg(1.0)).unwrap();
        assert!(rep.violations().is_empty(), "{:?}", rep.violations());
        let g = rep.rows.iter().find(|r| r.quantity == "gradient_norm" && r.t == 1.0).unwrap();
        let sigma = 1.0 - (-1.0f64).exp();
        assert!((g.value - (-1.0f64).exp() * 2.0 / (PI * sigma)).abs() < 1e-6);
    }

    #[test]
    fn scale_gap_bound_dominates_exact() {
        let (alpha, gamma, t) = (1.0, 1.0, 0.7);
        let a = StableExponent { alpha, scale: 1.0 };
        let b = StableExponent {
            alpha,
            scale: ou_stable_scale(alpha, gamma, t),
        };
        let (p, q) = compute_density_pair(&a, &b, &DensityOptions::default()).unwrap();
        let exact = 2.0 * tv_between(&p, &q, 0.0).unwrap().value;
        assert!(exact <= stable_scale_gap_bound(alpha, gamma, t));
    }

    #[test]
    fn ergodicity_refuses_divergent_spectrum() {
        let mut cfg = ScenarioConfig::new(SpectrumSpec::heat_equation(2, 1.0, 1.0, 1.0).unwrap());
        cfg.t_grid = vec![1.0];
        cfg.n_max = 2000;
        let err = run_ergodicity(&cfg).unwrap_err();
        assert!(matches!(err, Error::Divergent(_)));
        assert!(err.to_string().contains("criteria command"));
    }

    #[test]
    fn small_sweep_agrees() {
        let mut cfg = ScenarioConfig::new(SpectrumSpec::heat_equation(1, 1.0, 0.0, 1.0).unwrap());
        cfg.n_max = 4000;
        let grid = SweepGrid {
            d: vec![1, 3],
            alpha: vec![1.0],
            beta: vec![0.0, -2.0],
        };
        let rep = run_membership_sweep(&grid, &cfg).unwrap();
        assert_eq!(rep.phase.len(), 4);
        let cell = |d, b| rep.phase.iter().find(|c| c.d == d && c.beta == b).unwrap();
        assert!(cell(1, 0.0).threshold_met && cell(1, 0.0).agrees == Some(true));
        assert!(!cell(3, 0.0).threshold_met && cell(3, 0.0).state_space == Verdict::Divergent);
        assert!(cell(3, -2.0).threshold_met);
        assert!(rep.disagreements().is_empty());
    }
}
