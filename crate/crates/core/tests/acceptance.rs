//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use levy_ou::bernstein::{
    decay_of_exponent, exp_decay_integral, geometric_grid, verify_complete_monotonicity, BernsteinSpec,
    IntegratedExponent, MonotonicityVerdict,
};
use levy_ou::bounds;
use levy_ou::density::{compute_density, fisher_integral, gradient_norm_1d, tv_distance_1d, DensityOptions, StableExponent};
use levy_ou::experiments::{run_ergodicity, run_membership_sweep, run_moment_check, ScenarioConfig, SweepGrid};
use levy_ou::levy::{stable_symbol_constant, LevyMeasureSpec};
use levy_ou::simulate::{empirical_cf, max_cf_deviation, sample_ou_stable_convolution, RngStreamSpec};
use levy_ou::spectrum::{ModeNoise, SpectrumSpec};
use statrs::function::gamma::gamma;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Adaptive Simpson, independent of the library's Gauss-Kronrod code.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn cauchy_spectrum() -> SpectrumSpec {
    SpectrumSpec::explicit(vec![(
        1.0,
        ModeNoise::Levy(LevyMeasureSpec::stable_sym(1.0, 1.0 / PI).unwrap()),
    )])
    .unwrap()
}

fn c1_closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for a in [0.3, 0.5, 0.8, 1.0] {
        for c in [0.5, 2.0] {
            for g in [0.5, 2.0] {
                for t in [0.5, 2.0] {
                    let f = BernsteinSpec::stable(a, c).unwrap();
                    let e = IntegratedExponent::new(f.clone(), g, t).unwrap();
                    let ct = c * (1.0 - (-2.0 * a * g * t).exp()) / (2.0 * a * g);
                    for r in [1e-3f64, 0.1, 1.0, 10.0, 1e3] {
                        let closed = ct * r.powf(a);
                        let oracle = simpson(&|s: f64| f.eval((-2.0 * g * s).exp() * r), 0.0, t, 1e-13 * closed);
                        worst = worst.max(rel(e.eval(r).unwrap(), closed));
                        worst = worst.max(rel(e.eval_quadrature(r).unwrap(), closed));
                        worst = worst.max(rel(oracle, closed));
                        points += 3;
                    }
                    for kappa in [1.0, 0.5 * 1f64.cos()] {
                        let closed = gamma(1.0 + 1.0 / a) * (kappa * ct).powf(-1.0 / a);
                        let via_quadrature = exp_decay_integral(|r| e.eval_quadrature(r).map(|v| kappa * v), 1e-10)
                            .unwrap()
                            .value_or_inf();
                        worst = worst.max(rel(via_quadrature, closed));
                        worst = worst.max(rel(decay_of_exponent(&e, kappa).unwrap().value_or_inf(), closed));
                        points += 2;
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:.2e} over {points} comparisons"))
}

fn c2_fisher() -> Outcome {
    let opts = DensityOptions::default();
    let cauchy = compute_density(&StableExponent { alpha: 1.0, scale: 1.0 }, &opts).unwrap();
    let fisher_cauchy = fisher_integral(&cauchy).unwrap().value;
    let mut pass = (fisher_cauchy - 0.5).abs() <= 1e-4;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut combos = 0;
    let catalogue = [
        BernsteinSpec::stable(0.5, 1.0).unwrap(),
        BernsteinSpec::stable(0.75, 1.0).unwrap(),
        BernsteinSpec::stable(0.9, 0.5).unwrap(),
        BernsteinSpec::relativistic(0.5, 1.0).unwrap(),
    ];
    for f in &catalogue {
        for g in [0.5, 2.0] {
            for t in [0.5, 2.0] {
                let e = IntegratedExponent::new(f.clone(), g, t).unwrap();
                let law = move |h: f64| e.eval(h * h);
                let grid = compute_density(&law, &opts).unwrap();
                let fisher = fisher_integral(&grid).unwrap().value;
                let e = IntegratedExponent::new(f.clone(), g, t).unwrap();
                let bound = 2.0 * decay_of_exponent(&e, 1.0).unwrap().value_or_inf();
                worst_gap = worst_gap.max(fisher - bound);
                pass &= fisher <= bound + 1e-4;
                combos += 1;
            }
        }
    }
    outcome(
        pass && combos >= 12,
        format!("cauchy fisher {fisher_cauchy:.7} (exact 0.5); {combos} combos, max fisher - bound {worst_gap:.3e}"),
    )
}

fn c3_chain() -> Outcome {
    let s = cauchy_spectrum();
    let opts = DensityOptions::default();
    let mut violations = 0;
    let mut checks = 0;
    for t in [0.25f64, 0.5, 1.0, 2.0, 4.0] {
        let sigma = 1.0 - (-t).exp();
        let grid = compute_density(&StableExponent { alpha: 1.0, scale: sigma }, &opts).unwrap();
        let grad = gradient_norm_1d(&grid, 1.0, t);
        let a = bounds::a_t(&s, t, 10).unwrap().value;
        let cs = bounds::c_t_subordinate(&s, t, 10).unwrap().value;
        let cg = bounds::c_t_general(&s, t, 10).unwrap().value;
        for d in [0.1, 1.0, 10.0] {
            let tv = tv_distance_1d(&grid, (-t).exp() * d).unwrap().value;
            let chain = [tv, 2.0 * grad * d, 2.0 * a * d, 2.0 * cs * d, 2.0 * cg * d];
            for w in chain.windows(2) {
                checks += 1;
                if w[0] > w[1] {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checks} inequalities"))
}

fn c4_cauchy_tv() -> Outcome {
    let grid = compute_density(&StableExponent { alpha: 1.0, scale: 1.0 }, &DensityOptions::default()).unwrap();
    let tv = tv_distance_1d(&grid, 2.0).unwrap().value;
    let oracle = 2.0 / PI * (2.0f64 / 2.0).atan();
    outcome((tv - oracle).abs() <= 1e-5, format!("tv {tv:.8} vs oracle {oracle:.8}"))
}

fn c5_law() -> Outcome {
    let m = 100_000;
    let h_grid = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0];
    let spec = RngStreamSpec::new(20240601);
    let mut worst: f64 = 0.0;
    let band = 3.0 / (m as f64).sqrt();
    for (i, alpha) in [0.7, 1.0, 1.5].into_iter().enumerate() {
        // unit symmetric α-stable driver: ψ(h) = |h|^α
        let nu = LevyMeasureSpec::stable_sym(alpha, 1.0 / stable_symbol_constant(alpha)).unwrap();
        let sym = nu.symbol();
        for (j, g) in [0.5, 2.0].into_iter().enumerate() {
            for (k, t) in [0.5, 2.0].into_iter().enumerate() {
                let mut rng = spec.stream(5, (3 * i + j) as u64, k as u64);
                let draws: Vec<f64> = (0..m).map(|_| sample_ou_stable_convolution(alpha, g, t, &mut rng)).collect();
                let pts = empirical_cf(&draws, &h_grid);
                worst = worst.max(max_cf_deviation(&pts, |h| sym.ou_symbol(g, t, h).unwrap()));
            }
        }
    }
    outcome(worst <= band, format!("max CF deviation {worst:.5} vs band {band:.5}"))
}

fn c6_sweep() -> Outcome {
    let mut cfg = ScenarioConfig::new(SpectrumSpec::heat_equation(1, 1.0, 0.0, 1.0).unwrap());
    cfg.n_max = 10_000;
    let grid = SweepGrid {
        d: vec![1, 2, 3],
        alpha: vec![0.5, 1.0, 1.5],
        beta: vec![-2.0, -1.0, 0.0, 1.0],
    };
    let rep = run_membership_sweep(&grid, &cfg).unwrap();
    let conclusive = rep.phase.iter().filter(|c| c.conclusive).count();
    let disagree = rep.disagreements().len();
    let share = conclusive as f64 / rep.phase.len() as f64;
    outcome(
        disagree == 0 && share >= 0.9,
        format!("{conclusive}/{} cells conclusive, {disagree} disagreements", rep.phase.len()),
    )
}

fn heat_cfg() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(SpectrumSpec::heat_equation(1, 1.0, 0.0, 1.0).unwrap());
    cfg.name = "heat-1-1-0".into();
    cfg.t_grid = vec![1.0, 2.0, 4.0, 8.0];
    cfg.alpha_m = 0.5;
    cfg.x0.insert("1".into(), 1.0);
    cfg
}

fn c7_ergodicity() -> Outcome {
    let rep = run_ergodicity(&heat_cfg()).unwrap();
    let proxies: Vec<f64> = rep.rows.iter().map(|r| r.value).collect();
    let bounds: Vec<f64> = rep.rows.iter().map(|r| r.bound).collect();
    let below = rep.rows.iter().all(|r| r.value <= r.bound);
    let decreasing = proxies.windows(2).all(|w| w[1] < w[0]);
    outcome(
        below && decreasing,
        format!("proxies {proxies:.4?} vs bounds {bounds:.4?}"),
    )
}

fn c8_moments() -> Outcome {
    let mut cfg = heat_cfg();
    cfg.mc_replicates = 10_000;
    cfg.truncation_n = 64;
    cfg.master_seed = 8;
    let rep = run_moment_check(&cfg).unwrap();
    let means: Vec<f64> = rep.rows.iter().map(|r| r.value).collect();
    let earlier = means[..means.len() - 1].iter().cloned().fold(0.0, f64::max);
    let last = *means.last().unwrap();
    let within = rep.violations().is_empty();
    outcome(
        last <= 1.2 * earlier && within,
        format!("means {means:.4?}, last/max earlier {:.3}, bound {:.3}", last / earlier, rep.rows[0].bound),
    )
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cauchy.json");
    let cfg = r#"{
        "name": "cauchy",
        "spectrum": {"kind": "explicit", "modes": [
            {"gamma": 1.0, "levy": {"kind": "stable_sym", "alpha": 1.0, "intensity": 0.3183098861837907}}
        ]},
        "t_grid": [0.25, 0.5, 1, 2, 4],
        "x0": {"1": 1.0},
        "master_seed": 11
    }"#;
    std::fs::write(&cfg_path, cfg).unwrap();
    let run = |out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_levy-ou"))
            .args(["tv-decay", "--quiet", "--seed", "11", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        (status.code(), std::fs::read(dir.path().join(out).join("tv_decay.csv")).unwrap())
    };
    let (s1, a) = run("a");
    let (s2, b) = run("b");
    outcome(
        s1 == Some(0) && s2 == Some(0) && a == b,
        format!("exit codes {s1:?}/{s2:?}, {} bytes, identical: {}", a.len(), a == b),
    )
}

fn c10_bernstein() -> Outcome {
    let grid = geometric_grid(1e-3, 1e3, 80);
    let mut catalogue = vec![
        BernsteinSpec::stable(0.3, 1.0).unwrap(),
        BernsteinSpec::stable(0.5, 1.0).unwrap(),
        BernsteinSpec::stable(0.75, 2.0).unwrap(),
        BernsteinSpec::stable(0.9, 0.5).unwrap(),
        BernsteinSpec::relativistic(0.5, 1.0).unwrap(),
        BernsteinSpec::relativistic(0.6, 0.5).unwrap(),
        BernsteinSpec::log(0.7).unwrap(),
        BernsteinSpec::log(1.0).unwrap(),
        BernsteinSpec::scaled(BernsteinSpec::relativistic(0.5, 1.0).unwrap(), 2.0).unwrap(),
        BernsteinSpec::time_scaled(BernsteinSpec::log(1.0).unwrap(), 0.5 * 1f64.cos()).unwrap(),
        BernsteinSpec::sum(vec![BernsteinSpec::stable(0.5, 1.0).unwrap(), BernsteinSpec::log(1.0).unwrap()]).unwrap(),
        BernsteinSpec::time_scaled(BernsteinSpec::relativistic(0.6, 0.5).unwrap(), 0.5 * 1f64.cos()).unwrap(),
    ];
    // exponents of the heat-equation modes used across the suite
    for d in [1, 2, 3] {
        for alpha in [0.5, 1.0, 1.5] {
            let s = SpectrumSpec::heat_equation(d, alpha, 0.0, 1.0).unwrap();
            for m in s.modes(3).unwrap() {
                catalogue.extend(m.noise.subordinate_exponent());
                catalogue.extend(m.noise.dominating_exponent());
            }
        }
    }
    let mut failures = Vec::new();
    for f in &catalogue {
        match verify_complete_monotonicity(f, &grid, 5) {
            Ok(MonotonicityVerdict::Pass) => {}
            other => failures.push(format!("{f:?}: {other:?}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} functions to order 5, failures: {failures:?}", catalogue.len()),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome, Duration)> = vec![
        ("closed-form vs quadrature", c1_closed_forms, Duration::from_secs(10)),
        ("fisher inequality", c2_fisher, Duration::from_secs(60)),
        ("single-mode bound chain", c3_chain, Duration::from_secs(60)),
        ("cauchy tv analytic check", c4_cauchy_tv, Duration::from_secs(60)),
        ("ou-stable law correctness", c5_law, Duration::from_secs(120)),
        ("heat-equation phase diagram", c6_sweep, Duration::from_secs(300)),
        ("ergodicity bound", c7_ergodicity, Duration::from_secs(120)),
        ("moment uniformity", c8_moments, Duration::from_secs(120)),
        ("determinism", c9_determinism, Duration::from_secs(120)),
        ("bernstein property suite", c10_bernstein, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(e) => (
                false,
                format!(
                    "panicked: {}",
                    e.downcast_ref::<String>()
                        .cloned()
                        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_default()
                ),
            ),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
