use levy_ou::bernstein::{decay_of_exponent, BernsteinSpec, IntegratedExponent};
use levy_ou::bounds;
use levy_ou::levy::LevyMeasureSpec;
use levy_ou::spectrum::{ModeNoise, SpectrumSpec};
use proptest::prelude::*;

fn catalogue() -> impl Strategy<Value = BernsteinSpec> {
    prop_oneof![
        (0.1f64..0.99, 0.1f64..5.0).prop_map(|(a, c)| BernsteinSpec::stable(a, c).unwrap()),
        (0.1f64..0.99, 0.1f64..3.0).prop_map(|(a, m)| BernsteinSpec::relativistic(a, m).unwrap()),
        (0.1f64..3.0).prop_map(|b| BernsteinSpec::log(b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrated_exponent_is_monotone(f in catalogue(), g in 0.1f64..4.0, t in 0.05f64..5.0, r in 1e-3f64..1e3, k in 1.01f64..10.0) {
        let e = IntegratedExponent::new(f.clone(), g, t).unwrap();
        let (lo, hi) = (e.eval(r).unwrap(), e.eval(k * r).unwrap());
        prop_assert!(lo >= 0.0);
        prop_assert!(hi >= lo * (1.0 - 1e-12));
        let later = IntegratedExponent::new(f, g, t * k).unwrap();
        prop_assert!(later.eval(r).unwrap() >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn stable_exponent_scales(a in 0.1f64..0.99, c in 0.1f64..5.0, g in 0.1f64..4.0, t in 0.05f64..5.0, r in 1e-3f64..1e3, lambda in 0.1f64..10.0) {
        let e = IntegratedExponent::new(BernsteinSpec::stable(a, c).unwrap(), g, t).unwrap();
        let lhs = e.eval(lambda * r).unwrap();
        let rhs = lambda.powf(a) * e.eval(r).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn decay_integral_shrinks_with_time(f in catalogue(), g in 0.1f64..4.0, t in 0.1f64..3.0) {
        let early = decay_of_exponent(&IntegratedExponent::new(f.clone(), g, t).unwrap(), 1.0).unwrap().value_or_inf();
        let late = decay_of_exponent(&IntegratedExponent::new(f, g, 2.0 * t).unwrap(), 1.0).unwrap().value_or_inf();
        prop_assert!(late <= early * (1.0 + 1e-8));
    }

    #[test]
    fn bound_constants_are_ordered(a in 0.3f64..0.95, g in 0.2f64..3.0, t in 0.1f64..4.0) {
        let s = SpectrumSpec::explicit(vec![(g, ModeNoise::Subordinate(BernsteinSpec::stable(a, 1.0).unwrap()))]).unwrap();
        let at = bounds::a_t(&s, t, 10).unwrap().value;
        let cs = bounds::c_t_subordinate(&s, t, 10).unwrap().value;
        prop_assert!(at <= cs * (1.0 + 1e-8), "A_t {} > C_sub {}", at, cs);
    }

    #[test]
    fn cauchy_constants_decrease_in_time(t in 0.1f64..4.0) {
        let s = SpectrumSpec::explicit(vec![(1.0, ModeNoise::Levy(LevyMeasureSpec::stable_sym(1.0, 1.0).unwrap()))]).unwrap();
        let now = bounds::c_t_general(&s, t, 10).unwrap().value;
        let later = bounds::c_t_general(&s, 1.5 * t, 10).unwrap().value;
        prop_assert!(later <= now * (1.0 + 1e-8));
    }
}

