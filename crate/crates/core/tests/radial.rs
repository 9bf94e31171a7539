use proptest::prelude::*;

use rieszlab_core::radial::{annulus_integral, integrability_check, LogGrid, RadialProfile};
use rieszlab_core::riesz::RieszOrder;

fn grid() -> Vec<f64> {
    LogGrid::new(1e-2, 1e3, 10).unwrap().radii()
}

fn profile() -> impl Strategy<Value = RadialProfile> {
    prop_oneof![
        (0.1f64..3.0, 0.0f64..6.0, -2.0f64..2.0).prop_map(|(a, s, m)| RadialProfile::power_log(a, s, m, &grid()).unwrap()),
        (0.1f64..3.0, 0.2f64..3.0).prop_map(|(a, e)| RadialProfile::bubble(a, e, &grid()).unwrap()),
        (0.1f64..10.0).prop_map(|r| RadialProfile::ball(r, &grid()).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_integral_is_monotone(f in profile(), dim in 1u32..=5, r1 in 0.01f64..50.0, r2 in 0.01f64..50.0) {
        let (a, b) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let ia = f.ball_integral(a, dim).unwrap();
        let ib = f.ball_integral(b, dim).unwrap();
        prop_assert!(ia >= 0.0 && ib >= ia * (1.0 - 1e-12), "{ia} > {ib}");
    }

    #[test]
    fn annulus_integrals_nest(f in profile(), dim in 1u32..=5, r in 0.01f64..50.0) {
        let ann = annulus_integral(&f, r, 1.0, dim).unwrap();
        let b2 = f.ball_integral(2.0 * r, dim).unwrap();
        let b4 = f.ball_integral(4.0 * r, dim).unwrap();
        let slack = 1e-12 * b4;
        prop_assert!(ann <= b2 + slack && b2 <= b4 + slack, "{ann}, {b2}, {b4}");
    }

    #[test]
    fn closed_form_powers_compose(f in profile(), p in 0.2f64..3.0, q in 0.2f64..3.0) {
        let twice = f.power(p).unwrap().power(q).unwrap();
        let once = f.power(p * q).unwrap();
        for r in [0.0, 0.05, 0.7, 1.3, 9.0, 40.0, 2e3] {
            let (a, b) = (twice.evaluate(r), once.evaluate(r));
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "r = {r}: {a} vs {b}");
        }
        // (s p) q and s (p q) may differ in the last bit
        let (a, b) = (twice.tail().power, once.tail().power);
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs(), "tail powers {a} vs {b}");
    }

    /// Well-defined iff the tail decays faster than r^-gamma, or exactly like
    /// it with a log power below -1.
    #[test]
    fn integrability_follows_the_tail_exponent(
        n in 2u32..=5,
        t in 0.05f64..0.95,
        k in -8i32..8,
        m in prop::sample::select(vec![-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 1.0]),
    ) {
        let gamma = t * n as f64;
        let order = RieszOrder::new(gamma, n).unwrap();
        let s = gamma + k as f64 / 4.0;
        prop_assume!(s >= 0.0);
        let f = RadialProfile::power_log(1.0, s, m, &grid()).unwrap();
        let want = k > 0 || (k == 0 && m < -1.0);
        prop_assert_eq!(integrability_check(&f, &order).unwrap().well_defined, want);
    }
}
