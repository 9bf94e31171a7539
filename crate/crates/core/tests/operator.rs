use std::sync::OnceLock;

use num::{BigInt, BigRational};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rieszlab_core::exponent::{certify_construction, ConstructionCertificate, FreeParams};
use rieszlab_core::radial::{LogGrid, RadialProfile};
use rieszlab_core::rational::{parse_rational, to_f64};
use rieszlab_core::region::{classify, ParameterPoint, Regime};
use rieszlab_core::riesz::TableSpec;
use rieszlab_core::verifier::{
    apply_t, certify_supersolution, check_annulus_bounds, check_positivity_principle, fixed_point_explore,
    standard_bumps, sweep, Bump, DoublePotential, ExactRange, Label, SweepSpec,
};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn small_spec() -> TableSpec {
    TableSpec {
        grid: LogGrid::new(1e-2, 1e3, 10).unwrap(),
        ..TableSpec::default()
    }
}

/// N = 3, alpha = beta = 1, p = q = 3 on a coarse grid.
fn b1_operator() -> &'static DoublePotential {
    static DP: OnceLock<DoublePotential> = OnceLock::new();
    DP.get_or_init(|| {
        let pt = ParameterPoint::parse(3, "1", "1", "3", "3").unwrap();
        DoublePotential::new(&pt, &small_spec()).unwrap()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_scales_with_degree_p_plus_q(amp in 0.1f64..5.0, a in 1.0f64..4.0, m in -1.0f64..1.0, e in -2.0f64..2.0) {
        let dp = b1_operator();
        let lambda = 10f64.powf(e);
        let u = RadialProfile::power_log(amp, a, m, dp.radii()).unwrap();
        let tu = dp.apply(&u).unwrap();
        let tlu = dp.apply(&u.scaled(lambda)).unwrap();
        let factor = lambda.powi(6);
        for (x, y) in tlu.values().iter().zip(tu.values()) {
            prop_assert!(rel(*x, factor * y) <= 1e-12, "{x} vs {}", factor * y);
        }
        prop_assert_eq!(tlu.tail().power, tu.tail().power);
        prop_assert_eq!(tlu.tail().logpower, tu.tail().logpower);
        prop_assert!(rel(tlu.tail().coefficient, factor * tu.tail().coefficient) <= 1e-12);
    }

    #[test]
    fn operator_is_monotone(a1 in 0.5f64..3.0, k in 1.0f64..3.0, a2 in 0.5f64..4.0, da in 0.0f64..2.0) {
        let dp = b1_operator();
        // (1+r)^{-s} with a smaller exponent and a larger amplitude dominates
        let u = RadialProfile::power_log(a1, a2 + da, 0.0, dp.radii()).unwrap();
        let v = RadialProfile::power_log(a1 * k, a2, 0.0, dp.radii()).unwrap();
        let (tu, tv) = (dp.apply(&u).unwrap(), dp.apply(&v).unwrap());
        for (i, (x, y)) in tu.values().iter().zip(tv.values()).enumerate() {
            prop_assert!(*x <= y * (1.0 + 1e-12), "r = {}: Tu = {x} > Tv = {y}", dp.radii()[i]);
        }
    }
}

#[test]
fn apply_t_matches_the_shared_operator() {
    let dp = b1_operator();
    let u = RadialProfile::power_log(1.0, 2.0, 0.0, dp.radii()).unwrap();
    let direct = apply_t(dp.point(), &u, &small_spec()).unwrap();
    assert_eq!(direct.values(), dp.apply(&u).unwrap().values());
}

fn sample_point(rng: &mut ChaCha8Rng, regime: Regime) -> ParameterPoint {
    loop {
        let n = rng.gen_range(2..=5u32);
        let alpha = rat(rng.gen_range(1..4 * n as i64), 4);
        let mut beta = rat(rng.gen_range(1..4 * n as i64), 4);
        let p = rat(rng.gen_range(1..=48), 8);
        let mut q = rat(rng.gen_range(1..=40), 8);
        let nn = rat(n as i64, 1);
        match regime {
            Regime::B1plus => beta = &nn - &alpha,
            Regime::B1plusplus if &alpha + &beta >= nn => continue,
            _ => {}
        }
        if matches!(regime, Regime::B1plus | Regime::B1plusplus) {
            q = &beta / (&nn - &alpha);
        }
        let Ok(pt) = ParameterPoint::new(n, alpha, beta, p, q) else {
            continue;
        };
        if classify(&pt).regime == Some(regime) {
            return pt;
        }
    }
}

/// Size at radius `r` of the slowest preasymptotic correction to the log-log
/// slope. A Riesz step with input order `(s, sigma)` off s = N leaves a
/// relative term `r^{-|s-N|} (ln r)^|sigma|`; at s = N (the outer step of
/// B1plusplus) the potential is `(ln r)^{sigma+1} / (sigma+1)` plus a near
/// field of relative size `(sigma+1) / ln r`, which moves the slope by about
/// `(sigma+1) / (ln r)^2`.
fn preasymptotic_size(pt: &ParameterPoint, cert: &ConstructionCertificate, r: f64) -> f64 {
    let n = pt.n as f64;
    let l = r.ln();
    cert.chain
        .steps()
        .iter()
        .filter(|s| s.op.starts_with("riesz"))
        .map(|s| {
            let gap = (to_f64(&s.input.s) - n).abs();
            let sigma = to_f64(&s.input.sigma);
            if gap == 0.0 {
                (sigma + 1.0).abs() / (l * l)
            } else {
                r.powf(-gap) * l.powf(sigma.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// The measured log-log slope of T u over the last grid decade matches the
/// symbolic final order (-s plus the log correction) to 0.05.
#[test]
fn symbolic_orders_match_measured_slopes() {
    let spec = TableSpec {
        grid: LogGrid::new(1e-2, 1e6, 20).unwrap(),
        ..TableSpec::default()
    };
    let (r1, r2) = (1e5f64, 1e6f64);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = (0.0f64, String::new());
    for regime in Regime::ALL {
        let mut done = 0;
        while done < 20 {
            let pt = sample_point(&mut rng, regime);
            let cert = certify_construction(&pt, regime, &FreeParams::default()).unwrap();
            if preasymptotic_size(&pt, &cert, r1) > 0.02 {
                continue;
            }
            let dp = DoublePotential::new(&pt, &spec).unwrap();
            let tu = dp.apply(&dp.shape_profile(&cert.profile).unwrap()).unwrap();
            let at = |r: f64| {
                let i = tu.grid().iter().position(|&x| rel(x, r) < 1e-9).unwrap();
                tu.values()[i]
            };
            let measured = (at(r2) / at(r1)).ln() / (r2 / r1).ln();
            let (s, sigma) = (to_f64(&cert.final_order.s), to_f64(&cert.final_order.sigma));
            let predicted = -s + sigma * (r2.ln().ln() - r1.ln().ln()) / (r2 / r1).ln();
            let err = (measured - predicted).abs();
            assert!(err <= 0.05, "{regime} {pt}: slope {measured:.4}, predicted {predicted:.4}");
            if err > worst.0 {
                worst = (err, format!("{regime} {pt}"));
            }
            done += 1;
        }
    }
    println!("worst slope error {:.4} at {}", worst.0, worst.1);
}

#[test]
fn random_existence_points_certify_numerically() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for regime in Regime::ALL {
        for _ in 0..3 {
            let pt = sample_point(&mut rng, regime);
            let cert = certify_construction(&pt, regime, &FreeParams::default()).unwrap();
            let dp = DoublePotential::new(&pt, &TableSpec::default()).unwrap();
            let u = dp.shape_profile(&cert.profile).unwrap();
            let rep = certify_supersolution(&dp, &u).unwrap();
            assert!(rep.passed, "{pt}: residual {:.2e}, tail {:.2e}", rep.residual, rep.tail_residual);
            assert!(rep.residual >= -1e-6 && rep.tail_residual >= -1e-6);

            let big_u = u.scaled(rep.scaling);
            let bumps: Vec<Bump> = [0.05, 0.3, 0.5, 0.95].into_iter().map(Bump::new).collect();
            let pos = check_positivity_principle(&dp, &big_u, &[0.5, 3.0, 30.0, 300.0], &bumps).unwrap();
            assert!(pos.passed && pos.min_ratio >= 1.0, "{pt}: positivity ratio {}", pos.min_ratio);
        }
    }
}

#[test]
fn certified_b1_solutions_decay_sharply() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let pt = sample_point(&mut rng, Regime::B1);
        let cert = certify_construction(&pt, Regime::B1, &FreeParams::default()).unwrap();
        let dp = DoublePotential::new(&pt, &TableSpec::default()).unwrap();
        let u = dp.shape_profile(&cert.profile).unwrap();
        let rep = certify_supersolution(&dp, &u).unwrap();
        let ann = check_annulus_bounds(&dp, &u.scaled(rep.scaling), &[1.0, 10.0, 100.0, 1000.0]).unwrap();
        let (lo, hi) = ann.sharpness;
        assert!(lo > 0.0 && hi.is_finite() && lo <= hi, "{pt}: ({lo}, {hi})");
        assert!(ann.lower_floor > 0.0);
    }
}

#[test]
fn positivity_is_trivial_for_the_zero_weight() {
    let dp = b1_operator();
    let zero = RadialProfile::zero(dp.radii()).unwrap();
    let rep = check_positivity_principle(dp, &zero, &[1.0, 10.0], &standard_bumps());
    if let Ok(rep) = rep {
        assert!(rep.passed);
        assert!(rep.checks.iter().all(|c| c.rhs == 0.0));
    }
}

#[test]
fn explorer_labels_reference_points() {
    let spec = TableSpec::default();
    let pt = ParameterPoint::parse(3, "1", "1", "3", "3").unwrap();
    let cert = certify_construction(&pt, Regime::B1, &FreeParams::default()).unwrap();
    let dp = DoublePotential::new(&pt, &spec).unwrap();
    let u = dp.shape_profile(&cert.profile).unwrap();
    let seed = u.scaled(certify_supersolution(&dp, &u).unwrap().scaling);
    let ex = fixed_point_explore(&dp, &seed, 50);
    assert_eq!(ex.label, Label::Converged, "{ex:?}");
    // the limit is reproduced by T up to amplitude and dilation
    let v = ex.shape.clone().unwrap();
    let c = *ex.trajectory.last().unwrap();
    let mu = ex.dilation;
    assert!(mu.is_finite() && mu > 0.0);
    let tv = dp.apply(&v).unwrap();
    let last = *v.grid().last().unwrap();
    for (&r, &t) in v.grid().iter().zip(tv.values()).filter(|(r, _)| **r * mu <= last) {
        let want = c * v.evaluate(mu * r);
        // v(mu r) falls between nodes; log-linear interpolation at 40 per decade
        assert!(rel(t, want) < 3e-3, "r = {r}: {t} vs {want}");
    }
    // at the reported amplitude T keeps the sup norm
    let scaled = v.scaled(ex.final_sup_norm);
    let sup = dp.apply(&scaled).unwrap().sup_norm();
    assert!(rel(sup, ex.final_sup_norm) < 1e-3, "{sup} vs {}", ex.final_sup_norm);

    let low = dp.with_exponents(&parse_rational("0.3").unwrap(), &parse_rational("0.3").unwrap()).unwrap();
    let ex = fixed_point_explore(&low, &seed, 50);
    assert!(matches!(ex.label, Label::Decayed | Label::Diverged), "{:?}", ex.label);

    let zero = RadialProfile::zero(dp.radii()).unwrap();
    let ex = fixed_point_explore(&dp, &zero, 50);
    assert_eq!(ex.label, Label::Decayed);
    assert_eq!(ex.iterations, 0);
}

#[test]
fn sweep_cells_match_single_point_runs() {
    let table = small_spec();
    let spec = |p: &str, q: &str, budget| SweepSpec {
        n: 3,
        alpha: rat(1, 1),
        beta: rat(1, 1),
        p: ExactRange::parse(p).unwrap(),
        q: ExactRange::parse(q).unwrap(),
        budget,
        table: table.clone(),
    };
    let many = sweep(&spec("1:2:0.5", "0.5:1.5:0.5", 30)).unwrap();
    assert_eq!(many.cells.len(), 9);
    for cell in &many.cells {
        let r = |x: f64| format!("{x}:{x}:1");
        let one = sweep(&spec(&r(cell.p), &r(cell.q), 30)).unwrap();
        assert_eq!(one.cells.len(), 1);
        let c = &one.cells[0];
        assert_eq!((c.empirical_label, c.iterations, c.exists_theorem), (cell.empirical_label, cell.iterations, cell.exists_theorem));
        assert_eq!(c.final_sup_norm.to_bits(), cell.final_sup_norm.to_bits());
    }
    let idle = sweep(&spec("1:2:0.5", "0.5:1.5:0.5", 0)).unwrap();
    assert!(idle.cells.iter().all(|c| c.empirical_label == Label::Inconclusive));
    let verdicts: Vec<(bool, &str)> = many.cells.iter().map(|c| (c.exists_theorem, c.regime_or_witness.as_str())).collect();
    let idle_verdicts: Vec<(bool, &str)> = idle.cells.iter().map(|c| (c.exists_theorem, c.regime_or_witness.as_str())).collect();
    assert_eq!(verdicts, idle_verdicts);
    assert_eq!(many.to_csv(), sweep(&spec("1:2:0.5", "0.5:1.5:0.5", 30)).unwrap().to_csv());
}
