//! Quick golden-value and invariant checks, run by `rieszlab selftest`.

use serde::Serialize;
use std::f64::consts::PI;

use crate::exponent::{certify_construction, FreeParams};
use crate::radial::{LogGrid, RadialProfile};
use crate::region::{classify, nonexistence_witness, ParameterPoint, Regime, WitnessTag};
use crate::riesz::{
    check_semigroup, normalization_constant, potential_at, reduced_kernel, QuadratureSpec, RieszOrder, TableSpec,
};
use crate::verifier::{certify_supersolution, DoublePotential};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> crate::Result<(bool, String)>) -> SelfCheck {
    match f() {
        Ok((passed, detail)) => SelfCheck { name, passed, detail },
        Err(e) => SelfCheck {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn newtonian_ball() -> crate::Result<(bool, String)> {
    let order = RieszOrder::new(2.0, 3)?;
    let spec = QuadratureSpec::default();
    let ball = RadialProfile::ball(1.0, &LogGrid::default().radii())?;
    let at0 = potential_at(&order, &ball, 0.0, &spec)?.value;
    let at2 = potential_at(&order, &ball, 2.0, &spec)?.value;
    let err = (at0 - 0.5).abs().max((at2 - 1.0 / 6.0).abs());
    Ok((err < 1e-8, format!("|u(0) - 1/2|, |u(2) - 1/6| <= {err:.2e}")))
}

fn newtonian_kernel() -> crate::Result<(bool, String)> {
    let order = RieszOrder::new(2.0, 3)?;
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let r = 0.05 + 0.37 * i as f64;
        let s = 7.3 / (1.0 + i as f64);
        let k = reduced_kernel(&order, r, s, &spec)?;
        worst = worst.max((k * r.max(s) - 1.0).abs());
    }
    Ok((worst < 1e-10, format!("max relative deviation from 1/max(r,s): {worst:.2e}")))
}

fn normalization() -> crate::Result<(bool, String)> {
    let a = normalization_constant(&RieszOrder::new(2.0, 3)?);
    let b = normalization_constant(&RieszOrder::new(1.0, 2)?);
    let err = (a * 4.0 * PI - 1.0).abs().max((b * 2.0 * PI - 1.0).abs());
    Ok((err < 1e-12, format!("relative error {err:.2e}")))
}

fn semigroup() -> crate::Result<(bool, String)> {
    let a = RieszOrder::new(0.75, 3)?;
    let ball = RadialProfile::ball(1.0, &LogGrid::default().radii())?;
    let rep = check_semigroup(&a, &a, &ball, &[0.1, 0.9, 1.1, 5.0, 50.0], &QuadratureSpec::default())?;
    Ok((
        rep.max_relative_error <= 1e-5,
        format!("max relative error {:.2e}", rep.max_relative_error),
    ))
}

fn classifier() -> crate::Result<(bool, String)> {
    let table: [(u32, &str, &str, &str, &str, Option<Regime>, Option<WitnessTag>); 6] = [
        (3, "1", "1", "2", "2", Some(Regime::B1), None),
        (4, "2", "2", "3", "1", Some(Regime::B1plus), None),
        (5, "1", "1", "6", "0.2", Some(Regime::B2), None),
        (3, "1", "1", "4", "0.5", Some(Regime::B1plusplus), None),
        (3, "1", "1", "0.4", "5", None, Some(WitnessTag::SmallP)),
        (3, "2", "2", "2", "1", None, Some(WitnessTag::LinearQ)),
    ];
    for (n, a, b, p, q, regime, witness) in table {
        let pt = ParameterPoint::parse(n, a, b, p, q)?;
        let v = classify(&pt);
        let w = if v.exists { None } else { Some(nonexistence_witness(&pt)?.tag) };
        if v.regime != regime || w != witness {
            return Ok((false, format!("{pt}: got {:?} / {:?}", v.regime, w)));
        }
    }
    Ok((true, "6 reference points reproduced".into()))
}

fn constructions() -> crate::Result<(bool, String)> {
    let pts = [
        (Regime::B1, (3, "1", "1", "3", "3")),
        (Regime::B2, (5, "1", "1", "6", "0.2")),
        (Regime::B1plus, (4, "2", "2", "3", "1")),
        (Regime::B1plusplus, (3, "1", "1", "4", "0.5")),
    ];
    for (regime, (n, a, b, p, q)) in pts {
        let pt = ParameterPoint::parse(n, a, b, p, q)?;
        let c = certify_construction(&pt, regime, &FreeParams::default())?;
        if !(c.closure && c.matches_decay) {
            return Ok((false, format!("{regime}: final order {} does not close", c.final_order)));
        }
    }
    Ok((true, "closure for B1, B2, B1plus, B1plusplus".into()))
}

fn supersolution() -> crate::Result<(bool, String)> {
    let pt = ParameterPoint::parse(3, "1", "1", "3", "3")?;
    let spec = TableSpec {
        grid: LogGrid::new(1e-2, 1e3, 20)?,
        ..TableSpec::default()
    };
    let dp = DoublePotential::new(&pt, &spec)?;
    let u = RadialProfile::power_log(1.0, 2.0, 0.0, dp.radii())?;
    let rep = certify_supersolution(&dp, &u)?;
    Ok((rep.passed, format!("c_best {:.4e}, residual {:.2e}", rep.c_best, rep.residual)))
}

/// Runs every check; the suite passes when all entries pass.
pub fn run_selftest() -> Vec<SelfCheck> {
    vec![
        check("newtonian_ball", newtonian_ball),
        check("newtonian_kernel", newtonian_kernel),
        check("normalization", normalization),
        check("semigroup", semigroup),
        check("classifier", classifier),
        check("constructions", constructions),
        check("supersolution", supersolution),
    ]
}
