//! Power-log decay orders and the exponent bookkeeping behind the explicit
//! supersolutions.
//!
//! An order `(s, sigma)` stands for `O(r^{-s} (log r)^sigma)` at infinity; the
//! `loglog` flag stands for `O(r^{-s} log log r)`. For `gamma < s`:
//!
//! ```text
//! s <  N:  I_gamma * v = O(r^{gamma - s})
//! s =  N:  I_gamma * v = O(r^{gamma - N} (log r)^{sigma+1})   sigma > -1
//!                        O(r^{gamma - N} log log r)           sigma = -1
//!                        O(r^{gamma - N})                     sigma < -1
//! s >  N:  I_gamma * v = O(r^{gamma - N})
//! ```

use num::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::{self, half, int, Rational};
use crate::region::{classify, construction_power, log_threshold, Correction, DecayExponent, ParameterPoint, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFlag {
    Plain,
    Loglog,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecayOrder {
    pub s: Rational,
    /// log power; zero when `flag` is `Loglog`
    pub sigma: Rational,
    pub flag: LogFlag,
}

impl DecayOrder {
    pub fn plain(s: Rational, sigma: Rational) -> Self {
        Self {
            s,
            sigma,
            flag: LogFlag::Plain,
        }
    }

    pub fn power(s: Rational) -> Self {
        Self::plain(s, Rational::zero())
    }

    pub fn loglog(s: Rational) -> Self {
        Self {
            s,
            sigma: Rational::zero(),
            flag: LogFlag::Loglog,
        }
    }

    pub fn from_f64(s: f64, sigma: f64) -> Result<Self> {
        Ok(Self::plain(rational::from_f64(s)?, rational::from_f64(sigma)?))
    }

    pub fn is_loglog(&self) -> bool {
        self.flag == LogFlag::Loglog
    }

    /// Growth of the slowly varying factor: `(sigma, 0)` or `(0, 1)` for log log.
    fn log_weight(&self) -> (Rational, u8) {
        match self.flag {
            LogFlag::Plain => (self.sigma.clone(), 0),
            LogFlag::Loglog => (Rational::zero(), 1),
        }
    }
}

impl Ord for DecayOrder {
    /// `Greater` means faster decay: larger `s`, then smaller log weight.
    fn cmp(&self, other: &Self) -> Ordering {
        self.s
            .cmp(&other.s)
            .then_with(|| other.log_weight().cmp(&self.log_weight()))
    }
}

impl PartialOrd for DecayOrder {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for DecayOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Flat {
            s: f64,
            sigma: f64,
            flag: LogFlag,
        }
        Flat {
            s: rational::to_f64(&self.s),
            sigma: rational::to_f64(&self.sigma),
            flag: self.flag,
        }
        .serialize(s)
    }
}

impl fmt::Display for DecayOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.flag {
            LogFlag::Plain => write!(f, "({}, {})", rational::show(&self.s), rational::show(&self.sigma)),
            LogFlag::Loglog => write!(f, "({}, loglog)", rational::show(&self.s)),
        }
    }
}

fn riesz_step(gamma: &Rational, n: u32, o: &DecayOrder) -> Result<(DecayOrder, String)> {
    if o.s <= *gamma {
        return Err(Error::UncontrolledOrder {
            s: rational::to_f64(&o.s),
            gamma: rational::to_f64(gamma),
        });
    }
    let nn = int(n as i64);
    let far = &nn - gamma;
    let absorbed = |what: &str| {
        let eps = (&o.s - gamma) * half();
        (
            DecayOrder::power(&o.s - &eps - gamma),
            format!(
                "{what} <= C r^eps with eps = {}, then gamma < s < N gives s - eps - gamma",
                rational::show(&eps)
            ),
        )
    };
    Ok(match o.s.cmp(&nn) {
        Ordering::Greater => {
            let rule = if o.is_loglog() || o.sigma.is_positive() {
                "s > N: the log factor is absorbed and the potential decays like r^(gamma-N)"
            } else {
                "s > N gives N - gamma"
            };
            (DecayOrder::power(far), rule.to_string())
        }
        Ordering::Less if o.is_loglog() => absorbed("log log r"),
        Ordering::Less if o.sigma.is_positive() => absorbed("(log r)^sigma"),
        Ordering::Less => (
            DecayOrder::power(&o.s - gamma),
            if o.sigma.is_zero() {
                "gamma < s < N gives s - gamma".to_string()
            } else {
                "(log r)^sigma <= 1 for sigma < 0, then gamma < s < N gives s - gamma".to_string()
            },
        ),
        Ordering::Equal if o.is_loglog() => return Err(Error::LoglogUnsupported),
        Ordering::Equal => {
            let minus_one = -Rational::one();
            match o.sigma.cmp(&minus_one) {
                Ordering::Less => (DecayOrder::power(far), "s = N with sigma < -1 gives N - gamma".to_string()),
                Ordering::Equal => (DecayOrder::loglog(far), "s = N with sigma = -1 gives log log r".to_string()),
                Ordering::Greater => (
                    DecayOrder::plain(far, &o.sigma + Rational::one()),
                    "s = N with sigma > -1 gives (log r)^(sigma+1)".to_string(),
                ),
            }
        }
    })
}

/// Order of `I_gamma * v` for `v` of order `o` in `R^N`.
pub fn riesz_order(gamma: &Rational, n: u32, o: &DecayOrder) -> Result<DecayOrder> {
    riesz_step(gamma, n, o).map(|(out, _)| out)
}

/// Order of `v^p`.
pub fn power_order(o: &DecayOrder, p: &Rational) -> Result<DecayOrder> {
    if !p.is_positive() {
        return Err(Error::Domain(format!("exponent must be positive, got {}", rational::show(p))));
    }
    if o.is_loglog() {
        return Err(Error::LoglogUnsupported);
    }
    Ok(DecayOrder::plain(&o.s * p, &o.sigma * p))
}

/// Order of `v w`.
pub fn product_order(a: &DecayOrder, b: &DecayOrder) -> Result<DecayOrder> {
    if a.is_loglog() || b.is_loglog() {
        return Err(Error::LoglogUnsupported);
    }
    Ok(DecayOrder::plain(&a.s + &b.s, &a.sigma + &b.sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStep {
    pub op: String,
    #[serde(rename = "in")]
    pub input: DecayOrder,
    #[serde(rename = "out")]
    pub output: DecayOrder,
    pub rule: String,
}

/// A sequence of order transformations in which each step consumes the
/// previous step's output.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct ExponentChain {
    steps: Vec<ChainStep>,
}

impl ExponentChain {
    pub fn push(&mut self, op: &str, input: DecayOrder, output: DecayOrder, rule: impl Into<String>) -> Result<()> {
        if let Some(last) = self.steps.last() {
            if last.output != input {
                return Err(Error::Precondition(format!(
                    "chain step {op} consumes {input} but the previous step produced {}",
                    last.output
                )));
            }
        }
        self.steps.push(ChainStep {
            op: op.to_string(),
            input,
            output,
            rule: rule.into(),
        });
        Ok(())
    }

    pub fn steps(&self) -> &[ChainStep] {
        &self.steps
    }

    /// The orders visited: the first input followed by every output.
    pub fn orders(&self) -> Vec<DecayOrder> {
        let mut out: Vec<DecayOrder> = self.steps.first().map(|s| s.input.clone()).into_iter().collect();
        out.extend(self.steps.iter().map(|s| s.output.clone()));
        out
    }

    pub fn last(&self) -> Option<&DecayOrder> {
        self.steps.last().map(|s| &s.output)
    }
}

/// Optional overrides of the free parameter of a construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FreeParams {
    /// log absorption exponent in B1, `0 < eps < q(N-alpha) - beta`
    pub epsilon: Option<Rational>,
    /// target loss in B1plus (`m > 0`) or log power in B1plusplus
    pub m: Option<Rational>,
}

/// Explicit supersolution `(1+r)^{-power} log(e+r)^logpower`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileShape {
    #[serde(serialize_with = "rational::serialize_f64")]
    pub power: Rational,
    #[serde(serialize_with = "rational::serialize_f64")]
    pub logpower: Rational,
}

impl ProfileShape {
    pub fn power_f64(&self) -> f64 {
        rational::to_f64(&self.power)
    }

    pub fn logpower_f64(&self) -> f64 {
        rational::to_f64(&self.logpower)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionCertificate {
    pub regime: Regime,
    pub point: ParameterPoint,
    pub profile: ProfileShape,
    /// free parameters actually used (`epsilon`, `k`, `delta`, `m`)
    pub parameters: BTreeMap<String, f64>,
    pub chain: ExponentChain,
    pub start: DecayOrder,
    #[serde(rename = "final")]
    pub final_order: DecayOrder,
    /// final order decays at least as fast as the profile
    pub closure: bool,
    pub decay: DecayExponent,
    /// final order agrees with the decay exponent of the region classifier
    pub matches_decay: bool,
}

fn violated(msg: String) -> Error {
    Error::HypothesesViolated(msg)
}

fn require(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(violated(what()))
    }
}

/// Hypotheses of the construction `which`, as `(statement, holds)`.
fn hypotheses(pt: &ParameterPoint, which: Regime) -> Vec<(&'static str, bool)> {
    let b = pt.critical_q();
    let one = Rational::one();
    let n_over = pt.dim() / pt.codim();
    match which {
        Regime::B1 => vec![
            ("p > β/(N−α)", pt.p > b),
            ("p+q > (N+β)/(N−α)", &pt.p + &pt.q > pt.critical_sum()),
            ("q > β/(N−α)", pt.q > b),
        ],
        Regime::B2 => {
            let lower = one.clone() - (pt.codim() - &pt.beta) * &pt.p / pt.dim();
            vec![
                ("1 − (N−α−β)p/N < q", lower < pt.q),
                ("q < β/(N−α)", pt.q < b),
                ("β/(N−α) < 1", b < one),
            ]
        }
        Regime::B1plus => vec![
            ("α+β = N", &pt.alpha + &pt.beta == pt.dim()),
            ("p > N/(N−α)", pt.p > n_over),
            ("q = 1", pt.q == one),
        ],
        Regime::B1plusplus => vec![
            ("p > N/(N−α)", pt.p > n_over),
            ("q = β/(N−α)", pt.q == b),
            ("β/(N−α) < 1", b < one),
        ],
    }
}

/// Replays the decay-order arithmetic that makes the explicit profile of
/// `which` a supersolution: `u -> u^p -> I_beta * u^p -> (I_beta * u^p) u^q ->
/// I_alpha * (...)`, and checks that the result decays at least as fast as `u`.
pub fn certify_construction(pt: &ParameterPoint, which: Regime, free: &FreeParams) -> Result<ConstructionCertificate> {
    let failing: Vec<&str> = hypotheses(pt, which).into_iter().filter(|(_, ok)| !ok).map(|(s, _)| s).collect();
    require(failing.is_empty(), || format!("{which} at {pt}: {}", failing.join("; ")))?;
    require(free.epsilon.is_none() || which == Regime::B1, || {
        format!("epsilon is a free parameter of B1 only, not {which}")
    })?;
    require(free.m.is_none() || matches!(which, Regime::B1plus | Regime::B1plusplus), || {
        format!("m is a free parameter of B1plus and B1plusplus only, not {which}")
    })?;

    let codim = pt.codim();
    let mut parameters = BTreeMap::new();
    let mut epsilon = None;
    let mut loss = Rational::zero();
    let profile = match which {
        Regime::B1 => {
            let room = &pt.q * &codim - &pt.beta;
            let eps = free.epsilon.clone().unwrap_or_else(|| &room * half());
            require(eps.is_positive() && eps < room, || {
                format!("epsilon = {} must lie in (0, q(N−α)−β) = (0, {})", rational::show(&eps), rational::show(&room))
            })?;
            parameters.insert("epsilon".to_string(), rational::to_f64(&eps));
            epsilon = Some(eps);
            ProfileShape {
                power: codim.clone(),
                logpower: Rational::zero(),
            }
        }
        Regime::B2 => {
            let k = construction_power(pt);
            parameters.insert("k".to_string(), rational::to_f64(&k));
            ProfileShape {
                power: k,
                logpower: Rational::zero(),
            }
        }
        Regime::B1plus => {
            let room = &pt.beta - pt.dim() / &pt.p;
            let delta = match &free.m {
                Some(m) => {
                    require(m.is_positive(), || format!("m = {} must be positive", rational::show(m)))?;
                    parameters.insert("m".to_string(), rational::to_f64(m));
                    if *m < room {
                        m.clone()
                    } else {
                        &room * half()
                    }
                }
                None => &room * half(),
            };
            parameters.insert("delta".to_string(), rational::to_f64(&delta));
            loss = delta.clone();
            ProfileShape {
                power: &pt.beta - &delta,
                logpower: Rational::zero(),
            }
        }
        Regime::B1plusplus => {
            let threshold = log_threshold(pt);
            let m = free.m.clone().unwrap_or_else(|| threshold.clone());
            require(m >= threshold, || {
                format!("m = {} must be at least (N−α)/(N−α−β) = {}", rational::show(&m), rational::show(&threshold))
            })?;
            parameters.insert("m".to_string(), rational::to_f64(&m));
            ProfileShape {
                power: codim.clone(),
                logpower: m,
            }
        }
    };

    let start = DecayOrder::plain(profile.power.clone(), profile.logpower.clone());
    let mut chain = ExponentChain::default();
    let up = power_order(&start, &pt.p)?;
    chain.push("power", start.clone(), up.clone(), format!("u^p with p = {}", rational::show(&pt.p)))?;
    let (inner, rule) = riesz_step(&pt.beta, pt.n, &up)?;
    chain.push("riesz_beta", up, inner.clone(), rule)?;
    let uq = power_order(&start, &pt.q)?;
    let mut prod = product_order(&inner, &uq)?;
    chain.push("product", inner, prod.clone(), format!("multiply by u^q of order {uq}"))?;
    if let (Some(eps), false) = (&epsilon, prod.sigma.is_zero()) {
        let absorbed = DecayOrder::power(&prod.s - eps);
        chain.push(
            "absorb_log",
            prod,
            absorbed.clone(),
            format!("(log r)^sigma <= C r^eps with eps = {}", rational::show(eps)),
        )?;
        prod = absorbed;
    }
    let (outer, rule) = riesz_step(&pt.alpha, pt.n, &prod)?;
    chain.push("riesz_alpha", prod, outer.clone(), rule)?;

    let closure = outer >= start;
    let decay = classify(pt).decay.ok_or(Error::NotInExistenceRegion)?;
    let matches_decay = outer.flag == LogFlag::Plain
        && outer.s == &decay.s - &loss
        && match &decay.correction {
            Correction::Log { m } => outer.sigma <= profile.logpower && profile.logpower >= *m,
            _ => outer.sigma.is_zero(),
        };
    Ok(ConstructionCertificate {
        regime: which,
        point: pt.clone(),
        profile,
        parameters,
        chain,
        start,
        final_order: outer,
        closure,
        decay,
        matches_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn o(s: &str, sigma: &str) -> DecayOrder {
        DecayOrder::plain(parse_rational(s).unwrap(), parse_rational(sigma).unwrap())
    }

    #[test]
    fn riesz_cases() {
        let g = int(1);
        assert_eq!(riesz_order(&g, 3, &o("2", "0")).unwrap(), o("1", "0"));
        assert_eq!(riesz_order(&g, 3, &o("3", "0")).unwrap(), o("2", "1"));
        assert_eq!(riesz_order(&g, 3, &o("5", "0")).unwrap(), o("2", "0"));
        assert_eq!(riesz_order(&g, 3, &o("3", "-1")).unwrap(), DecayOrder::loglog(int(2)));
        assert_eq!(riesz_order(&g, 3, &o("3", "-2")).unwrap(), o("2", "0"));
        assert_eq!(riesz_order(&g, 3, &o("2", "1")).unwrap(), o("1/2", "0"));
        assert_eq!(riesz_order(&g, 3, &o("2", "-1")).unwrap(), o("1", "0"));
        assert!(matches!(riesz_order(&g, 3, &o("1", "0")), Err(Error::UncontrolledOrder { .. })));
        assert_eq!(riesz_order(&g, 3, &DecayOrder::loglog(int(3))), Err(Error::LoglogUnsupported));
        assert_eq!(riesz_order(&g, 3, &DecayOrder::loglog(int(4))).unwrap(), o("2", "0"));
    }

    #[test]
    fn power_and_product() {
        assert_eq!(power_order(&o("2", "0"), &int(3)).unwrap(), o("6", "0"));
        assert_eq!(power_order(&o("2", "0"), &int(1)).unwrap(), o("2", "0"));
        assert_eq!(product_order(&o("2", "1"), &o("1", "0")).unwrap(), o("3", "1"));
        assert_eq!(power_order(&DecayOrder::loglog(int(2)), &int(2)), Err(Error::LoglogUnsupported));
        assert_eq!(product_order(&DecayOrder::loglog(int(2)), &o("1", "0")), Err(Error::LoglogUnsupported));
    }

    #[test]
    fn ordering_places_loglog_between_plain_and_logs() {
        let plain = o("2", "0");
        let ll = DecayOrder::loglog(int(2));
        let logged = o("2", "1/10");
        assert!(plain > ll && ll > logged);
        assert!(o("2", "-1") > plain);
        assert!(o("2.1", "5") > plain);
    }

    #[test]
    fn chain_rejects_disconnected_steps() {
        let mut c = ExponentChain::default();
        c.push("a", o("1", "0"), o("2", "0"), "x").unwrap();
        assert!(c.push("b", o("3", "0"), o("4", "0"), "y").is_err());
    }

    #[test]
    fn b2_chain() {
        let pt = ParameterPoint::parse(5, "1", "1", "6", "0.2").unwrap();
        let c = certify_construction(&pt, Regime::B2, &FreeParams::default()).unwrap();
        let want = [o("3.75", "0"), o("22.5", "0"), o("4", "0"), o("4.75", "0"), o("3.75", "0")];
        assert_eq!(c.chain.orders(), want);
        assert!(c.closure && c.matches_decay);
    }

    #[test]
    fn b1_chain_absorbs_log_on_the_critical_branch() {
        let pt = ParameterPoint::parse(3, "1", "1", "3", "3").unwrap();
        let c = certify_construction(&pt, Regime::B1, &FreeParams::default()).unwrap();
        let want = [o("2", "0"), o("6", "0"), o("2", "0"), o("8", "0"), o("2", "0")];
        assert_eq!(c.chain.orders(), want);

        // p(N - alpha) = N: I_beta * u^p carries a log
        let pt = ParameterPoint::parse(3, "1", "1", "1.5", "3").unwrap();
        let c = certify_construction(&pt, Regime::B1, &FreeParams::default()).unwrap();
        let ops: Vec<&str> = c.chain.steps().iter().map(|s| s.op.as_str()).collect();
        assert_eq!(ops, ["power", "riesz_beta", "product", "absorb_log", "riesz_alpha"]);
        assert_eq!(c.chain.orders()[2], o("2", "1"));
        assert_eq!(c.final_order, o("2", "0"));
        assert!(c.closure);

        let bad = FreeParams {
            epsilon: Some(int(5)),
            ..Default::default()
        };
        assert!(matches!(certify_construction(&pt, Regime::B1, &bad), Err(Error::HypothesesViolated(_))));
    }

    #[test]
    fn b1plus_and_b1plusplus_chains() {
        let pt = ParameterPoint::parse(4, "2", "2", "3", "1").unwrap();
        let c = certify_construction(&pt, Regime::B1plus, &FreeParams::default()).unwrap();
        assert_eq!(c.start, o("5/3", "0"));
        assert_eq!(c.final_order, o("5/3", "0"));
        assert!(c.closure && c.matches_decay);

        let pt = ParameterPoint::parse(3, "1", "1", "4", "0.5").unwrap();
        let c = certify_construction(&pt, Regime::B1plusplus, &FreeParams::default()).unwrap();
        assert_eq!(c.start, o("2", "2"));
        assert_eq!(c.final_order, o("2", "2"));
        assert!(c.closure && c.matches_decay);

        let small = FreeParams {
            m: Some(parse_rational("1.5").unwrap()),
            ..Default::default()
        };
        assert!(certify_construction(&pt, Regime::B1plusplus, &small).is_err());
    }

    #[test]
    fn hypotheses_are_checked() {
        let pt = ParameterPoint::parse(3, "1", "1", "2", "2").unwrap();
        let err = certify_construction(&pt, Regime::B2, &FreeParams::default()).unwrap_err();
        match err {
            Error::HypothesesViolated(msg) => assert!(msg.contains("q < β/(N−α)"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_json_shape() {
        let pt = ParameterPoint::parse(5, "1", "1", "6", "0.2").unwrap();
        let c = certify_construction(&pt, Regime::B2, &FreeParams::default()).unwrap();
        let v = serde_json::to_value(&c.chain).unwrap();
        assert_eq!(v[0]["op"], "power");
        assert_eq!(v[0]["in"]["s"], 3.75);
        assert_eq!(v[0]["out"]["flag"], "plain");
        assert!(v[2]["rule"].is_string());
    }
}
