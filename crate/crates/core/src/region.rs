//! Existence region of positive solutions to `u >= I_alpha * ((I_beta * u^p) u^q)`.
//!
//! A nontrivial solution with `(I_beta * u^p) u^q` admissible exists exactly when
//!
//! ```text
//! p > beta/(N-alpha),   p + q > (N+beta)/(N-alpha),
//! q > beta/(N-alpha)           if alpha + beta > N,
//! q >= 1                      if alpha + beta = N,
//! q > 1 - (N-alpha-beta) p/N  if alpha + beta < N.
//! ```
//!
//! All comparisons are carried out in exact rational arithmetic.

use num::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::{self, int, parse_rational, serialize_f64, Rational};

const BOUNDARY_BAND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    pub n: u32,
    pub alpha: Rational,
    pub beta: Rational,
    pub p: Rational,
    pub q: Rational,
}

impl ParameterPoint {
    pub fn new(n: u32, alpha: Rational, beta: Rational, p: Rational, q: Rational) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidPoint(format!("N must be at least 2, got {n}")));
        }
        let nn = int(n as i64);
        for (name, v) in [("alpha", &alpha), ("beta", &beta)] {
            if !(v.is_positive() && *v < nn) {
                return Err(Error::InvalidPoint(format!("{name} = {} must lie in (0, {n})", rational::show(v))));
            }
        }
        for (name, v) in [("p", &p), ("q", &q)] {
            if !v.is_positive() {
                return Err(Error::InvalidPoint(format!("{name} = {} must be positive", rational::show(v))));
            }
        }
        Ok(Self { n, alpha, beta, p, q })
    }

    /// From decimal or fraction strings.
    pub fn parse(n: u32, alpha: &str, beta: &str, p: &str, q: &str) -> Result<Self> {
        let conv = |s: &str| parse_rational(s).map_err(|e| Error::InvalidPoint(e.to_string()));
        Self::new(n, conv(alpha)?, conv(beta)?, conv(p)?, conv(q)?)
    }

    /// From floats, read through their shortest decimal representation.
    pub fn from_f64(n: u32, alpha: f64, beta: f64, p: f64, q: f64) -> Result<Self> {
        let conv = |x: f64| rational::from_f64(x).map_err(|e| Error::InvalidPoint(e.to_string()));
        Self::new(n, conv(alpha)?, conv(beta)?, conv(p)?, conv(q)?)
    }

    pub fn dim(&self) -> Rational {
        int(self.n as i64)
    }

    /// `N - alpha`
    pub fn codim(&self) -> Rational {
        self.dim() - &self.alpha
    }

    /// `beta / (N - alpha)`, the critical value of `q`.
    pub fn critical_q(&self) -> Rational {
        &self.beta / self.codim()
    }

    /// `(N + beta) / (N - alpha)`, the critical value of `p + q`.
    pub fn critical_sum(&self) -> Rational {
        (self.dim() + &self.beta) / self.codim()
    }

    /// Sign of `alpha + beta - N`.
    pub fn order_balance(&self) -> Ordering {
        (&self.alpha + &self.beta).cmp(&self.dim())
    }

    pub fn floats(&self) -> (f64, f64, f64, f64) {
        (
            rational::to_f64(&self.alpha),
            rational::to_f64(&self.beta),
            rational::to_f64(&self.p),
            rational::to_f64(&self.q),
        )
    }
}

impl Serialize for ParameterPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Flat {
            #[serde(rename = "N")]
            n: u32,
            alpha: f64,
            beta: f64,
            p: f64,
            q: f64,
        }
        let (alpha, beta, p, q) = self.floats();
        Flat { n: self.n, alpha, beta, p, q }.serialize(s)
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} alpha={} beta={} p={} q={}",
            self.n,
            rational::show(&self.alpha),
            rational::show(&self.beta),
            rational::show(&self.p),
            rational::show(&self.q)
        )
    }
}

/// Sub-regime of the existence region, named after the explicit supersolution
/// used there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Regime {
    /// `q > beta/(N-alpha)`; profile `(1+r)^{-(N-alpha)}`
    B1,
    /// `q < beta/(N-alpha) < 1`; profile `(1+r)^{-k}`, `k = (N-alpha-beta)/(1-q)`
    B2,
    /// `alpha + beta = N`, `q = 1`; profile `(1+r)^{-(N-alpha-delta)}`
    B1plus,
    /// `q = beta/(N-alpha) < 1`; profile `(1+r)^{-(N-alpha)} log(e+r)^m`
    B1plusplus,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::B1, Regime::B2, Regime::B1plus, Regime::B1plusplus];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::B1 => "B1",
            Regime::B2 => "B2",
            Regime::B1plus => "B1plus",
            Regime::B1plusplus => "B1plusplus",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown regime {s}; expected B1, B2, B1plus or B1plusplus")))
    }
}

/// The nonexistence results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessTag {
    /// `p <= beta/(N-alpha)`: `u^p` is not admissible for `I_beta`.
    SmallP,
    /// `alpha + beta > N` and `q <= beta/(N-alpha) - 1`
    SmallQLargeOrders,
    /// `p + q < 1`
    SublinearSum,
    /// `1 <= p + q <= (N+beta)/(N-alpha)`
    SubcriticalSum,
    /// `alpha + beta > N` and `1 < q <= beta/(N-alpha)`
    SuperlinearCriticalQ,
    /// `alpha + beta > N` and `q = 1`
    LinearQ,
    /// `q <= 1 - (N-alpha-beta) p/N`
    SmallQ,
}

impl WitnessTag {
    pub const ALL: [WitnessTag; 7] = [
        WitnessTag::SmallP,
        WitnessTag::SmallQLargeOrders,
        WitnessTag::SublinearSum,
        WitnessTag::SubcriticalSum,
        WitnessTag::SuperlinearCriticalQ,
        WitnessTag::LinearQ,
        WitnessTag::SmallQ,
    ];

    /// Order in which witnesses are tried: the narrow `p + q < 1` and `q = 1`
    /// cases first, then the two small-`p`/small-`q` conditions, then the
    /// broad `p + q` and `q` bounds.
    pub const PRIORITY: [WitnessTag; 7] = [
        WitnessTag::SublinearSum,
        WitnessTag::LinearQ,
        WitnessTag::SuperlinearCriticalQ,
        WitnessTag::SmallQLargeOrders,
        WitnessTag::SmallP,
        WitnessTag::SubcriticalSum,
        WitnessTag::SmallQ,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WitnessTag::SmallP => "small_p",
            WitnessTag::SmallQLargeOrders => "small_q_large_orders",
            WitnessTag::SublinearSum => "sublinear_sum",
            WitnessTag::SubcriticalSum => "subcritical_sum",
            WitnessTag::SuperlinearCriticalQ => "superlinear_critical_q",
            WitnessTag::LinearQ => "linear_q",
            WitnessTag::SmallQ => "small_q",
        }
    }

    pub fn condition(&self) -> &'static str {
        match self {
            WitnessTag::SmallP => "p ≤ β/(N−α)",
            WitnessTag::SmallQLargeOrders => "α+β > N and q ≤ β/(N−α) − 1",
            WitnessTag::SublinearSum => "p+q < 1",
            WitnessTag::SubcriticalSum => "1 ≤ p+q ≤ (N+β)/(N−α)",
            WitnessTag::SuperlinearCriticalQ => "α+β > N and 1 < q ≤ β/(N−α)",
            WitnessTag::LinearQ => "α+β > N and q = 1",
            WitnessTag::SmallQ => "p+q ≥ 1, q < 1 and q ≤ 1 − (N−α−β)p/N",
        }
    }

    pub fn applies(&self, pt: &ParameterPoint) -> bool {
        let b = pt.critical_q();
        let one = Rational::one();
        let sum = &pt.p + &pt.q;
        let large = pt.order_balance() == Ordering::Greater;
        match self {
            WitnessTag::SmallP => pt.p <= b,
            WitnessTag::SmallQLargeOrders => large && pt.q <= &b - &one,
            WitnessTag::SublinearSum => sum < one,
            WitnessTag::SubcriticalSum => sum >= one && sum <= pt.critical_sum(),
            WitnessTag::SuperlinearCriticalQ => large && pt.q > one && pt.q <= b,
            WitnessTag::LinearQ => large && pt.q == one,
            WitnessTag::SmallQ => sum >= one && pt.q < one && pt.q <= small_q_bound(pt),
        }
    }
}

impl fmt::Display for WitnessTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.condition())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub tag: WitnessTag,
    pub condition: &'static str,
}

/// `1 - (N - alpha - beta) p / N`
fn small_q_bound(pt: &ParameterPoint) -> Rational {
    Rational::one() - (pt.dim() - &pt.alpha - &pt.beta) * &pt.p / pt.dim()
}

/// One evaluated inequality `lhs > rhs` (or `>=`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    #[serde(serialize_with = "serialize_f64")]
    pub lhs: Rational,
    #[serde(serialize_with = "serialize_f64")]
    pub rhs: Rational,
    pub strict: bool,
    pub holds: bool,
    /// `lhs - rhs`
    #[serde(serialize_with = "serialize_f64")]
    pub margin: Rational,
    pub margin_exact: String,
    /// `|margin| <= 1e-12`: the point sits on (or numerically at) the boundary.
    pub boundary: bool,
}

impl Condition {
    fn new(name: &str, lhs: Rational, rhs: Rational, strict: bool) -> Self {
        let margin = &lhs - &rhs;
        let holds = if strict { margin.is_positive() } else { !margin.is_negative() };
        Self {
            name: name.to_string(),
            margin_exact: rational::show(&margin),
            boundary: rational::abs_f64(&margin) <= BOUNDARY_BAND,
            lhs,
            rhs,
            strict,
            holds,
            margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    /// extra factor `(log r)^m`
    Log {
        #[serde(serialize_with = "serialize_f64")]
        m: Rational,
    },
    /// an arbitrarily small polynomial loss `r^eps`
    Epsilon,
}

/// Decay `u = O(r^{-s})` of the constructed solution, up to the correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayExponent {
    #[serde(serialize_with = "serialize_f64")]
    pub s: Rational,
    pub correction: Correction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub point: ParameterPoint,
    pub exists: bool,
    #[serde(serialize_with = "regime_or_none")]
    pub regime: Option<Regime>,
    pub witness: Option<Witness>,
    pub conditions: Vec<Condition>,
    pub decay: Option<DecayExponent>,
}

fn regime_or_none<S: Serializer>(r: &Option<Regime>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(r.map(|r| r.name()).unwrap_or("none"))
}

impl Verdict {
    /// True when some condition is within `1e-12` of its threshold.
    pub fn near_boundary(&self) -> bool {
        self.conditions.iter().any(|c| c.boundary)
    }
}

fn conditions(pt: &ParameterPoint) -> Vec<Condition> {
    let b = pt.critical_q();
    let mut out = vec![
        Condition::new("p > β/(N−α)", pt.p.clone(), b.clone(), true),
        Condition::new("p+q > (N+β)/(N−α)", &pt.p + &pt.q, pt.critical_sum(), true),
    ];
    out.push(match pt.order_balance() {
        Ordering::Greater => Condition::new("q > β/(N−α)", pt.q.clone(), b, true),
        Ordering::Equal => Condition::new("q ≥ 1", pt.q.clone(), Rational::one(), false),
        Ordering::Less => Condition::new("q > 1 − (N−α−β)p/N", pt.q.clone(), small_q_bound(pt), true),
    });
    out
}

fn regime_of(pt: &ParameterPoint) -> Regime {
    let b = pt.critical_q();
    match pt.q.cmp(&b) {
        Ordering::Greater => Regime::B1,
        Ordering::Less => Regime::B2,
        Ordering::Equal if pt.order_balance() == Ordering::Equal => Regime::B1plus,
        Ordering::Equal => Regime::B1plusplus,
    }
}

pub fn classify(pt: &ParameterPoint) -> Verdict {
    let conditions = conditions(pt);
    let exists = conditions.iter().all(|c| c.holds);
    let regime = exists.then(|| regime_of(pt));
    let witness = if exists { None } else { find_witness(pt) };
    let decay = regime.map(|r| decay_for(pt, r));
    Verdict {
        point: pt.clone(),
        exists,
        regime,
        witness,
        conditions,
        decay,
    }
}

fn find_witness(pt: &ParameterPoint) -> Option<Witness> {
    WitnessTag::PRIORITY.into_iter().find(|t| t.applies(pt)).map(|tag| Witness {
        tag,
        condition: tag.condition(),
    })
}

/// The first nonexistence result whose hypotheses hold at `pt`.
pub fn nonexistence_witness(pt: &ParameterPoint) -> Result<Witness> {
    if conditions(pt).iter().all(|c| c.holds) {
        return Err(Error::NotANonexistencePoint);
    }
    find_witness(pt).ok_or_else(|| Error::Precondition(format!("no nonexistence result covers {pt}")))
}

fn decay_for(pt: &ParameterPoint, regime: Regime) -> DecayExponent {
    match regime {
        Regime::B1 => DecayExponent {
            s: pt.codim(),
            correction: Correction::None,
        },
        Regime::B2 => DecayExponent {
            s: construction_power(pt),
            correction: Correction::None,
        },
        Regime::B1plus => DecayExponent {
            s: pt.codim(),
            correction: Correction::Epsilon,
        },
        Regime::B1plusplus => DecayExponent {
            s: pt.codim(),
            correction: Correction::Log { m: log_threshold(pt) },
        },
    }
}

/// `k = (N - alpha - beta) / (1 - q)`
pub(crate) fn construction_power(pt: &ParameterPoint) -> Rational {
    (pt.codim() - &pt.beta) / (Rational::one() - &pt.q)
}

/// `(N - alpha) / (N - alpha - beta)`, the least admissible log power.
pub(crate) fn log_threshold(pt: &ParameterPoint) -> Rational {
    let den = pt.codim() - &pt.beta;
    if den.is_zero() {
        return Rational::zero();
    }
    pt.codim() / den
}

pub fn decay_exponent(pt: &ParameterPoint) -> Result<DecayExponent> {
    classify(pt).decay.ok_or(Error::NotInExistenceRegion)
}
