//! Radial functions: closed-form power-log profiles, grid samples with an
//! analytic tail, pointwise algebra, weighted integrability and annulus
//! integrals.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chebyshev::ChebyshevPanels;
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::riesz::{sphere_area, RieszOrder};

/// Logarithmically spaced radii `r_min * exp(k h)`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        Self {
            r_min: 1e-3,
            r_max: 1e4,
            per_decade: 40,
        }
    }
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, per_decade: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && per_decade > 0) {
            return Err(Error::Domain(format!(
                "grid needs 0 < r_min < r_max and a positive density, got [{r_min}, {r_max}] x {per_decade}"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            per_decade,
        })
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        ((self.r_max / self.r_min).log10() * self.per_decade as f64)
            .round()
            .max(1.0) as usize
    }

    /// Logarithmic step `h = ln(r_{k+1} / r_k)`.
    pub fn log_step(&self) -> f64 {
        (self.r_max / self.r_min).ln() / self.intervals() as f64
    }

    pub fn radii(&self) -> Vec<f64> {
        let n = self.intervals();
        let h = self.log_step();
        let mut r: Vec<f64> = (0..=n).map(|k| self.r_min * (k as f64 * h).exp()).collect();
        r[n] = self.r_max;
        r
    }
}

/// `f(r) = A (1 + r)^{-a} (log(e + r))^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLogProfile {
    pub amplitude: f64,
    pub power: f64,
    pub logpower: f64,
}

impl PowerLogProfile {
    pub fn new(amplitude: f64, power: f64, logpower: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite() && power.is_finite() && logpower.is_finite()) {
            return Err(Error::Domain(format!(
                "power-log profile needs A > 0 and finite exponents, got A={amplitude}, a={power}, m={logpower}"
            )));
        }
        Ok(Self {
            amplitude,
            power,
            logpower,
        })
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        let mut v = self.amplitude * (1.0 + r).powf(-self.power);
        if self.logpower != 0.0 {
            v *= (std::f64::consts::E + r).ln().powf(self.logpower);
        }
        v
    }

    pub fn power(&self, p: f64) -> Self {
        Self {
            amplitude: self.amplitude.powf(p),
            power: p * self.power,
            logpower: p * self.logpower,
        }
    }
}

/// Asymptotic model `C r^{-s} (log r)^sigma` (or `C r^{-s} log log r` when
/// `loglog` is set) used beyond the last grid radius. `C = 0` encodes compact
/// support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub coefficient: f64,
    pub power: f64,
    pub logpower: f64,
    #[serde(default)]
    pub loglog: bool,
}

impl TailModel {
    pub fn new(coefficient: f64, power: f64, logpower: f64) -> Self {
        Self {
            coefficient,
            power,
            logpower,
            loglog: false,
        }
    }

    pub fn compact() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn is_compact(&self) -> bool {
        self.coefficient == 0.0
    }

    /// The slowly varying factor as a function of `z = ln r`.
    pub fn log_factor(&self, z: f64) -> f64 {
        if self.loglog {
            z.ln()
        } else if self.logpower == 0.0 {
            1.0
        } else {
            z.powf(self.logpower)
        }
    }

    /// Shape without the coefficient: `r^{-s} L(ln r)`.
    pub fn shape(&self, r: f64) -> f64 {
        r.powf(-self.power) * self.log_factor(r.ln())
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        if self.is_compact() {
            0.0
        } else {
            self.coefficient * self.shape(r)
        }
    }

    pub fn power_of(&self, p: f64) -> Result<Self> {
        if self.loglog && !self.is_compact() {
            return Err(Error::LoglogUnsupported);
        }
        Ok(Self {
            coefficient: self.coefficient.powf(p),
            power: p * self.power,
            logpower: p * self.logpower,
            loglog: false,
        })
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.is_compact() || other.is_compact() {
            return Ok(Self::compact());
        }
        if self.loglog && other.loglog {
            return Err(Error::LoglogUnsupported);
        }
        Ok(Self {
            coefficient: self.coefficient * other.coefficient,
            power: self.power + other.power,
            logpower: self.logpower + other.logpower,
            loglog: self.loglog || other.loglog,
        })
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            coefficient: self.coefficient * lambda,
            ..*self
        }
    }

    /// `int_{x0}^inf C r^{-s} L(ln r) r^{kappa - 1} dr`, or `None` when it
    /// diverges. Requires `x0 > 1`.
    pub fn integral_beyond(&self, x0: f64, kappa: f64) -> Result<Option<f64>> {
        if self.is_compact() {
            return Ok(Some(0.0));
        }
        if x0 <= 1.0 {
            return Err(Error::Domain(format!("tail integrals start beyond r = 1, got {x0}")));
        }
        let z0 = x0.ln();
        let nu = self.power - kappa;
        let c = self.coefficient;
        if nu.abs() <= 1e-12 {
            if !self.loglog && self.logpower < -1.0 {
                return Ok(Some(c * z0.powf(self.logpower + 1.0) / (-self.logpower - 1.0)));
            }
            return Ok(None);
        }
        if nu < 0.0 {
            return Ok(None);
        }
        let lead = c * (-nu * z0).exp() / nu;
        if !self.loglog && self.logpower == 0.0 {
            return Ok(Some(lead));
        }
        // int_0^inf e^{-v} L(z0 + v / nu) dv with v = w / (1 - w)
        let est = quad::integrate(
            |w| {
                let v = w / (1.0 - w);
                (-v).exp() * self.log_factor(z0 + v / nu) / ((1.0 - w) * (1.0 - w))
            },
            0.0,
            1.0,
            Tolerance::new(0.0, 1e-12, 2000),
        )?;
        Ok(Some(lead * est.value))
    }
}

/// Closed-form radial functions the engine can evaluate exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClosedForm {
    PowerLog(PowerLogProfile),
    /// `height` on `r <= radius`, zero outside.
    Ball { radius: f64, height: f64 },
    /// `A (1 + r^2)^{-e}`.
    Bubble { amplitude: f64, exponent: f64 },
    /// Piecewise Chebyshev interpolant of a sampled smooth function.
    Panels(ChebyshevPanels),
}

impl ClosedForm {
    pub fn evaluate(&self, r: f64) -> f64 {
        match self {
            ClosedForm::PowerLog(p) => p.evaluate(r),
            ClosedForm::Ball { radius, height } => {
                if r <= *radius {
                    *height
                } else {
                    0.0
                }
            }
            ClosedForm::Bubble {
                amplitude,
                exponent,
            } => amplitude * (1.0 + r * r).powf(-exponent),
            ClosedForm::Panels(c) => c.evaluate(r),
        }
    }

    /// Exponents `(s, sigma)` of the large-r behaviour; `None` for compact support.
    fn tail_shape(&self) -> Option<(f64, f64)> {
        match self {
            ClosedForm::PowerLog(p) => Some((p.power, p.logpower)),
            ClosedForm::Ball { .. } => None,
            ClosedForm::Bubble { exponent, .. } => Some((2.0 * exponent, 0.0)),
            ClosedForm::Panels(_) => None,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ClosedForm::Ball { radius, .. } => vec![*radius],
            ClosedForm::Panels(c) => c.edges(),
            _ => Vec::new(),
        }
    }

    fn power(&self, p: f64) -> Option<Self> {
        match self {
            ClosedForm::PowerLog(f) => Some(ClosedForm::PowerLog(f.power(p))),
            ClosedForm::Ball { radius, height } => Some(ClosedForm::Ball {
                radius: *radius,
                height: height.powf(p),
            }),
            ClosedForm::Bubble {
                amplitude,
                exponent,
            } => Some(ClosedForm::Bubble {
                amplitude: amplitude.powf(p),
                exponent: exponent * p,
            }),
            ClosedForm::Panels(_) => None,
        }
    }

    fn multiply(&self, other: &Self) -> Option<Self> {
        match (self, other) {
            (ClosedForm::PowerLog(f), ClosedForm::PowerLog(g)) => {
                Some(ClosedForm::PowerLog(PowerLogProfile {
                    amplitude: f.amplitude * g.amplitude,
                    power: f.power + g.power,
                    logpower: f.logpower + g.logpower,
                }))
            }
            (
                ClosedForm::Bubble {
                    amplitude: a1,
                    exponent: e1,
                },
                ClosedForm::Bubble {
                    amplitude: a2,
                    exponent: e2,
                },
            ) => Some(ClosedForm::Bubble {
                amplitude: a1 * a2,
                exponent: e1 + e2,
            }),
            _ => None,
        }
    }

    fn scaled(&self, lambda: f64) -> Option<Self> {
        match self {
            ClosedForm::PowerLog(f) => Some(ClosedForm::PowerLog(PowerLogProfile {
                amplitude: f.amplitude * lambda,
                ..*f
            })),
            ClosedForm::Ball { radius, height } => Some(ClosedForm::Ball {
                radius: *radius,
                height: height * lambda,
            }),
            ClosedForm::Bubble {
                amplitude,
                exponent,
            } => Some(ClosedForm::Bubble {
                amplitude: amplitude * lambda,
                exponent: *exponent,
            }),
            ClosedForm::Panels(_) => None,
        }
    }
}

/// A nonnegative radial function: samples on an increasing grid, an analytic
/// tail beyond the last radius and, when known, an exact closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    grid: Vec<f64>,
    values: Vec<f64>,
    tail: TailModel,
    closed_form: Option<ClosedForm>,
}

const TAIL_MISMATCH: f64 = 0.1;

impl RadialProfile {
    /// Builds a profile from samples, checking the tail against the last one.
    pub fn from_samples(grid: Vec<f64>, values: Vec<f64>, tail: TailModel) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::Domain("profile needs at least two samples and one value per radius".into()));
        }
        if grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("profile radii must be nonnegative and strictly increasing".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("profile values must be finite and nonnegative, got {bad}")));
        }
        if !(tail.coefficient >= 0.0 && tail.coefficient.is_finite()) {
            return Err(Error::Domain(format!("tail coefficient must be finite and >= 0, got {}", tail.coefficient)));
        }
        let last_r = *grid.last().unwrap();
        let last_v = *values.last().unwrap();
        if !tail.is_compact() {
            if last_r <= 1.0 {
                return Err(Error::Domain("a nonzero tail needs the grid to extend beyond r = 1".into()));
            }
            let model = tail.evaluate(last_r);
            if (model - last_v).abs() > TAIL_MISMATCH * last_v.max(model) {
                return Err(Error::Domain(format!(
                    "tail model {model:e} disagrees with last sample {last_v:e} at r = {last_r}"
                )));
            }
        }
        Ok(Self {
            grid,
            values,
            tail,
            closed_form: None,
        })
    }

    /// Samples a closed form on `grid`; the tail keeps the exact exponents
    /// with its coefficient matched at the last radius.
    pub fn from_closed_form(form: ClosedForm, grid: &[f64]) -> Result<Self> {
        let values: Vec<f64> = grid.iter().map(|&r| form.evaluate(r)).collect();
        let last_r = *grid.last().ok_or_else(|| Error::Domain("empty grid".into()))?;
        let tail = match form.tail_shape() {
            None => TailModel::compact(),
            Some((s, sigma)) => {
                let mut t = TailModel::new(1.0, s, sigma);
                t.coefficient = values[values.len() - 1] / t.shape(last_r);
                t
            }
        };
        let mut p = Self::from_samples(grid.to_vec(), values, tail)?;
        p.closed_form = Some(form);
        Ok(p)
    }

    /// Wraps a Chebyshev interpolant; `tail` takes over beyond its last panel.
    pub fn from_panels(panels: ChebyshevPanels, grid: &[f64], tail: TailModel) -> Result<Self> {
        let end = panels.end();
        let values: Vec<f64> = grid
            .iter()
            .map(|&r| if r <= end { panels.evaluate(r) } else { tail.evaluate(r) })
            .collect();
        let mut p = Self::from_samples(grid.to_vec(), values, tail)?;
        p.closed_form = Some(ClosedForm::Panels(panels));
        Ok(p)
    }

    pub fn power_log(amplitude: f64, power: f64, logpower: f64, grid: &[f64]) -> Result<Self> {
        Self::from_closed_form(
            ClosedForm::PowerLog(PowerLogProfile::new(amplitude, power, logpower)?),
            grid,
        )
    }

    pub fn ball(radius: f64, grid: &[f64]) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        Self::from_closed_form(
            ClosedForm::Ball {
                radius,
                height: 1.0,
            },
            grid,
        )
    }

    pub fn bubble(amplitude: f64, exponent: f64, grid: &[f64]) -> Result<Self> {
        Self::from_closed_form(
            ClosedForm::Bubble {
                amplitude,
                exponent,
            },
            grid,
        )
    }

    /// The zero function on `grid`.
    pub fn zero(grid: &[f64]) -> Result<Self> {
        Self::from_samples(grid.to_vec(), vec![0.0; grid.len()], TailModel::compact())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> &TailModel {
        &self.tail
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    pub fn last_radius(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.tail.is_compact() && self.values.iter().all(|&v| v == 0.0)
    }

    /// Value at `r`: the closed form when present, otherwise log-log linear
    /// interpolation inside the grid, the first sample below it and the tail
    /// model beyond it.
    pub fn evaluate(&self, r: f64) -> f64 {
        match &self.closed_form {
            Some(ClosedForm::Panels(c)) if r > c.end() => self.tail.evaluate(r),
            Some(cf) => cf.evaluate(r),
            None => self.interpolate(r),
        }
    }

    /// `ln f(e^z)`, computed without overflow for large `z`.
    pub fn log_value(&self, z: f64) -> f64 {
        let r = z.exp();
        match &self.closed_form {
            Some(ClosedForm::PowerLog(p)) => {
                // ln(1 + e^z) and ln ln(e + e^z) in stable form
                let l1 = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                let mut v = p.amplitude.ln() - p.power * l1;
                if p.logpower != 0.0 {
                    let le = if z > 1.0 { z + (1.0 - z).exp().ln_1p() } else { (std::f64::consts::E + r).ln() };
                    v += p.logpower * le.ln();
                }
                v
            }
            Some(ClosedForm::Bubble { amplitude, exponent }) => {
                let l = if z > 0.0 { 2.0 * z + (-2.0 * z).exp().ln_1p() } else { (2.0 * z).exp().ln_1p() };
                amplitude.ln() - exponent * l
            }
            Some(ClosedForm::Ball { radius, height }) => {
                if r <= *radius {
                    height.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ if r.is_finite() && r <= self.last_radius() => self.evaluate(r).ln(),
            _ => {
                let t = &self.tail;
                if t.is_compact() {
                    f64::NEG_INFINITY
                } else {
                    let lf = if t.loglog {
                        z.ln().ln()
                    } else if t.logpower == 0.0 {
                        0.0
                    } else {
                        t.logpower * z.ln()
                    };
                    t.coefficient.ln() - t.power * z + lf
                }
            }
        }
    }

    /// Grid interpolation, ignoring any closed form.
    pub fn interpolate(&self, r: f64) -> f64 {
        let n = self.grid.len();
        if r <= self.grid[0] {
            return self.values[0];
        }
        if r >= self.grid[n - 1] {
            return if r == self.grid[n - 1] {
                self.values[n - 1]
            } else {
                self.tail.evaluate(r)
            };
        }
        let k = self.grid.partition_point(|&g| g <= r) - 1;
        let (r0, r1) = (self.grid[k], self.grid[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        if v0 > 0.0 && v1 > 0.0 && r0 > 0.0 {
            let t = (r / r0).ln() / (r1 / r0).ln();
            (v0.ln() + t * (v1 / v0).ln()).exp()
        } else {
            v0 + (v1 - v0) * (r - r0) / (r1 - r0)
        }
    }

    /// Radii where the function or its interpolant is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.closed_form {
            Some(cf) => cf.breakpoints(),
            None => self.grid.clone(),
        }
    }

    /// Pointwise power `f^p`.
    pub fn power(&self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("powers must be positive, got {p}")));
        }
        if p == 1.0 {
            return Ok(self.clone());
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.powf(p)).collect(),
            tail: self.tail.power_of(p)?,
            closed_form: self.closed_form.as_ref().and_then(|c| c.power(p)),
        })
    }

    /// Pointwise power allowing negative exponents; fails where `f` vanishes.
    pub fn signed_power(&self, theta: f64) -> Result<Self> {
        if theta > 0.0 {
            return self.power(theta);
        }
        if self.values.iter().any(|&v| v <= 0.0) || self.tail.is_compact() {
            return Err(Error::NonPositiveProfile);
        }
        if theta == 0.0 {
            return Self::from_samples(
                self.grid.clone(),
                vec![1.0; self.grid.len()],
                TailModel::new(1.0, 0.0, 0.0),
            );
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.powf(theta)).collect(),
            tail: self.tail.power_of(theta)?,
            closed_form: self.closed_form.as_ref().and_then(|c| c.power(theta)),
        })
    }

    /// Pointwise product on a shared grid.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        let closed_form = match (&self.closed_form, &other.closed_form) {
            (Some(a), Some(b)) => a.multiply(b),
            _ => None,
        };
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
            tail: self.tail.product(&other.tail)?,
            closed_form,
        })
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * lambda).collect(),
            tail: self.tail.scaled(lambda),
            closed_form: self.closed_form.as_ref().and_then(|c| c.scaled(lambda)),
        }
    }

    /// Re-samples onto another grid, keeping the closed form if any.
    pub fn resampled(&self, grid: &[f64]) -> Result<Self> {
        if let Some(cf) = &self.closed_form {
            return Self::from_closed_form(cf.clone(), grid);
        }
        let values: Vec<f64> = grid.iter().map(|&r| self.interpolate(r)).collect();
        let mut tail = self.tail;
        let last = *grid.last().unwrap();
        if !tail.is_compact() {
            tail.coefficient = values[values.len() - 1] / tail.shape(last);
        }
        Self::from_samples(grid.to_vec(), values, tail)
    }

    /// `int_{B_R} f dx`.
    pub fn ball_integral(&self, radius: f64, dim: u32) -> Result<f64> {
        self.shell_integral(0.0, radius, 1.0, dim)
    }

    /// `int_{a < |x| < b} f(|x|)^theta dx` by radial quadrature.
    pub fn shell_integral(&self, a: f64, b: f64, theta: f64, dim: u32) -> Result<f64> {
        if !(b >= a && a >= 0.0) {
            return Err(Error::Domain(format!("bad shell [{a}, {b}]")));
        }
        if b == a {
            return Ok(0.0);
        }
        let f = |r: f64| {
            let v = self.evaluate(r);
            if theta == 1.0 {
                v
            } else if theta == 0.0 {
                1.0
            } else {
                v.powf(theta)
            }
        };
        if theta < 0.0 {
            let probes = self
                .grid
                .iter()
                .filter(|&&g| g >= a && g <= b)
                .cloned()
                .chain([a.max(self.grid[0] * 0.5), 0.5 * (a + b), b]);
            for r in probes {
                if self.evaluate(r) <= 0.0 {
                    return Err(Error::NonPositiveProfile);
                }
            }
        }
        radial_integral(&f, a, b, &self.breakpoints(), dim)
    }
}

/// `|S^{N-1}| int_a^b g(r) r^{N-1} dr`, splitting at `breaks` and at decades.
pub(crate) fn radial_integral<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, breaks: &[f64], dim: u32) -> Result<f64> {
    let n = dim as f64;
    let mut pts = vec![a];
    let mut interior: Vec<f64> = breaks
        .iter()
        .cloned()
        .chain(decade_marks(a, b))
        .filter(|&x| x > a && x < b)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    pts.extend(interior);
    pts.push(b);
    let tol = Tolerance::new(0.0, 1e-11, 20_000);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let est = if lo == 0.0 {
            quad::integrate(|r| g(r) * r.powf(n - 1.0), lo, hi, tol)?
        } else {
            quad::integrate(
                |y| {
                    let r = y.exp();
                    g(r) * r.powf(n)
                },
                lo.ln(),
                hi.ln(),
                tol,
            )?
        };
        total += est.value;
    }
    Ok(sphere_area(dim) * total)
}

fn decade_marks(a: f64, b: f64) -> Vec<f64> {
    let lo = a.max(1e-12);
    let mut out = Vec::new();
    let mut x = 10f64.powf(lo.log10().floor());
    while x < b {
        if x > a {
            out.push(x);
        }
        x *= 10.0;
    }
    out
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()))
}

/// `int_{B_{2R} \ B_R} f(|x|)^theta dx`.
pub fn annulus_integral(f: &RadialProfile, radius: f64, theta: f64, dim: u32) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("annulus radius must be positive, got {radius}")));
    }
    f.shell_integral(radius, 2.0 * radius, theta, dim)
}

/// Outcome of the weighted-L1 test that decides whether `I_gamma * f` is finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrability {
    pub well_defined: bool,
    /// `s - gamma` for power tails; infinite for compact support.
    pub margin: f64,
    /// `int f(|x|) (1 + |x|)^{-(N - gamma)} dx` when finite.
    pub weighted_mass: Option<f64>,
}

/// Checks `f in L^1((1 + |x|)^{-(N - gamma)} dx)`.
pub fn integrability_check(f: &RadialProfile, order: &RieszOrder) -> Result<Integrability> {
    let tail = f.tail();
    let gamma = order.gamma();
    let (well_defined, margin) = if tail.is_compact() {
        (true, f64::INFINITY)
    } else {
        let margin = tail.power - gamma;
        let ok = if margin.abs() <= 1e-12 {
            !tail.loglog && tail.logpower < -1.0
        } else {
            margin > 0.0
        };
        (ok, margin)
    };
    if !well_defined {
        return Ok(Integrability {
            well_defined,
            margin,
            weighted_mass: None,
        });
    }
    let n = order.dim() as f64;
    let weight = |r: f64| (1.0 + r).powf(gamma - n);
    let end = f.last_radius();
    let inner = radial_integral(&|r: f64| f.evaluate(r) * weight(r), 0.0, end, &f.breakpoints(), order.dim())?;
    // beyond the grid (1 + r)^{gamma - N} ~ r^{gamma - N}
    let outer = if tail.is_compact() {
        0.0
    } else {
        let lead = tail
            .integral_beyond(end, gamma)?
            .ok_or_else(|| Error::Domain("tail integral diverged after passing the exponent test".into()))?;
        sphere_area(order.dim()) * lead * (1.0 + 1.0 / end).powf(gamma - n)
    };
    Ok(Integrability {
        well_defined,
        margin,
        weighted_mass: Some(inner + outer),
    })
}

/// Parsed profile literal.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileLiteral {
    PowerLog(PowerLogProfile),
    Ball { radius: f64 },
    Grid { radii: Vec<f64>, values: Vec<f64>, tail: TailModel },
}

impl ProfileLiteral {
    /// Parses `powlog:A=..,a=..,m=..`, `ball:R=..` or `grid:<path>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("profile literal needs a kind prefix: {s}")))?;
        match kind {
            "powlog" => {
                let kv = parse_kv(rest)?;
                let get = |k: &str, default: Option<f64>| -> Result<f64> {
                    match kv.iter().find(|(key, _)| key == k) {
                        Some((_, v)) => Ok(*v),
                        None => default.ok_or_else(|| Error::Parse(format!("powlog literal is missing {k}"))),
                    }
                };
                Ok(ProfileLiteral::PowerLog(PowerLogProfile::new(
                    get("A", Some(1.0))?,
                    get("a", None)?,
                    get("m", Some(0.0))?,
                )?))
            }
            "ball" => {
                let kv = parse_kv(rest)?;
                let radius = kv
                    .iter()
                    .find(|(k, _)| k == "R")
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::Parse("ball literal is missing R".into()))?;
                if !(radius > 0.0) {
                    return Err(Error::Parse(format!("ball radius must be positive, got {radius}")));
                }
                Ok(ProfileLiteral::Ball { radius })
            }
            "grid" => {
                let text = std::fs::read_to_string(Path::new(rest))
                    .map_err(|e| Error::Parse(format!("cannot read {rest}: {e}")))?;
                parse_grid_csv(&text)
            }
            other => Err(Error::Parse(format!("unknown profile kind {other}"))),
        }
    }

    pub fn into_profile(self, grid: &[f64]) -> Result<RadialProfile> {
        match self {
            ProfileLiteral::PowerLog(p) => RadialProfile::from_closed_form(ClosedForm::PowerLog(p), grid),
            ProfileLiteral::Ball { radius } => RadialProfile::ball(radius, grid),
            ProfileLiteral::Grid { radii, values, tail } => RadialProfile::from_samples(radii, values, tail),
        }
    }
}

fn parse_kv(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {p}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number in {p}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Parses the grid CSV format: `radius,value` rows plus a
/// `# tail C=<v> s=<v> sigma=<v>` header line.
pub fn parse_grid_csv(text: &str) -> Result<ProfileLiteral> {
    let mut tail = None;
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(spec) = rest.strip_prefix("tail") {
                let kv = parse_kv(&spec.split_whitespace().collect::<Vec<_>>().join(","))?;
                let get = |k: &str| {
                    kv.iter()
                        .find(|(key, _)| key == k)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| Error::Parse(format!("tail header is missing {k}")))
                };
                tail = Some(TailModel::new(get("C")?, get("s")?, get("sigma")?));
            }
            continue;
        }
        let mut it = line.split(',');
        let (Some(r), Some(v)) = (it.next(), it.next()) else {
            return Err(Error::Parse(format!("expected radius,value: {line}")));
        };
        let r: f64 = match r.trim().parse() {
            Ok(r) => r,
            // tolerate a column header
            Err(_) if radii.is_empty() => continue,
            Err(_) => return Err(Error::Parse(format!("bad radius in {line}"))),
        };
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad value in {line}")))?;
        radii.push(r);
        values.push(v);
    }
    let tail = tail.ok_or_else(|| Error::Parse("grid file lacks a '# tail C=.. s=.. sigma=..' line".into()))?;
    Ok(ProfileLiteral::Grid { radii, values, tail })
}

impl fmt::Display for TailModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.loglog {
            write!(f, "{:e} r^-{} loglog r", self.coefficient, self.power)
        } else {
            write!(f, "{:e} r^-{} (log r)^{}", self.coefficient, self.power, self.logpower)
        }
    }
}
