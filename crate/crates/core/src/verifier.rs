//! Numerical checks on the operator `T u = I_alpha * ((I_beta * u^p) u^q)`.
//!
//! Both potentials are applied with precomputed [`KernelTable`]s on a shared
//! log grid. A supersolution `T u <= c u` is rescaled by `c^{-1/(p+q-1)}`
//! into a solution `U >= T U`, which is then tested against the positivity
//! principle and the annulus estimates.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exponent::ProfileShape;
use crate::radial::{annulus_integral, integrability_check, radial_integral, same_grid, RadialProfile, TailModel};
use crate::rational::{self, Rational};
use crate::region::{classify, ParameterPoint};
use crate::riesz::{normalization_constant, KernelTable, RieszOrder, TableSpec};

/// Relative residual accepted in `U - T U >= -tol U`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

/// `T` for one parameter point, backed by kernel tables for both orders.
#[derive(Debug, Clone)]
pub struct DoublePotential {
    point: ParameterPoint,
    p: f64,
    q: f64,
    alpha: Arc<KernelTable>,
    beta: Arc<KernelTable>,
}

impl DoublePotential {
    pub fn new(pt: &ParameterPoint, spec: &TableSpec) -> Result<Self> {
        let (a, b, p, q) = pt.floats();
        let alpha = Arc::new(KernelTable::new(RieszOrder::new(a, pt.n)?, spec)?);
        let beta = if pt.alpha == pt.beta {
            alpha.clone()
        } else {
            Arc::new(KernelTable::new(RieszOrder::new(b, pt.n)?, spec)?)
        };
        Ok(Self {
            point: pt.clone(),
            p,
            q,
            alpha,
            beta,
        })
    }

    /// Same kernels, different exponents `(p, q)`.
    pub fn with_exponents(&self, p: &Rational, q: &Rational) -> Result<Self> {
        let pt = ParameterPoint::new(
            self.point.n,
            self.point.alpha.clone(),
            self.point.beta.clone(),
            p.clone(),
            q.clone(),
        )?;
        Ok(Self {
            p: rational::to_f64(p),
            q: rational::to_f64(q),
            point: pt,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
        })
    }

    pub fn point(&self) -> &ParameterPoint {
        &self.point
    }

    pub fn radii(&self) -> &[f64] {
        self.alpha.radii()
    }

    pub fn dim(&self) -> u32 {
        self.point.n
    }

    pub fn alpha_order(&self) -> RieszOrder {
        self.alpha.order()
    }

    pub fn beta_order(&self) -> RieszOrder {
        self.beta.order()
    }

    /// `(1+r)^{-a} log(e+r)^m` on the table grid.
    pub fn shape_profile(&self, shape: &ProfileShape) -> Result<RadialProfile> {
        RadialProfile::power_log(1.0, shape.power_f64(), shape.logpower_f64(), self.radii())
    }

    fn on_grid(&self, u: &RadialProfile) -> Result<RadialProfile> {
        if same_grid(u.grid(), self.radii()) {
            Ok(u.clone())
        } else {
            u.resampled(self.radii())
        }
    }

    /// `I_beta * u^p`, failing if `u^p` is not admissible for `I_beta`.
    pub fn inner(&self, u: &RadialProfile) -> Result<RadialProfile> {
        let u = self.on_grid(u)?;
        if u.is_zero() {
            return RadialProfile::zero(self.radii());
        }
        let up = u.power(self.p)?;
        if !integrability_check(&up, &self.beta.order())?.well_defined {
            return Err(Error::DivergentPotential(format!(
                "first gate: u^p (tail r^-{}) is not in L^1((1+|x|)^-(N-beta) dx), beta = {}",
                up.tail().power,
                self.beta.order().gamma()
            )));
        }
        self.beta.apply(&up)
    }

    /// `T u`.
    pub fn apply(&self, u: &RadialProfile) -> Result<RadialProfile> {
        let u = self.on_grid(u)?;
        if u.is_zero() {
            return RadialProfile::zero(self.radii());
        }
        let v = self.inner(&u)?;
        let w = v.multiply(&u.power(self.q)?)?;
        if !integrability_check(&w, &self.alpha.order())?.well_defined {
            return Err(Error::DivergentPotential(format!(
                "second gate: (I_beta*u^p) u^q (tail r^-{}) is not in L^1((1+|x|)^-(N-alpha) dx), alpha = {}",
                w.tail().power,
                self.alpha.order().gamma()
            )));
        }
        self.alpha.apply(&w)
    }

    /// `V = (I_beta * u^p) u^{q-1}`, so that `T u = I_alpha * (V u)`.
    pub fn weight(&self, u: &RadialProfile) -> Result<RadialProfile> {
        let u = self.on_grid(u)?;
        self.inner(&u)?.multiply(&u.signed_power(self.q - 1.0)?)
    }
}

/// `T u` for a single call; builds the kernel tables.
pub fn apply_t(pt: &ParameterPoint, u: &RadialProfile, spec: &TableSpec) -> Result<RadialProfile> {
    DoublePotential::new(pt, spec)?.apply(u)
}

/// `lim (tail a)/(tail b)` at infinity; `None` when it is infinite.
fn tail_ratio_limit(a: &TailModel, b: &TailModel) -> Option<f64> {
    if a.is_compact() {
        return Some(0.0);
    }
    if b.is_compact() {
        return None;
    }
    let weight = |t: &TailModel| if t.loglog { (0.0, 1) } else { (t.logpower, 0) };
    if (a.power - b.power).abs() > 1e-9 {
        return (a.power > b.power).then_some(0.0);
    }
    let (wa, wb) = (weight(a), weight(b));
    if (wa.0 - wb.0).abs() <= 1e-12 && wa.1 == wb.1 {
        Some(a.coefficient / b.coefficient)
    } else if wa.0 < wb.0 - 1e-12 || (wa.0 <= wb.0 + 1e-12 && wa.1 < wb.1) {
        Some(0.0)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusDiagnostic {
    pub radius: f64,
    pub u: f64,
    pub tu: f64,
    /// `T u / u`
    pub ratio: f64,
    /// `(U - T U) / U` after scaling
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub point: ParameterPoint,
    pub profile: String,
    /// `sup T u / u` over the grid and the tail
    pub c_best: f64,
    pub c_grid: f64,
    pub tail_ratio_limit: f64,
    /// `c_best^{-1/(p+q-1)}`
    pub scaling: f64,
    /// `min (U - T U) / U` over the grid
    pub residual: f64,
    /// `1 - lim T U / U` at infinity
    pub tail_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub diagnostics: Vec<RadiusDiagnostic>,
}

/// Finds `c = sup T u / u`, rescales `u` to `U = c^{-1/(p+q-1)} u` and checks
/// `U >= T U` on the grid and in the tail.
pub fn certify_supersolution(dp: &DoublePotential, u: &RadialProfile) -> Result<CertificateReport> {
    let (p, q) = (dp.p, dp.q);
    if p + q <= 1.0 {
        return Err(Error::Precondition(format!("rescaling needs p + q > 1, got {}", p + q)));
    }
    let u = dp.on_grid(u)?;
    if u.values().iter().any(|&v| !(v > 0.0)) || u.tail().is_compact() {
        return Err(Error::NonPositiveProfile);
    }
    let tu = dp.apply(&u)?;
    let limit = tail_ratio_limit(tu.tail(), u.tail()).ok_or_else(|| {
        Error::UnboundedRatio(format!("T u has tail {} but u has tail {}", tu.tail(), u.tail()))
    })?;
    let ratios: Vec<f64> = tu.values().iter().zip(u.values()).map(|(a, b)| a / b).collect();
    let c_grid = ratios.iter().cloned().fold(0.0, f64::max);
    let c_best = c_grid.max(limit);
    if !(c_best > 0.0 && c_best.is_finite()) {
        return Err(Error::UnboundedRatio(format!("sup T u / u = {c_best}")));
    }
    let scaling = c_best.powf(-1.0 / (p + q - 1.0));
    let big_u = u.scaled(scaling);
    let tbig = dp.apply(&big_u)?;
    let diagnostics: Vec<RadiusDiagnostic> = (0..u.grid().len())
        .map(|i| RadiusDiagnostic {
            radius: u.grid()[i],
            u: u.values()[i],
            tu: tu.values()[i],
            ratio: ratios[i],
            residual: (big_u.values()[i] - tbig.values()[i]) / big_u.values()[i],
        })
        .collect();
    let residual = diagnostics.iter().map(|d| d.residual).fold(f64::INFINITY, f64::min);
    let tail_residual = 1.0 - tail_ratio_limit(tbig.tail(), big_u.tail()).unwrap_or(f64::INFINITY);
    let passed = residual >= -RESIDUAL_TOLERANCE && tail_residual >= -RESIDUAL_TOLERANCE;
    Ok(CertificateReport {
        point: dp.point.clone(),
        profile: describe(&u),
        c_best,
        c_grid,
        tail_ratio_limit: limit,
        scaling,
        residual,
        tail_residual,
        tolerance: RESIDUAL_TOLERANCE,
        passed,
        diagnostics,
    })
}

fn describe(u: &RadialProfile) -> String {
    match u.closed_form() {
        Some(crate::radial::ClosedForm::PowerLog(f)) => {
            format!("{} (1+r)^-{} log(e+r)^{}", f.amplitude, f.power, f.logpower)
        }
        _ => format!("grid profile with tail {}", u.tail()),
    }
}

/// Radial cutoff equal to 1 on `[0, plateau R]` and falling to 0 at `R`
/// through the quintic smoothstep `1 - (6t^5 - 15t^4 + 10t^3)`, which is C^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub plateau: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(plateau: f64) -> Self {
        Self { plateau, amplitude: 1.0 }
    }

    pub fn evaluate(&self, r: f64, radius: f64) -> f64 {
        let a = self.plateau * radius;
        if r <= a {
            return self.amplitude;
        }
        if r >= radius {
            return 0.0;
        }
        // 1 - S(t) = S(1 - t), evaluated from the distance to the edge
        let t = (radius - r) / (radius - a);
        self.amplitude * t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Five cutoffs with plateaus at 10%, 25%, 50%, 75% and 90% of the radius.
pub fn standard_bumps() -> Vec<Bump> {
    [0.1, 0.25, 0.5, 0.75, 0.9].into_iter().map(Bump::new).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityCheck {
    pub radius: f64,
    pub plateau: f64,
    /// `int_{B_R} phi^2`
    pub lhs: f64,
    /// `A_alpha 2^{alpha-N} R^{alpha-N} (int_{B_R} sqrt(V) phi)^2`
    pub rhs: f64,
    pub ratio: f64,
    /// `|lhs(2 phi) / (4 lhs(phi)) - 1| + |rhs(2 phi) / (4 rhs(phi)) - 1|`
    pub homogeneity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub checks: Vec<PositivityCheck>,
    pub min_ratio: f64,
    pub max_homogeneity_error: f64,
    pub passed: bool,
}

fn positivity_sides(v: &RadialProfile, bump: &Bump, radius: f64, alpha: &RieszOrder) -> Result<(f64, f64)> {
    let dim = alpha.dim();
    let n = dim as f64;
    let a = alpha.gamma();
    let breaks = [bump.plateau * radius];
    let lhs = radial_integral(&|r: f64| bump.evaluate(r, radius).powi(2), 0.0, radius, &breaks, dim)?;
    let mut vbreaks: Vec<f64> = v.breakpoints().into_iter().filter(|&b| b < radius).collect();
    vbreaks.push(breaks[0]);
    let inner = radial_integral(&|r: f64| v.evaluate(r).max(0.0).sqrt() * bump.evaluate(r, radius), 0.0, radius, &vbreaks, dim)?;
    let constant = normalization_constant(alpha) * 2f64.powf(a - n) * radius.powf(a - n);
    Ok((lhs, constant * inner * inner))
}

/// Tests `int phi^2 >= A_alpha 2^{alpha-N} R^{alpha-N} (int sqrt(V) phi)^2`
/// for `V = (I_beta * U^p) U^{q-1}` and each cutoff and radius.
pub fn check_positivity_principle(
    dp: &DoublePotential,
    u: &RadialProfile,
    radii: &[f64],
    bumps: &[Bump],
) -> Result<PositivityReport> {
    let v = dp.weight(u)?;
    let alpha = dp.alpha_order();
    let jobs: Vec<(f64, Bump)> = radii.iter().flat_map(|&r| bumps.iter().map(move |&b| (r, b))).collect();
    let checks = jobs
        .par_iter()
        .map(|&(radius, bump)| {
            let (lhs, rhs) = positivity_sides(&v, &bump, radius, &alpha)?;
            let doubled = Bump {
                amplitude: 2.0 * bump.amplitude,
                ..bump
            };
            let (lhs2, rhs2) = positivity_sides(&v, &doubled, radius, &alpha)?;
            let rel = |x2: f64, x: f64| if x == 0.0 { x2.abs() } else { (x2 / (4.0 * x) - 1.0).abs() };
            Ok(PositivityCheck {
                radius,
                plateau: bump.plateau,
                lhs,
                rhs,
                ratio: if rhs == 0.0 { f64::INFINITY } else { lhs / rhs },
                homogeneity_error: rel(lhs2, lhs) + rel(rhs2, rhs),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_ratio = checks.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
    let max_homogeneity_error = checks.iter().map(|c| c.homogeneity_error).fold(0.0, f64::max);
    Ok(PositivityReport {
        passed: min_ratio >= 1.0,
        checks,
        min_ratio,
        max_homogeneity_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusReport {
    pub radii: Vec<f64>,
    /// `(int_{B_2R} U^p)(int_{B_2R \ B_R} U^{(q-1)/2})^2 / R^{3N-alpha-beta}`
    pub corollary: Vec<f64>,
    /// max / min of `corollary`
    pub corollary_spread: f64,
    /// max over `R` of `corollary(R) / corollary(R_first)`
    pub corollary_growth: f64,
    /// min and max of `U (1+r)^{N-alpha}` over the last two decades of the grid
    pub lower_floor: f64,
    pub lower_ceiling: f64,
    /// min and max of `U r^{N-alpha}` over the same window
    pub sharpness: (f64, f64),
    /// `int_{B_2R \ B_R} U / R^{(alpha+beta-Nq)/(1-q)}` when `q < beta/(N-alpha) < 1`
    pub mass_ratio: Option<Vec<f64>>,
}

/// Evaluates the annulus estimates and pointwise lower bounds on `U`.
pub fn check_annulus_bounds(dp: &DoublePotential, u: &RadialProfile, radii: &[f64]) -> Result<AnnulusReport> {
    let u = dp.on_grid(u)?;
    if u.values().iter().any(|&v| !(v > 0.0)) || u.tail().is_compact() {
        return Err(Error::NonPositiveProfile);
    }
    let dim = dp.dim();
    let n = dim as f64;
    let (a, b) = (dp.alpha_order().gamma(), dp.beta_order().gamma());
    let (p, q) = (dp.p, dp.q);
    let corollary = radii
        .par_iter()
        .map(|&r| {
            let mass = u.shell_integral(0.0, 2.0 * r, p, dim)?;
            let shell = annulus_integral(&u, r, (q - 1.0) / 2.0, dim)?;
            Ok(mass * shell * shell / r.powf(3.0 * n - a - b))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = corollary.iter().cloned().fold(0.0, f64::max);
    let min = corollary.iter().cloned().fold(f64::INFINITY, f64::min);

    let last = u.last_radius();
    let window: Vec<(f64, f64)> = u
        .grid()
        .iter()
        .zip(u.values())
        .filter(|(&r, _)| r >= last / 100.0 * (1.0 - 1e-12))
        .map(|(&r, &v)| (r, v))
        .collect();
    let fold = |f: &dyn Fn(f64, f64) -> f64| {
        let xs: Vec<f64> = window.iter().map(|&(r, v)| f(r, v)).collect();
        (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(0.0, f64::max))
    };
    let (lower_floor, lower_ceiling) = fold(&|r, v| v * (1.0 + r).powf(n - a));
    let sharpness = fold(&|r, v| v * r.powf(n - a));

    let pt = dp.point();
    let b_crit = pt.critical_q();
    let mass_ratio = if pt.q < b_crit && b_crit < Rational::from_integer(1.into()) {
        let e = (a + b - n * q) / (1.0 - q);
        Some(
            radii
                .iter()
                .map(|&r| Ok(annulus_integral(&u, r, 1.0, dim)? / r.powf(e)))
                .collect::<Result<Vec<f64>>>()?,
        )
    } else {
        None
    };
    Ok(AnnulusReport {
        radii: radii.to_vec(),
        corollary_spread: max / min,
        corollary_growth: max / corollary[0],
        corollary,
        lower_floor,
        lower_ceiling,
        sharpness,
        mass_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Converged,
    Decayed,
    Diverged,
    Inconclusive,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match self {
            Label::Converged => "converged",
            Label::Decayed => "decayed",
            Label::Diverged => "diverged",
            Label::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exploration {
    pub label: Label,
    pub iterations: usize,
    /// `c^{-1/(p+q-1)}`: the amplitude at which `T` preserves the sup norm
    /// of the current shape
    pub final_sup_norm: f64,
    /// `c_k = sup T v_k` for the normalized iterates `v_k`
    pub trajectory: Vec<f64>,
    /// last relative change of the normalized iterate
    pub last_change: f64,
    /// `mu` in `T v = c v(mu r)` for the last step; 1 at a fixed point of `T`
    pub dilation: f64,
    pub note: Option<String>,
    /// limiting shape `v` (sup norm 1, half-width 1) when converged
    #[serde(skip)]
    pub shape: Option<RadialProfile>,
}

pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;
pub const DECAY_THRESHOLD: f64 = 1e-12;
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// `v(lambda r)` with `lambda` chosen so that `v` falls to half its central
/// value at `r = 1`; unchanged (`lambda = 1`) if it never does on the grid.
fn pin_width(v: &RadialProfile) -> Result<(RadialProfile, f64)> {
    let (grid, vals) = (v.grid(), v.values());
    let half = 0.5 * vals[0];
    let Some(i) = vals.iter().position(|&x| x <= half) else {
        return Ok((v.clone(), 1.0));
    };
    if i == 0 || !(vals[i] > 0.0) {
        return Ok((v.clone(), 1.0));
    }
    let t = (half / vals[i - 1]).ln() / (vals[i] / vals[i - 1]).ln();
    let lambda = grid[i - 1] * (t * (grid[i] / grid[i - 1]).ln()).exp();
    let values: Vec<f64> = grid.iter().map(|&r| v.evaluate(lambda * r)).collect();
    let mut tail = *v.tail();
    if !tail.is_compact() {
        let last = grid[grid.len() - 1];
        tail.coefficient = values[values.len() - 1] / tail.shape(last);
    }
    Ok((RadialProfile::from_samples(grid.to_vec(), values, tail)?, lambda))
}

/// Normalized iteration `v <- D(T v / sup T v)`, where `D` is the dilation
/// fixing the half-width of `v` at `r = 1`. `T` commutes with amplitude
/// scaling (`T(lambda v) = lambda^{p+q} T v`) and with the dilations
/// `v -> lambda^{(alpha+beta)/(p+q-1)} v(lambda x)`, so fixed points come in a
/// two-parameter family and both parameters are normalized away. A limit of
/// this map satisfies `T v = c v(mu r)`: with `mu = 1` it gives the fixed point
/// `c^{-1/(p+q-1)} v` of `T`, otherwise a self-similar profile that `T`
/// reproduces up to a dilation. Labels are heuristics: `converged` when the
/// shape changes by less than `1e-4` and stays positive, `decayed`/`diverged` when the candidate's sup norm leaves
/// `[1e-12, 1e12]` (a failed admissibility gate counts as divergence).
pub fn fixed_point_explore(dp: &DoublePotential, seed: &RadialProfile, max_iter: usize) -> Exploration {
    let d = dp.p + dp.q;
    let mut out = Exploration {
        label: Label::Inconclusive,
        iterations: 0,
        final_sup_norm: f64::NAN,
        trajectory: Vec::new(),
        last_change: f64::NAN,
        dilation: f64::NAN,
        note: None,
        shape: None,
    };
    let seed = match dp.on_grid(seed) {
        Ok(s) => s,
        Err(e) => {
            out.label = Label::Diverged;
            out.note = Some(e.to_string());
            return out;
        }
    };
    let sup = seed.sup_norm();
    if seed.is_zero() || sup == 0.0 {
        out.label = Label::Decayed;
        out.final_sup_norm = 0.0;
        return out;
    }
    out.final_sup_norm = sup;
    let mut v = seed.scaled(1.0 / sup);
    for k in 1..=max_iter {
        out.iterations = k;
        let w = match dp.apply(&v) {
            Ok(w) => w,
            Err(e) => {
                out.label = Label::Diverged;
                out.note = Some(e.to_string());
                return out;
            }
        };
        let c = w.sup_norm();
        out.trajectory.push(c);
        if !(c > 0.0) || !c.is_finite() {
            out.label = if c == 0.0 { Label::Decayed } else { Label::Diverged };
            out.final_sup_norm = if c == 0.0 { 0.0 } else { f64::INFINITY };
            return out;
        }
        let next = match pin_width(&w.scaled(1.0 / c)) {
            Ok((n, lambda)) => {
                out.dilation = 1.0 / lambda;
                n
            }
            Err(e) => {
                out.label = Label::Inconclusive;
                out.note = Some(e.to_string());
                return out;
            }
        };
        let change = next
            .values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| if *a > 0.0 { ((a - b) / a).abs() } else { f64::INFINITY })
            .fold(0.0, f64::max);
        out.last_change = change;
        let scale = if (d - 1.0).abs() > 1e-12 { c.powf(-1.0 / (d - 1.0)) } else { f64::NAN };
        out.final_sup_norm = scale;
        v = next;
        if scale.is_nan() {
            // p + q = 1: T is homogeneous of degree one and c is its growth factor
            if change < CONVERGENCE_TOLERANCE {
                out.label = if (c - 1.0).abs() < CONVERGENCE_TOLERANCE {
                    Label::Converged
                } else if c < 1.0 {
                    Label::Decayed
                } else {
                    Label::Diverged
                };
                out.final_sup_norm = c;
                return out;
            }
            continue;
        }
        if scale < DECAY_THRESHOLD {
            out.label = Label::Decayed;
            return out;
        }
        if scale > BLOWUP_THRESHOLD {
            out.label = Label::Diverged;
            return out;
        }
        if change < CONVERGENCE_TOLERANCE && v.values().iter().all(|&x| x > 0.0) {
            out.label = Label::Converged;
            out.shape = Some(v.clone());
            return out;
        }
    }
    out
}

/// `start:end:step`, inclusive of `end` when it is reached exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRange {
    pub start: Rational,
    pub end: Rational,
    pub step: Rational,
}

impl ExactRange {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(Error::Parse(format!("range must be start:end:step, got {text}")));
        };
        let r = Self {
            start: rational::parse_rational(a)?,
            end: rational::parse_rational(b)?,
            step: rational::parse_rational(c)?,
        };
        if !(r.step > Rational::from_integer(0.into())) || r.end < r.start {
            return Err(Error::Parse(format!("range needs step > 0 and end >= start, got {text}")));
        }
        Ok(r)
    }

    pub fn values(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        let mut x = self.start.clone();
        while x <= self.end {
            out.push(x.clone());
            x += &self.step;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub n: u32,
    pub alpha: Rational,
    pub beta: Rational,
    pub p: ExactRange,
    pub q: ExactRange,
    pub budget: usize,
    pub table: TableSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub p: f64,
    pub q: f64,
    pub exists_theorem: bool,
    pub regime_or_witness: String,
    pub empirical_label: Label,
    pub iterations: usize,
    pub final_sup_norm: f64,
    pub agree: bool,
    /// the verdict is constant on the open L-infinity ball of radius `margin`
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
    pub margin: f64,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,q,exists_theorem,regime_or_witness,empirical_label,iterations,final_sup_norm,agree\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{},{:e},{}\n",
                c.p,
                c.q,
                c.exists_theorem,
                c.regime_or_witness,
                c.empirical_label.name(),
                c.iterations,
                c.final_sup_norm,
                c.agree
            ));
        }
        s
    }

    /// `(agreeing, total)` over interior cells.
    pub fn interior_agreement(&self) -> (usize, usize) {
        let interior: Vec<&SweepCell> = self.cells.iter().filter(|c| c.interior).collect();
        (interior.iter().filter(|c| c.agree).count(), interior.len())
    }
}

/// True when the existence verdict is the same at every point of a 9x9
/// lattice filling the open square of half-width `margin` around `pt`.
fn is_interior(pt: &ParameterPoint, margin: &Rational, verdict: bool) -> bool {
    let steps = 8;
    let inset = rational::parse_rational("0.9999").unwrap();
    let h = margin * inset;
    (0..=steps).all(|i| {
        (0..=steps).all(|j| {
            let off = |k: i64| &h * Rational::new((2 * k - steps as i64).into(), (steps as i64).into());
            let p = &pt.p + off(i);
            let q = &pt.q + off(j);
            match ParameterPoint::new(pt.n, pt.alpha.clone(), pt.beta.clone(), p, q) {
                Ok(x) => classify(&x).exists == verdict,
                Err(_) => true,
            }
        })
    })
}

/// Classifies and explores every `(p, q)` cell; cells run concurrently and are
/// returned in row-major order (`q` outer, `p` inner).
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let one = Rational::from_integer(1.into());
    let base = ParameterPoint::new(spec.n, spec.alpha.clone(), spec.beta.clone(), one.clone(), one)?;
    let dp = DoublePotential::new(&base, &spec.table)?;
    let seed = RadialProfile::power_log(1.0, rational::to_f64(&base.codim()), 0.0, dp.radii())?;
    let margin = spec.p.step.clone().min(spec.q.step.clone());
    let grid: Vec<(Rational, Rational)> = spec
        .q
        .values()
        .into_iter()
        .flat_map(|q| spec.p.values().into_iter().map(move |p| (p, q.clone())))
        .collect();
    let cells = grid
        .par_iter()
        .map(|(p, q)| {
            let cell_dp = dp.with_exponents(p, q)?;
            let verdict = classify(cell_dp.point());
            let tag = match (&verdict.regime, &verdict.witness) {
                (Some(r), _) => r.name().to_string(),
                (None, Some(w)) => w.tag.name().to_string(),
                (None, None) => "none".to_string(),
            };
            let ex = fixed_point_explore(&cell_dp, &seed, spec.budget);
            let agree = match ex.label {
                Label::Converged => verdict.exists,
                Label::Decayed | Label::Diverged => !verdict.exists,
                Label::Inconclusive => false,
            };
            Ok(SweepCell {
                p: rational::to_f64(p),
                q: rational::to_f64(q),
                exists_theorem: verdict.exists,
                regime_or_witness: tag,
                empirical_label: ex.label,
                iterations: ex.iterations,
                final_sup_norm: ex.final_sup_norm,
                agree,
                interior: is_interior(cell_dp.point(), &margin, verdict.exists),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        n: spec.n,
        alpha: rational::to_f64(&spec.alpha),
        beta: rational::to_f64(&spec.beta),
        margin: rational::to_f64(&margin),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::LogGrid;

    fn small_spec() -> TableSpec {
        TableSpec {
            grid: LogGrid::new(1e-2, 1e3, 20).unwrap(),
            ..TableSpec::default()
        }
    }

    #[test]
    fn first_gate_rejects_small_p() {
        let pt = ParameterPoint::parse(3, "1", "1", "0.4", "1").unwrap();
        let dp = DoublePotential::new(&pt, &small_spec()).unwrap();
        let u = RadialProfile::power_log(1.0, 2.0, 0.0, dp.radii()).unwrap();
        match dp.apply(&u) {
            Err(Error::DivergentPotential(msg)) => assert!(msg.starts_with("first gate"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let pt = ParameterPoint::parse(3, "1", "1", "3", "3").unwrap();
        let dp = DoublePotential::new(&pt, &small_spec()).unwrap();
        let z = RadialProfile::zero(dp.radii()).unwrap();
        assert!(dp.apply(&z).unwrap().is_zero());
        let ex = fixed_point_explore(&dp, &z, 10);
        assert_eq!((ex.label, ex.iterations), (Label::Decayed, 0));
    }

    #[test]
    fn tail_limits() {
        let t = |s, m| TailModel::new(2.0, s, m);
        assert_eq!(tail_ratio_limit(&t(2.0, 0.0), &TailModel::new(4.0, 2.0, 0.0)), Some(0.5));
        assert_eq!(tail_ratio_limit(&t(3.0, 0.0), &t(2.0, 0.0)), Some(0.0));
        assert_eq!(tail_ratio_limit(&t(1.5, 0.0), &t(2.0, 0.0)), None);
        assert_eq!(tail_ratio_limit(&t(2.0, 1.0), &t(2.0, 0.0)), None);
        assert_eq!(tail_ratio_limit(&t(2.0, -1.0), &t(2.0, 0.0)), Some(0.0));
        let ll = TailModel { loglog: true, ..t(2.0, 0.0) };
        assert_eq!(tail_ratio_limit(&ll, &t(2.0, 0.0)), None);
        assert_eq!(tail_ratio_limit(&ll, &t(2.0, 1.0)), Some(0.0));
    }

    #[test]
    fn bumps_are_c2_cutoffs() {
        let b = Bump::new(0.5);
        assert_eq!(b.evaluate(0.3, 1.0), 1.0);
        assert_eq!(b.evaluate(1.0, 1.0), 0.0);
        assert!((b.evaluate(0.75, 1.0) - 0.5).abs() < 1e-15);
        // second difference at the junction stays small
        let h = 1e-4;
        let d2 = (b.evaluate(0.5 + h, 1.0) - 2.0 * b.evaluate(0.5, 1.0) + b.evaluate(0.5 - h, 1.0)) / (h * h);
        assert!(d2.abs() < 1e-2, "{d2}");
    }

    #[test]
    fn ranges() {
        let r = ExactRange::parse("0.25:1:0.25").unwrap();
        assert_eq!(r.values().len(), 4);
        assert!(ExactRange::parse("1:0:0.1").is_err());
        assert!(ExactRange::parse("1:2").is_err());
    }
}
