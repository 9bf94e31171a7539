//! Adaptive evaluation of `I_gamma * f` at individual radii.
//!
//! The `s`-axis is cut at the profile's breakpoints, at decades, and at
//! `r(1 -+ h)` and `r`. The two pieces touching `r` use `|s - r| = g u^kappa`
//! so the diagonal singularity becomes a bounded integrand; the piece at the
//! origin is integrated in `s`, the rest in `ln s`. Beyond the far cutoff the
//! kernel is replaced by `A |S^{N-1}| s^{gamma-N} (1 + c2 (r/s)^2)` and the
//! first neglected term of that expansion gives the reported tail bound.
//! All pieces share one global error budget.

use rayon::prelude::*;
use serde::Serialize;

use super::{normalization_constant, Kernel, QuadratureSpec, RieszOrder};
use crate::error::{Error, Result};
use crate::quad::{self, Piece};
use crate::radial::{integrability_check, RadialProfile, TailModel};

/// One evaluated radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointValue {
    pub radius: f64,
    pub value: f64,
    /// Quadrature error estimate.
    pub error: f64,
    /// Bound on the error from truncating the kernel expansion in the far field.
    pub tail_bound: f64,
    /// `A_gamma (2r)^{gamma-N} int_{B_r} f`, which the value must dominate.
    pub lower_bound: f64,
}

/// `I_gamma * f` sampled at the requested radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potential {
    pub points: Vec<PointValue>,
    /// Asymptotic model fitted at the last radius; `None` when that radius
    /// does not exceed 1.
    pub tail: Option<TailModel>,
}

impl Potential {
    pub fn radii(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.radius).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn profile(&self) -> Result<RadialProfile> {
        let tail = self
            .tail
            .ok_or_else(|| Error::Domain("a profile needs output radii beyond r = 1".into()))?;
        RadialProfile::from_samples(self.radii(), self.values(), tail)
    }
}

/// Large-`r` shape `r^{-s} L(ln r)` of `I_gamma * f` for a tail of the given
/// shape; the coefficient is left at 1.
pub(crate) fn asymptotic_shape(tail: &TailModel, order: &RieszOrder) -> TailModel {
    let n = order.dim() as f64;
    let g = order.gamma();
    let lead = TailModel::new(1.0, n - g, 0.0);
    if tail.is_compact() {
        return lead;
    }
    let s = tail.power;
    if (s - n).abs() <= 1e-9 {
        if tail.loglog {
            return TailModel::new(1.0, n - g, 1.0);
        }
        let sigma = tail.logpower;
        if (sigma + 1.0).abs() <= 1e-12 {
            TailModel {
                loglog: true,
                ..lead
            }
        } else if sigma < -1.0 {
            lead
        } else {
            TailModel::new(1.0, n - g, sigma + 1.0)
        }
    } else if s > n {
        lead
    } else {
        TailModel {
            coefficient: 1.0,
            power: s - g,
            logpower: tail.logpower,
            loglog: tail.loglog,
        }
    }
}

/// Evaluates `I_gamma * f` at every radius (concurrently, results in input order).
pub fn radial_convolve(
    order: &RieszOrder,
    f: &RadialProfile,
    out_radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<Potential> {
    spec.validate()?;
    if out_radii.is_empty() {
        return Err(Error::Domain("no output radii".into()));
    }
    if out_radii[0] < 0.0 || out_radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("output radii must be nonnegative and strictly increasing".into()));
    }
    gate(order, f)?;
    let kernel = Kernel::new(*order);
    let points = out_radii
        .par_iter()
        .map(|&r| evaluate_point(&kernel, f, r, spec))
        .collect::<Result<Vec<_>>>()?;
    let last = points[points.len() - 1];
    let tail = (last.radius > 1.0).then(|| {
        let mut t = asymptotic_shape(f.tail(), order);
        t.coefficient = if last.value > 0.0 { last.value / t.shape(last.radius) } else { 0.0 };
        t
    });
    Ok(Potential { points, tail })
}

/// Evaluates `I_gamma * f` at a single radius.
pub fn potential_at(order: &RieszOrder, f: &RadialProfile, r: f64, spec: &QuadratureSpec) -> Result<PointValue> {
    spec.validate()?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius must be finite and nonnegative, got {r}")));
    }
    gate(order, f)?;
    evaluate_point(&Kernel::new(*order), f, r, spec)
}

fn gate(order: &RieszOrder, f: &RadialProfile) -> Result<()> {
    let check = integrability_check(f, order)?;
    if !check.well_defined {
        let t = f.tail();
        return Err(Error::DivergentPotential(format!(
            "f is not in L^1((1+|x|)^-(N-gamma) dx): tail r^-{} (log r)^{} against gamma = {}",
            t.power,
            t.logpower,
            order.gamma()
        )));
    }
    Ok(())
}

fn evaluate_point(kernel: &Kernel, f: &RadialProfile, r: f64, spec: &QuadratureSpec) -> Result<PointValue> {
    let order = kernel.order;
    let n = order.dim() as f64;
    let g = order.gamma();
    let h = spec.band;
    let far_start = spec.tail_cutoff.max(1e3 * r);

    let mut pts: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .filter(|&x| x > 0.0 && x < far_start)
        .collect();
    let lo = pts.iter().cloned().fold(1e-3, f64::min);
    let lo = if r > 0.0 { lo.min(r) } else { lo };
    let mut dec = 10f64.powf(lo.log10().floor());
    while dec < far_start {
        pts.push(dec);
        dec *= 10.0;
    }
    if r > 0.0 {
        pts.retain(|&x| (x - r).abs() > 1e-12 * r);
        pts.extend([r * (1.0 - h), r, r * (1.0 + h)]);
    }
    pts.push(far_start);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());

    let kappa = 2f64.max(2.0 / g);
    let mut pieces: Vec<Piece> = Vec::with_capacity(pts.len() + 1);
    let mut a = 0.0;
    for &b in &pts {
        let (lo, hi) = (a, b);
        a = b;
        if r > 0.0 && hi == r {
            let gap = r - lo;
            pieces.push(Box::new(move |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let du = gap * u.powf(kappa);
                let s = r - du;
                let k = kernel.value_gap(r, du / r).unwrap_or(f64::NAN);
                k * f.evaluate(s) * s.powf(n - 1.0) * gap * kappa * u.powf(kappa - 1.0)
            }));
        } else if r > 0.0 && lo == r {
            let gap = hi - r;
            pieces.push(Box::new(move |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let du = gap * u.powf(kappa);
                let s = r + du;
                let k = kernel.value_gap(s, du / s).unwrap_or(f64::NAN);
                k * f.evaluate(s) * s.powf(n - 1.0) * gap * kappa * u.powf(kappa - 1.0)
            }));
        } else if lo == 0.0 {
            if r == 0.0 {
                // s = b u^{1/gamma} absorbs s^{gamma - 1}
                let c = kernel.far * hi.powf(g) / g;
                pieces.push(Box::new(move |u: f64| c * f.evaluate(hi * u.powf(1.0 / g))));
            } else {
                pieces.push(Box::new(move |u: f64| {
                    let s = hi * u;
                    kernel.value(r, s).unwrap_or(f64::NAN) * f.evaluate(s) * s.powf(n - 1.0) * hi
                }));
            }
        } else {
            let (la, lb) = (lo.ln(), hi.ln());
            let w = lb - la;
            if r == 0.0 {
                pieces.push(Box::new(move |u: f64| {
                    let s = (la + w * u).exp();
                    kernel.far * f.evaluate(s) * s.powf(g) * w
                }));
            } else {
                pieces.push(Box::new(move |u: f64| {
                    let s = (la + w * u).exp();
                    kernel.value(r, s).unwrap_or(f64::NAN) * f.evaluate(s) * s.powf(n) * w
                }));
            }
        }
    }

    let far = far_piece(kernel, f, r, far_start);
    if let Some(p) = far {
        pieces.push(p);
    }
    let total = quad::integrate_pieces(&pieces, spec.tolerance())?;

    let far_value = match far_piece(kernel, f, r, far_start) {
        Some(p) => quad::integrate(p, 0.0, 1.0, spec.tolerance())?.value.abs(),
        None => 0.0,
    };
    let t = r / far_start;
    let tail_bound = far_value * 2.0 * kernel.c4.abs() * t.powi(4) / (1.0 + kernel.c2 * t * t).abs();

    let lower_bound = if r > 0.0 {
        normalization_constant(&order) * (2.0 * r).powf(g - n) * f.ball_integral(r, order.dim())?
    } else {
        0.0
    };
    let slack = 1e-9 * lower_bound + spec.abs_tol + total.error;
    if total.value + slack < lower_bound {
        return Err(Error::LowerBound {
            radius: r,
            value: total.value,
            bound: lower_bound,
        });
    }
    Ok(PointValue {
        radius: r,
        value: total.value,
        error: total.error,
        tail_bound,
        lower_bound,
    })
}

/// `A |S^{N-1}| int_L^inf f(s) s^{gamma-1} (1 + c2 r^2/s^2) ds` mapped onto `[0, 1]`.
fn far_piece<'a>(kernel: &'a Kernel, f: &'a RadialProfile, r: f64, start: f64) -> Option<Piece<'a>> {
    let z0 = start.ln();
    if f.tail().is_compact() && f.log_value(z0) == f64::NEG_INFINITY {
        return None;
    }
    let g = kernel.order.gamma();
    let c = kernel.far;
    let c2r2 = kernel.c2 * r * r;
    Some(tail_map(f.tail().power - g, z0, move |z: f64| {
        let e = f.log_value(z) + g * z;
        if e == f64::NEG_INFINITY {
            return 0.0;
        }
        c * e.exp() * (1.0 + c2r2 * (-2.0 * z).exp())
    }))
}

/// Maps `int_{z0}^inf g(z) dz` onto `[0, 1]` for `g` decaying like `e^{-nu z}`
/// (or only logarithmically when `nu = 0`).
fn tail_map<'a, G: Fn(f64) -> f64 + Sync + 'a>(nu: f64, z0: f64, g: G) -> Piece<'a> {
    if nu > 1e-12 {
        Box::new(move |w: f64| {
            if w >= 1.0 {
                return 0.0;
            }
            let v = w / (1.0 - w);
            g(z0 + v / nu) / (nu * (1.0 - w) * (1.0 - w))
        })
    } else {
        Box::new(move |w: f64| {
            if w >= 1.0 {
                return 0.0;
            }
            let z = z0 / (1.0 - w);
            g(z) * z0 / ((1.0 - w) * (1.0 - w))
        })
    }
}

/// Far-field moments `(F0, F2)` such that the contribution of `s > start` to
/// `I_gamma * f` at radius `r` is `F0 + r^2 F2`.
pub(crate) fn far_moments(kernel: &Kernel, f: &RadialProfile, start: f64) -> Result<(f64, f64)> {
    let z0 = start.ln();
    if f.tail().is_compact() && f.log_value(z0) == f64::NEG_INFINITY {
        return Ok((0.0, 0.0));
    }
    let g = kernel.order.gamma();
    let tol = crate::quad::Tolerance::new(0.0, 1e-12, 4000);
    let moment = |kappa: f64| -> Result<f64> {
        let piece = tail_map(f.tail().power - kappa, z0, move |z: f64| {
            let e = f.log_value(z) + kappa * z;
            if e == f64::NEG_INFINITY {
                0.0
            } else {
                e.exp()
            }
        });
        Ok(quad::integrate(piece, 0.0, 1.0, tol)?.value)
    };
    let m0 = moment(g)?;
    let m2 = if kernel.c2 == 0.0 { 0.0 } else { moment(g - 2.0)? };
    Ok((kernel.far * m0, kernel.far * kernel.c2 * m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::LogGrid;
    use crate::riesz::sphere_area;

    fn grid() -> Vec<f64> {
        LogGrid::default().radii()
    }

    #[test]
    fn newtonian_ball() {
        let o = RieszOrder::new(2.0, 3).unwrap();
        let ball = RadialProfile::ball(1.0, &grid()).unwrap();
        let p = radial_convolve(&o, &ball, &[0.0, 0.5, 1.0, 2.0], &QuadratureSpec::default()).unwrap();
        let want = [0.5, 0.5 - 0.25 / 6.0, 1.0 / 3.0, 1.0 / 6.0];
        for (pt, w) in p.points.iter().zip(want) {
            assert!((pt.value - w).abs() < 1e-9, "r={}: {} vs {w}", pt.radius, pt.value);
            assert!(pt.value >= pt.lower_bound);
        }
    }

    #[test]
    fn origin_value_of_ball() {
        let spec = QuadratureSpec::default();
        for g in [0.3, 1.0, 1.7, 2.6] {
            let o = RieszOrder::new(g, 3).unwrap();
            let ball = RadialProfile::ball(1.0, &grid()).unwrap();
            let v = potential_at(&o, &ball, 0.0, &spec).unwrap().value;
            let want = normalization_constant(&o) * sphere_area(3) / g;
            assert!((v / want - 1.0).abs() < 1e-9, "gamma={g}");
        }
    }

    #[test]
    fn divergent_input_is_rejected() {
        let o = RieszOrder::new(1.0, 3).unwrap();
        let f = RadialProfile::power_log(1.0, 1.0, 0.0, &grid()).unwrap();
        assert!(matches!(
            potential_at(&o, &f, 1.0, &QuadratureSpec::default()),
            Err(Error::DivergentPotential(_))
        ));
    }

    #[test]
    fn slowly_decaying_input_uses_far_field() {
        // N=3, gamma=2, f = (1+r)^{-2.5}: compare against the 1/max(r,s) kernel
        let o = RieszOrder::new(2.0, 3).unwrap();
        let f = RadialProfile::power_log(1.0, 2.5, 0.0, &grid()).unwrap();
        let r = 3.0;
        let v = potential_at(&o, &f, r, &QuadratureSpec::default()).unwrap().value;
        let inner = quad::integrate(|s: f64| (1.0 + s).powf(-2.5) * s * s / r, 0.0, r, crate::quad::Tolerance::new(0.0, 1e-13, 1000))
            .unwrap()
            .value;
        // int_r^inf (1+s)^{-2.5} s ds, closed form
        let q = 1.0 + r;
        let outer = 2.0 * q.powf(-0.5) - (2.0 / 3.0) * q.powf(-1.5);
        let want = inner + outer;
        assert!((v / want - 1.0).abs() < 1e-8, "{v} vs {want}");
    }

    #[test]
    fn output_tail_shapes() {
        let o = RieszOrder::new(1.0, 3).unwrap();
        let shape = |s, sigma| {
            let t = asymptotic_shape(&TailModel::new(1.0, s, sigma), &o);
            (t.power, t.logpower, t.loglog)
        };
        assert_eq!(shape(2.0, 0.0), (1.0, 0.0, false));
        assert_eq!(shape(3.0, 0.0), (2.0, 1.0, false));
        assert_eq!(shape(3.0, -1.0), (2.0, 0.0, true));
        assert_eq!(shape(3.0, -2.0), (2.0, 0.0, false));
        assert_eq!(shape(5.0, 1.0), (2.0, 0.0, false));
    }
}
