//! Riesz kernels and radial convolution.
//!
//! For radial `f`, `(I_gamma * f)(r) = int_0^inf K(r, s) f(s) s^{N-1} ds` with
//! the reduced kernel
//!
//! ```text
//! K(r, s) = A_gamma |S^{N-2}| int_0^pi (r^2 + s^2 - 2 r s cos t)^{-(N-gamma)/2} sin^{N-2} t dt.
//! ```
//!
//! Writing `M = max(r, s)` and `d = |r - s| / M`, the base of the power is
//! `M^2 (d^2 + 4 (1 - d) sin^2(t/2))`, which stays accurate as `d -> 0`.

mod convolve;
mod semigroup;
mod table;

pub use convolve::{potential_at, radial_convolve, Potential, PointValue};
pub use semigroup::{check_semigroup, SemigroupReport};
pub use table::{KernelTable, TableSpec};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: u32) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Order `gamma` of a Riesz potential in dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszOrder {
    gamma: f64,
    dim: u32,
}

impl RieszOrder {
    pub fn new(gamma: f64, dim: u32) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("dimension must be at least 2, got {dim}")));
        }
        if !(gamma > 0.0 && gamma < dim as f64) {
            return Err(Error::Domain(format!("order must lie in (0, {dim}), got {gamma}")));
        }
        Ok(Self { gamma, dim })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// `N - gamma`, the decay rate of the kernel.
    pub fn codim(&self) -> f64 {
        self.dim as f64 - self.gamma
    }
}

/// `A_gamma = Gamma((N - gamma)/2) / (pi^{N/2} 2^gamma Gamma(gamma/2))`.
pub fn normalization_constant(order: &RieszOrder) -> f64 {
    let n = order.dim as f64;
    let g = order.gamma;
    gamma((n - g) / 2.0) / (PI.powf(n / 2.0) * 2f64.powf(g) * gamma(g / 2.0))
}

/// Tolerances and cutoffs for the adaptive convolution engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Relative half-width `h` of the band `[r(1-h), r(1+h)]` around the
    /// diagonal singularity.
    pub band: f64,
    /// Radius beyond which the far field is integrated against the kernel's
    /// large-`s` expansion.
    pub tail_cutoff: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 20_000,
            band: 1e-2,
            tail_cutoff: 1e4,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if !(self.band > 0.0 && self.band < 0.5) {
            return Err(Error::Domain(format!("band half-width must lie in (0, 0.5), got {}", self.band)));
        }
        if !(self.tail_cutoff > 1.0 && self.tail_cutoff.is_finite()) {
            return Err(Error::Domain(format!("tail cutoff must exceed 1, got {}", self.tail_cutoff)));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Domain("max_subdivisions must be positive".into()));
        }
        Ok(())
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.abs_tol, self.rel_tol, self.max_subdivisions)
    }
}

const ANGULAR_TOL: Tolerance = Tolerance {
    abs: 0.0,
    rel: 1e-13,
    max_subdivisions: 5000,
};

/// Precomputed constants for one order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    pub order: RieszOrder,
    /// `(N - gamma) / 2`
    lambda: f64,
    /// `A_gamma |S^{N-2}|`
    outer: f64,
    /// `A_gamma |S^{N-1}|`, the coefficient of `s^{gamma - N}` for `s >> r`
    pub far: f64,
    /// `int_0^pi sin^{N-2}`
    j0: f64,
    /// second and fourth order coefficients of `J(t)/J(0)` in `t = r/s`
    pub c2: f64,
    pub c4: f64,
}

impl Kernel {
    pub fn new(order: RieszOrder) -> Self {
        let n = order.dim as f64;
        let a = normalization_constant(&order);
        let lambda = order.codim() / 2.0;
        let nu = (n - 2.0) / 2.0;
        let c2 = lambda * (lambda - nu) / (nu + 1.0);
        let c4 = c2 * (lambda + 1.0) * (lambda - nu + 1.0) / (2.0 * (nu + 2.0));
        Self {
            order,
            lambda,
            outer: a * sphere_area(order.dim - 1),
            far: a * sphere_area(order.dim),
            j0: sphere_area(order.dim) / sphere_area(order.dim - 1),
            c2,
            c4,
        }
    }

    fn sin_power(&self, t: f64) -> f64 {
        match self.order.dim {
            2 => 1.0,
            3 => t.sin(),
            n => t.sin().powi(n as i32 - 2),
        }
    }

    /// `J(d) = int_0^pi (d^2 + 4(1-d) sin^2(t/2))^{-lambda} sin^{N-2} t dt`
    /// for the relative gap `d = |r - s| / max(r, s)` in `[0, 1]`.
    pub fn angular(&self, d: f64) -> Result<f64> {
        if d >= 1.0 {
            return Ok(self.j0);
        }
        let lambda = self.lambda;
        let t = 1.0 - d;
        if d <= 0.0 {
            let g = self.order.gamma;
            if g <= 1.0 {
                return Ok(f64::INFINITY);
            }
            // theta = pi u^e turns the theta^{gamma-2} singularity into u dtheta
            let e = 2.0 / (g - 1.0);
            let est = quad::integrate(
                |u: f64| {
                    if u <= 0.0 {
                        return 0.0;
                    }
                    let th = PI * u.powf(e);
                    let s = (0.5 * th).sin();
                    let jac = PI * e * th / (PI * u);
                    (4.0 * s * s).powf(-lambda) * self.sin_power(th) * jac
                },
                0.0,
                1.0,
                ANGULAR_TOL,
            )?;
            return Ok(est.value);
        }
        let mut pts = vec![0.0];
        let mut x = d / 8.0;
        while x < PI {
            pts.push(x);
            x *= 2.0;
        }
        pts.push(PI);
        let est = quad::integrate_breakpoints(
            |th: f64| {
                let s = (0.5 * th).sin();
                (d * d + 4.0 * t * s * s).powf(-lambda) * self.sin_power(th)
            },
            &pts,
            ANGULAR_TOL,
        )?;
        Ok(est.value)
    }

    /// `K(r, s)` given `m = max(r, s)` and the exact relative gap `d`.
    pub fn value_gap(&self, m: f64, d: f64) -> Result<f64> {
        Ok(self.outer * m.powf(-self.order.codim()) * self.angular(d)?)
    }

    pub fn value(&self, r: f64, s: f64) -> Result<f64> {
        let m = r.max(s);
        if m <= 0.0 {
            return Err(Error::Domain("reduced kernel is undefined at r = s = 0".into()));
        }
        self.value_gap(m, (r - s).abs() / m)
    }

    /// `K(1, e^y)`; the gap is formed from `expm1` so it stays exact near `y = 0`.
    pub fn value_log(&self, y: f64) -> Result<f64> {
        let d = -(-y.abs()).exp_m1();
        self.value_gap(y.max(0.0).exp(), d)
    }
}

/// The reduced kernel `K_gamma(r, s)`. At `r = s` the value is `+inf` for
/// `gamma <= 1` and the finite limit otherwise.
pub fn reduced_kernel(order: &RieszOrder, r: f64, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(r >= 0.0 && s >= 0.0) {
        return Err(Error::Domain(format!("radii must be nonnegative, got ({r}, {s})")));
    }
    Kernel::new(*order).value(r, s)
}
