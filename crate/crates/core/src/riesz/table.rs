//! Fixed-node discretization of `I_gamma` on a geometric grid.
//!
//! With `r_i = r_0 e^{ih}` and Gauss nodes `x_k` on each log-panel, the kernel
//! value `K(r_i, r_p e^{x_k h}) = r_i^{gamma-N} K(1, e^{(p - i + x_k) h})`
//! depends only on the offset `p - i`, so about `2 n m` kernel evaluations
//! serve all `n^2 m` quadrature weights. The two panels touching `r_i` use
//! nodes clustered at `r_i`; the grid is extended by a few decades in which
//! the input is read from its tail model, and the far field is integrated
//! against the kernel's large-`s` expansion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convolve::{asymptotic_shape, far_moments};
use super::{Kernel, RieszOrder};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::radial::{integrability_check, LogGrid, RadialProfile, TailModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub grid: LogGrid,
    /// Gauss nodes per log-panel.
    pub nodes: usize,
    /// Gauss nodes per half of each near-diagonal panel.
    pub band_nodes: usize,
    /// Decades beyond the grid covered by the extended panels.
    pub tail_decades: f64,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self {
            grid: LogGrid::default(),
            nodes: 8,
            band_nodes: 24,
            tail_decades: 3.0,
        }
    }
}

/// Precomputed reduced-kernel values for one order on one grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    kernel: Kernel,
    radii: Vec<f64>,
    h: f64,
    /// panels in the extended grid
    panels: usize,
    x: Vec<f64>,
    w: Vec<f64>,
    /// `K(1, e^{(o + x_k) h})` at `[(o + n - 1) m + k]`
    offsets: Vec<f64>,
    /// clustered nodes `(y, weight, K(1, e^y))` for the panel above and below `r_i`
    band_up: Vec<(f64, f64, f64)>,
    band_down: Vec<(f64, f64, f64)>,
    /// nodes `(s, weight)` on `[0, r_0]` and `K(r_i, s_k)` at `[i * len + k]`
    origin_nodes: Vec<(f64, f64)>,
    origin_kernel: Vec<f64>,
    /// `K(1, e^{o h})` for `o` in `-(n-1)..=(n-1)`
    grid_offsets: Vec<f64>,
    band_resolution: usize,
}

fn clustered(count: usize, power: f64) -> Vec<(f64, f64)> {
    // u in [0, 1] split into two Gauss panels, mapped by t = u^power
    let (x, w) = gauss_legendre(count);
    let mut out = Vec::with_capacity(2 * count);
    for (a, b) in [(0.0, 0.5), (0.5, 1.0)] {
        for (xi, wi) in x.iter().zip(&w) {
            let u = a + (b - a) * xi;
            out.push((u.powf(power), (b - a) * wi * power * u.powf(power - 1.0)));
        }
    }
    out
}

impl KernelTable {
    pub fn new(order: RieszOrder, spec: &TableSpec) -> Result<Self> {
        if spec.nodes < 2 || spec.band_nodes < 2 || !(spec.tail_decades > 0.0) {
            return Err(Error::Domain("table needs at least two nodes per panel and a positive tail extension".into()));
        }
        let kernel = Kernel::new(order);
        let radii = spec.grid.radii();
        let n = radii.len();
        let h = spec.grid.log_step();
        let ext = (spec.tail_decades * std::f64::consts::LN_10 / h).ceil() as usize;
        let panels = n - 1 + ext;
        let m = spec.nodes;
        let (x, w) = gauss_legendre(m);

        let offset_jobs: Vec<f64> = (0..n - 1 + panels)
            .flat_map(|j| {
                let o = j as f64 - (n as f64 - 1.0);
                x.iter().map(move |xk| (o + xk) * h).collect::<Vec<_>>()
            })
            .collect();
        let offsets = offset_jobs
            .par_iter()
            .map(|&y| kernel.value_log(y))
            .collect::<Result<Vec<_>>>()?;

        let g = order.gamma();
        let power = 3f64.max(3.0 / g);
        let cl = clustered(spec.band_nodes, power);
        let band = |sign: f64| -> Result<Vec<(f64, f64, f64)>> {
            cl.par_iter()
                .map(|&(t, wt)| {
                    let y = sign * h * t;
                    Ok((y, h * wt, kernel.value_log(y)?))
                })
                .collect()
        };
        let band_up = band(1.0)?;
        let band_down = band(-1.0)?;

        let r0 = radii[0];
        // s = r_0 (1 - t), clustered at r_0; the gap to r_i is formed exactly
        let origin_nodes: Vec<(f64, f64)> = cl.iter().map(|&(t, wt)| (r0 * (1.0 - t), r0 * wt)).collect();
        let origin_jobs: Vec<(f64, f64)> = radii
            .iter()
            .flat_map(|&r| cl.iter().map(move |&(t, _)| (r, t)))
            .collect();
        let origin_kernel = origin_jobs
            .par_iter()
            .map(|&(r, t)| {
                let rho = r0 / r;
                kernel.value_gap(r, (1.0 - rho) + rho * t)
            })
            .collect::<Result<Vec<_>>>()?;

        let grid_offsets = (0..2 * n - 1)
            .into_par_iter()
            .map(|j| {
                let o = j as f64 - (n as f64 - 1.0);
                if j == n - 1 {
                    kernel.value_gap(1.0, 0.0)
                } else {
                    kernel.value_log(o * h)
                }
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            kernel,
            radii,
            h,
            panels,
            x,
            w,
            offsets,
            band_up,
            band_down,
            origin_nodes,
            origin_kernel,
            grid_offsets,
            band_resolution: spec.band_nodes,
        })
    }

    pub fn order(&self) -> RieszOrder {
        self.kernel.order
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn band_resolution(&self) -> usize {
        self.band_resolution
    }

    /// `K(r_i, r_j)` on grid pairs (`+inf` on the diagonal when `gamma <= 1`).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.radii.len();
        let codim = self.kernel.order.codim();
        self.radii[i].powf(-codim) * self.grid_offsets[j + n - 1 - i]
    }

    /// End of the extended grid, where the far-field expansion takes over.
    pub fn far_start(&self) -> f64 {
        self.radii[0] * (self.panels as f64 * self.h).exp()
    }

    /// `I_gamma * f` on the table grid, with the asymptotic tail fitted at the
    /// last radius.
    pub fn apply(&self, f: &RadialProfile) -> Result<RadialProfile> {
        let order = self.kernel.order;
        if f.is_zero() {
            return RadialProfile::zero(&self.radii);
        }
        let check = integrability_check(f, &order)?;
        if !check.well_defined {
            return Err(Error::DivergentPotential(format!(
                "input tail r^-{} is not integrable against the order-{} kernel",
                f.tail().power,
                order.gamma()
            )));
        }
        let n = self.radii.len();
        let m = self.x.len();
        let dim = order.dim() as f64;
        let codim = order.codim();
        let h = self.h;
        let r0 = self.radii[0];

        let weighted: Vec<f64> = (0..self.panels * m)
            .map(|j| {
                let (p, k) = (j / m, j % m);
                let s = r0 * ((p as f64 + self.x[k]) * h).exp();
                f.evaluate(s) * s.powf(dim) * h * self.w[k]
            })
            .collect();
        let (far0, far2) = far_moments(&self.kernel, f, self.far_start())?;

        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ri = self.radii[i];
                let row = &self.offsets[(n - 1 - i) * m..(n - 1 - i) * m + self.panels * m];
                let mut acc: f64 = row.iter().zip(&weighted).map(|(a, b)| a * b).sum();
                // replace the two panels touching r_i by clustered rules
                for p in [i.wrapping_sub(1), i] {
                    if p < self.panels {
                        let span = p * m..(p + 1) * m;
                        acc -= row[span.clone()].iter().zip(&weighted[span]).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                for &(y, wt, k) in &self.band_up {
                    let s = ri * y.exp();
                    acc += k * f.evaluate(s) * s.powf(dim) * wt;
                }
                if i > 0 {
                    for &(y, wt, k) in &self.band_down {
                        let s = ri * y.exp();
                        acc += k * f.evaluate(s) * s.powf(dim) * wt;
                    }
                }
                let mut value = ri.powf(-codim) * acc;
                let ok = &self.origin_kernel[i * self.origin_nodes.len()..(i + 1) * self.origin_nodes.len()];
                for (&(s, wt), &k) in self.origin_nodes.iter().zip(ok) {
                    value += k * f.evaluate(s) * s.powf(dim - 1.0) * wt;
                }
                value + far0 + ri * ri * far2
            })
            .collect();

        let last = values[n - 1];
        let mut tail = asymptotic_shape(f.tail(), &order);
        tail.coefficient = if last > 0.0 { last / tail.shape(self.radii[n - 1]) } else { 0.0 };
        if tail.coefficient == 0.0 {
            tail = TailModel::compact();
        }
        RadialProfile::from_samples(self.radii.clone(), values, tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riesz::{potential_at, QuadratureSpec};

    #[test]
    fn newtonian_ball_on_table() {
        let order = RieszOrder::new(2.0, 3).unwrap();
        let table = KernelTable::new(order, &TableSpec::default()).unwrap();
        let ball = RadialProfile::ball(1.0, table.radii()).unwrap();
        let u = table.apply(&ball).unwrap();
        for (&r, &v) in u.grid().iter().zip(u.values()) {
            let want = if r <= 1.0 { 0.5 - r * r / 6.0 } else { 1.0 / (3.0 * r) };
            // the indicator's jump sits inside a panel, so only a few digits are expected there
            let tol = if (r - 1.0).abs() < 0.1 { 2e-3 } else { 1e-6 };
            assert!((v - want).abs() < tol * want, "r={r}: {v} vs {want}");
        }
    }

    #[test]
    fn agrees_with_adaptive_engine() {
        for (g, dim, a) in [(1.0, 3, 6.0), (0.5, 3, 2.0), (1.5, 4, 5.0)] {
            let order = RieszOrder::new(g, dim).unwrap();
            let table = KernelTable::new(order, &TableSpec::default()).unwrap();
            let f = RadialProfile::power_log(1.0, a, 0.0, table.radii()).unwrap();
            let u = table.apply(&f).unwrap();
            let n = table.radii().len();
            for i in [0, 1, 57, 120, 161, 213, n - 1] {
                let r = table.radii()[i];
                let want = potential_at(&order, &f, r, &QuadratureSpec::default()).unwrap().value;
                let got = u.values()[i];
                assert!((got / want - 1.0).abs() < 1e-8, "gamma={g} N={dim} r={r}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn grid_entries_are_symmetric() {
        let order = RieszOrder::new(0.8, 3).unwrap();
        let spec = TableSpec {
            grid: LogGrid::new(1e-2, 1e2, 10).unwrap(),
            ..TableSpec::default()
        };
        let table = KernelTable::new(order, &spec).unwrap();
        let n = table.radii().len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let (a, b) = (table.entry(i, j), table.entry(j, i));
                    assert!(a > 0.0 && a.is_finite());
                    assert!((a / b - 1.0).abs() < 1e-10, "{i},{j}");
                }
            }
        }
    }
}
