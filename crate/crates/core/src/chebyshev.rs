//! Piecewise Chebyshev interpolation of smooth radial functions.
//!
//! Used where a sampled potential must be re-integrated to high accuracy:
//! each panel carries the function at Chebyshev points of the second kind
//! and evaluates by the barycentric formula. Panels that start at the origin
//! interpolate in `r`, all others in `ln r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Panel {
    a: f64,
    b: f64,
    logarithmic: bool,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevPanels {
    panels: Vec<Panel>,
    degree: usize,
    nodes: Vec<f64>,
}

fn cheb_points(degree: usize) -> Vec<f64> {
    (0..=degree)
        .map(|j| -(std::f64::consts::PI * j as f64 / degree as f64).cos())
        .collect()
}

impl ChebyshevPanels {
    /// Samples `f` on the panels delimited by `edges` (which must start at 0
    /// or a positive radius and increase strictly).
    pub fn sample<F>(f: F, edges: &[f64], degree: usize) -> Self
    where
        F: Fn(f64) -> f64 + Sync,
    {
        match Self::try_sample(|r| Ok::<f64, std::convert::Infallible>(f(r)), edges, degree) {
            Ok(c) => c,
            Err(e) => match e {},
        }
    }

    /// As [`ChebyshevPanels::sample`] for fallible functions.
    pub fn try_sample<F, E>(f: F, edges: &[f64], degree: usize) -> Result<Self, E>
    where
        F: Fn(f64) -> Result<f64, E> + Sync,
        E: Send,
    {
        assert!(edges.len() >= 2 && degree >= 2);
        let xs = cheb_points(degree);
        let jobs: Vec<(usize, f64)> = edges
            .windows(2)
            .enumerate()
            .flat_map(|(p, w)| {
                let (a, b) = (w[0], w[1]);
                let logarithmic = a > 0.0;
                xs.iter()
                    .map(move |&x| (p, Self::map(a, b, logarithmic, x)))
                    .collect::<Vec<_>>()
            })
            .collect();
        let sampled = jobs.par_iter().map(|&(_, r)| f(r)).collect::<Result<Vec<f64>, E>>()?;
        let panels = edges
            .windows(2)
            .enumerate()
            .map(|(p, w)| Panel {
                a: w[0],
                b: w[1],
                logarithmic: w[0] > 0.0,
                values: sampled[p * (degree + 1)..(p + 1) * (degree + 1)].to_vec(),
            })
            .collect();
        Ok(Self {
            panels,
            degree,
            nodes: xs,
        })
    }

    fn map(a: f64, b: f64, logarithmic: bool, x: f64) -> f64 {
        if logarithmic {
            let (la, lb) = (a.ln(), b.ln());
            (0.5 * (la + lb) + 0.5 * (lb - la) * x).exp()
        } else {
            0.5 * (a + b) + 0.5 * (b - a) * x
        }
    }

    pub fn start(&self) -> f64 {
        self.panels[0].a
    }

    pub fn end(&self) -> f64 {
        self.panels[self.panels.len() - 1].b
    }

    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.panels.iter().map(|p| p.a).collect();
        e.push(self.end());
        e
    }

    /// Evaluates the interpolant; radii outside the covered range are
    /// clamped to the nearest end.
    pub fn evaluate(&self, r: f64) -> f64 {
        let r = r.clamp(self.start(), self.end());
        let idx = self
            .panels
            .partition_point(|p| p.b < r)
            .min(self.panels.len() - 1);
        let p = &self.panels[idx];
        let x = if p.logarithmic {
            let (la, lb) = (p.a.ln(), p.b.ln());
            (2.0 * r.ln() - la - lb) / (lb - la)
        } else {
            (2.0 * r - p.a - p.b) / (p.b - p.a)
        };
        let xs = &self.nodes;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &vj)) in xs.iter().zip(&p.values).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return vj;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == self.degree {
                w *= 0.5;
            }
            num += w * vj / d;
            den += w / d;
        }
        num / den
    }
}
