//! Numerical check of `I_alpha * (I_beta * f) = I_{alpha+beta} * f`.
//!
//! The inner potential is evaluated by the adaptive engine at the nodes of a
//! piecewise Chebyshev interpolant whose panels are graded geometrically
//! toward the profile's breakpoints, where the inner potential is only
//! Hoelder continuous. The outer convolution integrates that interpolant.

use serde::Serialize;

use super::{potential_at, QuadratureSpec, RieszOrder};
use crate::chebyshev::ChebyshevPanels;
use crate::error::{Error, Result};
use crate::radial::{RadialProfile, TailModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupReport {
    pub radii: Vec<f64>,
    /// `I_alpha * (I_beta * f)`
    pub composed: Vec<f64>,
    /// `I_{alpha+beta} * f`
    pub direct: Vec<f64>,
    pub max_relative_error: f64,
}

const DEGREE: usize = 12;
const FINEST_GAP: f64 = 1e-9;

/// Panel edges from 0 to `end`, geometric in `r` away from the origin and
/// refined by halving toward each breakpoint.
fn panel_edges(breaks: &[f64], end: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    let first = breaks.iter().cloned().fold(1.0, f64::min) / 2.0;
    edges.push(first);
    let mut r = first;
    while r < end {
        r *= 2.0;
        edges.push(r.min(end));
    }
    for &b in breaks {
        edges.push(b);
        let mut d = b / 2.0;
        while d > FINEST_GAP * b {
            edges.push(b - d);
            edges.push(b + d);
            d /= 2.0;
        }
    }
    edges.retain(|&x| x <= end);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    edges
}

/// Compares `I_alpha * (I_beta * f)` with `I_{alpha+beta} * f` at `radii`.
pub fn check_semigroup(
    alpha: &RieszOrder,
    beta: &RieszOrder,
    f: &RadialProfile,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<SemigroupReport> {
    if alpha.dim() != beta.dim() {
        return Err(Error::Precondition("orders live in different dimensions".into()));
    }
    let dim = alpha.dim();
    if alpha.gamma() + beta.gamma() >= dim as f64 {
        return Err(Error::Precondition(format!(
            "the composition rule needs alpha + beta < N, got {} + {} >= {dim}",
            alpha.gamma(),
            beta.gamma()
        )));
    }
    let sum = RieszOrder::new(alpha.gamma() + beta.gamma(), dim)?;
    let end = spec.tail_cutoff;
    let breaks: Vec<f64> = f.breakpoints().into_iter().filter(|&b| b > 0.0 && b < end).collect();
    let edges = panel_edges(&breaks, end);
    let inner = ChebyshevPanels::try_sample(|r| potential_at(beta, f, r, spec).map(|p| p.value), &edges, DEGREE)?;
    // beyond the panels the inner potential follows r^{beta - N}
    let g_end = inner.evaluate(end);
    let mut tail = TailModel::new(1.0, beta.codim(), 0.0);
    tail.coefficient = g_end / tail.shape(end);
    let g = RadialProfile::from_panels(inner, &edges[1..], tail)?;

    let mut composed = Vec::with_capacity(radii.len());
    let mut direct = Vec::with_capacity(radii.len());
    let mut max_relative_error: f64 = 0.0;
    for &r in radii {
        let lhs = potential_at(alpha, &g, r, spec)?.value;
        let rhs = potential_at(&sum, f, r, spec)?.value;
        max_relative_error = max_relative_error.max(((lhs - rhs) / rhs).abs());
        composed.push(lhs);
        direct.push(rhs);
    }
    Ok(SemigroupReport {
        radii: radii.to_vec(),
        composed,
        direct,
        max_relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_orders_summing_past_dimension() {
        let a = RieszOrder::new(2.0, 3).unwrap();
        let b = RieszOrder::new(1.0, 3).unwrap();
        let f = RadialProfile::ball(1.0, &[0.5, 1.0, 2.0]).unwrap();
        assert!(matches!(
            check_semigroup(&a, &b, &f, &[1.0], &QuadratureSpec::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn edges_refine_toward_breakpoints() {
        let e = panel_edges(&[1.0], 100.0);
        assert_eq!(e[0], 0.0);
        assert_eq!(*e.last().unwrap(), 100.0);
        let closest = e.iter().map(|x| (x - 1.0).abs()).filter(|d| *d > 0.0).fold(1.0, f64::min);
        assert!(closest < 2e-9);
    }
}
