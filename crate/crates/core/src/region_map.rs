//! SVG rendering of a sweep: one colored cell per `(p, q)` with the exact
//! region boundaries drawn on top.

use std::cmp::Ordering;
use std::fmt::Write;

use crate::verifier::{Label, SweepResult};

const CELL: f64 = 24.0;
const MARGIN: f64 = 48.0;
const LEGEND: f64 = 150.0;

fn color(label: Label) -> &'static str {
    match label {
        Label::Converged => "#4caf50",
        Label::Decayed => "#42a5f5",
        Label::Diverged => "#e53935",
        Label::Inconclusive => "#9e9e9e",
    }
}

fn unique_sorted(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Renders the sweep as a standalone SVG document.
pub fn render_svg(result: &SweepResult) -> String {
    let ps = unique_sorted(result.cells.iter().map(|c| c.p));
    let qs = unique_sorted(result.cells.iter().map(|c| c.q));
    let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1.0 };
    let (dp, dq) = (step(&ps), step(&qs));
    let (p0, p1) = (ps[0] - dp / 2.0, ps[ps.len() - 1] + dp / 2.0);
    let (q0, q1) = (qs[0] - dq / 2.0, qs[qs.len() - 1] + dq / 2.0);
    let w = CELL * ps.len() as f64;
    let h = CELL * qs.len() as f64;
    let x = |p: f64| MARGIN + (p - p0) / (p1 - p0) * w;
    let y = |q: f64| MARGIN + (q1 - q) / (q1 - q0) * h;

    let mut s = String::new();
    let total_w = 2.0 * MARGIN + w + LEGEND;
    let total_h = 2.0 * MARGIN + h;
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0}" height="{total_h:.0}" viewBox="0 0 {total_w:.0} {total_h:.0}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<title>N={} alpha={} beta={}: empirical labels and existence region</title>"#,
        result.n, result.alpha, result.beta
    )
    .unwrap();
    writeln!(s, r#"<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{w:.2}" height="{h:.2}"/></clipPath></defs>"#).unwrap();

    for c in &result.cells {
        let (cx, cy) = (x(c.p - dp / 2.0), y(c.q + dq / 2.0));
        writeln!(
            s,
            r#"<rect x="{cx:.2}" y="{cy:.2}" width="{CELL:.2}" height="{CELL:.2}" fill="{}" stroke="white" stroke-width="0.5"><title>p={} q={} theorem={} empirical={}</title></rect>"#,
            color(c.empirical_label),
            c.p,
            c.q,
            if c.exists_theorem { "exists" } else { "none" },
            c.empirical_label.name()
        )
        .unwrap();
        if c.exists_theorem {
            // theorem verdict as a dot in the cell center
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="black"/>"#, x(c.p), y(c.q)).unwrap();
        }
        if !c.agree {
            let (a, b) = (x(c.p), y(c.q));
            let d = CELL * 0.3;
            writeln!(
                s,
                r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="white" stroke-width="2"/>"#,
                a - d,
                b - d,
                a + d,
                b + d,
                a - d,
                b + d,
                a + d,
                b - d
            )
            .unwrap();
        }
    }

    // boundary lines of the existence conditions
    let (n, alpha, beta) = (result.n as f64, result.alpha, result.beta);
    let crit_q = beta / (n - alpha);
    let crit_sum = (n + beta) / (n - alpha);
    let mut lines: Vec<((f64, f64), (f64, f64), &str)> = vec![
        ((crit_q, q0), (crit_q, q1), "p = β/(N−α)"),
        ((crit_sum - q0, q0), (crit_sum - q1, q1), "p+q = (N+β)/(N−α)"),
    ];
    match (alpha + beta).partial_cmp(&n).unwrap_or(Ordering::Equal) {
        Ordering::Greater => lines.push(((p0, crit_q), (p1, crit_q), "q = β/(N−α)")),
        Ordering::Equal => lines.push(((p0, 1.0), (p1, 1.0), "q = 1")),
        Ordering::Less => {
            let k = (n - alpha - beta) / n;
            lines.push(((p0, 1.0 - k * p0), (p1, 1.0 - k * p1), "q = 1 − (N−α−β)p/N"));
        }
    }
    writeln!(s, r#"<g clip-path="url(#plot)" stroke="black" stroke-width="1.5" fill="none">"#).unwrap();
    for ((a, b), (c, d), name) in &lines {
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"><title>{name}</title></line>"#,
            x(*a),
            y(*b),
            x(*c),
            y(*d)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();

    // axes
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w:.2}" height="{h:.2}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    let ticks = |v: &[f64]| -> Vec<f64> {
        let every = (v.len() / 5).max(1);
        v.iter().step_by(every).cloned().collect()
    };
    for p in ticks(&ps) {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{p}</text>"#, x(p), MARGIN + h + 14.0).unwrap();
    }
    for q in ticks(&qs) {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{q}</text>"#, MARGIN - 6.0, y(q) + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">p</text>"#, MARGIN + w / 2.0, MARGIN + h + 32.0).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">q</text>"#, MARGIN - 30.0, MARGIN + h / 2.0).unwrap();

    // legend
    let lx = MARGIN + w + 16.0;
    let mut ly = MARGIN;
    for label in [Label::Converged, Label::Decayed, Label::Diverged, Label::Inconclusive] {
        writeln!(s, r#"<rect x="{lx:.2}" y="{ly:.2}" width="12" height="12" fill="{}"/>"#, color(label)).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 18.0, ly + 10.0, label.name()).unwrap();
        ly += 18.0;
    }
    writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="black"/>"#, lx + 6.0, ly + 6.0).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="{:.2}">theorem: exists</text>"#, lx + 18.0, ly + 10.0).unwrap();
    ly += 18.0;
    writeln!(s, r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#, ly + 6.0, lx + 12.0, ly + 6.0).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="{:.2}">region boundary</text>"#, lx + 18.0, ly + 10.0).unwrap();
    ly += 18.0;
    let (agree, total) = result.interior_agreement();
    writeln!(s, r#"<text x="{lx:.2}" y="{:.2}">interior agreement {agree}/{total}</text>"#, ly + 10.0).unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::SweepCell;

    #[test]
    fn renders_cells_and_boundaries() {
        let cell = |p: f64, q: f64, ok: bool| SweepCell {
            p,
            q,
            exists_theorem: ok,
            regime_or_witness: "B1".into(),
            empirical_label: if ok { Label::Converged } else { Label::Diverged },
            iterations: 3,
            final_sup_norm: 1.0,
            agree: true,
            interior: true,
        };
        let r = SweepResult {
            n: 3,
            alpha: 1.0,
            beta: 1.0,
            margin: 0.5,
            cells: vec![cell(1.0, 1.0, false), cell(1.5, 1.0, true), cell(1.0, 1.5, true), cell(1.5, 1.5, true)],
        };
        let svg = render_svg(&r);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect x=").count(), 4 + 2 + 4);
        assert_eq!(svg.matches("<line x1").count(), 3 + 1);
        assert!(svg.contains("interior agreement 4/4"));
        assert_eq!(svg, render_svg(&r));
    }
}
