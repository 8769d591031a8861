//! Static SVG rendering of a workspace projection: task regions as
//! rectangles, trajectories as polylines with time-stamped waypoints.

use std::fmt::Write;

use stackstl::{Formula, Scenario, Trace};

const SIZE: f64 = 520.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f5fbf", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#34495e"];

/// One polyline: a label, the trace and the two state indices it is drawn on.
pub struct Series<'a> {
    pub label: String,
    pub trace: &'a Trace,
    pub dims: (usize, usize),
}

/// Axis-aligned box `[lo, hi]` on two state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    pub dims: (usize, usize),
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub leader: bool,
}

/// Single-variable bound `x[i] >= v` (`lower`) or `x[i] <= v`.
fn axis_bound(f: &Formula) -> Option<(usize, bool, f64)> {
    let Formula::Pred(p) = f else { return None };
    let mut nz = p.coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0);
    let (i, c) = nz.next()?;
    if nz.next().is_some() {
        return None;
    }
    Some((i, *c > 0.0, -p.offset / c))
}

/// Conjunctions that bound both indices of a pair on both sides.
pub fn regions(phi: &Formula, pairs: &[(usize, usize)], leader: bool, out: &mut Vec<Rect>) {
    match phi {
        Formula::And(children) => {
            let mut lo: Vec<(usize, f64)> = Vec::new();
            let mut hi: Vec<(usize, f64)> = Vec::new();
            for (i, is_lower, v) in children.iter().filter_map(axis_bound) {
                if is_lower {
                    lo.push((i, v));
                } else {
                    hi.push((i, v));
                }
            }
            let interval = |d: usize| {
                let l = lo.iter().filter(|(i, _)| *i == d).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
                let h = hi.iter().filter(|(i, _)| *i == d).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
                (l.is_finite() && h.is_finite()).then_some((l, h))
            };
            for &(a, b) in pairs {
                if let (Some(x), Some(y)) = (interval(a), interval(b)) {
                    let r = Rect { dims: (a, b), x, y, leader };
                    if !out.contains(&r) {
                        out.push(r);
                    }
                }
            }
            children.iter().for_each(|c| regions(c, pairs, leader, out));
        }
        Formula::Or(children) => children.iter().for_each(|c| regions(c, pairs, leader, out)),
        Formula::Not(c) | Formula::Eventually(c, ..) | Formula::Always(c, ..) => regions(c, pairs, leader, out),
        Formula::Until(l, r, ..) => {
            regions(l, pairs, leader, out);
            regions(r, pairs, leader, out);
        }
        Formula::True | Formula::Pred(_) => {}
    }
}

/// Plot window: the state bounds of the first pair, widened to the data.
fn window(scenario: &Scenario, series: &[Series<'_>]) -> ((f64, f64), (f64, f64)) {
    let (a, b) = series.first().map_or((0, 1.min(scenario.state_dim() - 1)), |s| s.dims);
    let sb = &scenario.state_bounds;
    let mut x = (sb.lower[a], sb.upper[a]);
    let mut y = (sb.lower[b], sb.upper[b]);
    for s in series {
        for st in s.trace.states() {
            x = (x.0.min(st[s.dims.0]), x.1.max(st[s.dims.0]));
            y = (y.0.min(st[s.dims.1]), y.1.max(st[s.dims.1]));
        }
    }
    let fix = |(l, h): (f64, f64)| {
        if !l.is_finite() || !h.is_finite() || h - l < 1e-9 {
            let c = if l.is_finite() { l } else { 0.0 };
            (c - 1.0, c + 1.0)
        } else {
            (l, h)
        }
    };
    (fix(x), fix(y))
}

pub fn render_svg(scenario: &Scenario, series: &[Series<'_>], title: &str) -> String {
    let pairs: Vec<(usize, usize)> = series.iter().map(|s| s.dims).collect();
    let mut rects = Vec::new();
    regions(&scenario.phi_leader, &pairs, true, &mut rects);
    regions(&scenario.phi_follower, &pairs, false, &mut rects);
    let ((x0, x1), (y0, y1)) = window(scenario, series);
    let span = SIZE - 2.0 * MARGIN;
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * span;
    // SVG y grows downwards
    let py = |v: f64| SIZE - MARGIN - (v - y0) / (y1 - y0) * span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="20" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="#888"/>"##
    );
    let names = &scenario.state_names;
    if let Some(s) = series.first() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text><text x="6" y="{:.1}">{}</text>"#,
            SIZE / 2.0,
            SIZE - 10.0,
            escape(&names[s.dims.0]),
            SIZE / 2.0,
            escape(&names[s.dims.1])
        );
    }
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{v}</text>"#,
            px(v),
            SIZE - MARGIN + 14.0
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v}</text>"#, MARGIN - 4.0, py(v) + 3.0);
    }
    // only regions on the first pair share the axes
    for r in rects.iter().filter(|r| Some(r.dims) == pairs.first().copied()) {
        let (fill, stroke) = if r.leader { ("#a9cce3", "#2471a3") } else { ("#f5cba7", "#ca6f1e") };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.45" stroke="{stroke}"/>"#,
            px(r.x.0),
            py(r.y.1),
            px(r.x.1) - px(r.x.0),
            py(r.y.0) - py(r.y.1)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = s
            .trace
            .states()
            .iter()
            .map(|st| format!("{:.2},{:.2}", px(st[s.dims.0]), py(st[s.dims.1])))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        for (t, st) in s.trace.states().iter().enumerate() {
            let (cx, cy) = (px(st[s.dims.0]), py(st[s.dims.1]));
            let _ = writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{color}"/>"#);
            if t % 5 == 0 || t + 1 == s.trace.len() {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" fill="{color}">{t}</text>"#,
                    cx + 4.0,
                    cy - 4.0
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            SIZE - MARGIN - 150.0,
            MARGIN + 14.0 * (i as f64 + 1.0),
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
