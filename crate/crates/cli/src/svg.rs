//! Minimal SVG line charts: one polyline of medians per metric with a shaded
//! interquartile band. Output depends only on the summary rows, so it can be
//! regenerated byte-for-byte from the CSV.

use std::fmt::Write;

use wide2nn::experiment::Summary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

/// Renders `metrics` (all metrics if empty) against the sweep values.
pub fn render(summary: &[Summary], metrics: &[&str], title: &str, xlabel: &str) -> String {
    let mut names: Vec<&str> = Vec::new();
    for s in summary {
        let keep = metrics.is_empty() || metrics.contains(&s.metric.as_str());
        if keep && s.metric != "failed" && !names.contains(&s.metric.as_str()) {
            names.push(&s.metric);
        }
    }
    let shown: Vec<&Summary> = summary.iter().filter(|s| names.contains(&s.metric.as_str())).collect();
    let xs: Vec<f64> = shown.iter().map(|s| s.sweep_value).collect();
    let ys: Vec<f64> = shown.iter().flat_map(|s| [s.q1, s.q3, s.median]).collect();
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let (xlo, xhi) = (fold(&xs, f64::min, f64::INFINITY), fold(&xs, f64::max, f64::NEG_INFINITY));
    let (ylo, yhi) = (fold(&ys, f64::min, f64::INFINITY), fold(&ys, f64::max, f64::NEG_INFINITY));
    let (xlo, xhi) = if xs.is_empty() { (0.0, 1.0) } else { (xlo, xhi) };
    let (ylo, yhi) = if ys.is_empty() { (0.0, 1.0) } else { (ylo, yhi) };
    let pad = 0.05 * (yhi - ylo).max(1e-12);
    let sx = Scale::new(xlo, xhi, LEFT, WIDTH - RIGHT);
    let sy = Scale::new(ylo - pad, yhi + pad, HEIGHT - BOTTOM, TOP);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(title));

    // axes and ticks
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#);
    let mut ticks = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for &t in &ticks {
        let x = sx.map(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, num(t));
    }
    for i in 0..=4 {
        let v = sy.lo + (sy.hi - sy.lo) * i as f64 / 4.0;
        let y = sy.map(v);
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, num(v));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );

    for (i, name) in names.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<&&Summary> = shown.iter().filter(|s| s.metric == *name).collect();
        pts.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value));
        if pts.len() > 1 {
            let upper = pts.iter().map(|s| format!("{:.2},{:.2}", sx.map(s.sweep_value), sy.map(s.q3)));
            let lower = pts.iter().rev().map(|s| format!("{:.2},{:.2}", sx.map(s.sweep_value), sy.map(s.q1)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
            let line: Vec<String> = pts
                .iter()
                .map(|s| format!("{:.2},{:.2}", sx.map(s.sweep_value), sy.map(s.median)))
                .collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        }
        for s in &pts {
            let (x, y) = (sx.map(s.sweep_value), sy.map(s.median));
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                sy.map(s.q1),
                sy.map(s.q3)
            );
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
