//! Self-contained SVG charts.

use std::fmt::Write;

use crate::mesh::{DiscreteField, Mesh};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
"#,
        W / 2.0,
        escape(title)
    );
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            let pad = if log { 0.5 } else { 0.5 * lo.abs().max(1e-3) };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn map(&self, v: f64, a: f64, b: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| a + (v - self.lo) / (self.hi - self.lo) * (b - a))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|k| {
                let t = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
                let label = if self.log { format!("1e{t:.1}") } else { format!("{t:.4}") };
                (t, label)
            })
            .collect()
    }
}

/// Line chart with optional logarithmic axes. Non-positive values are
/// dropped on log axes.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_x: bool, log_y: bool) -> String {
    let keep = |&(x, y): &(f64, f64)| (!log_x || x > 0.0) && (!log_y || y > 0.0);
    let xs = Axis::fit(series.iter().flat_map(|s| s.points.iter().filter(|p| keep(p)).map(|p| p.0)), log_x);
    let ys = Axis::fit(series.iter().flat_map(|s| s.points.iter().filter(|p| keep(p)).map(|p| p.1)), log_y);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(out, r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#444"/>"##, x1 - x0, y0 - y1);
    for (t, label) in xs.ticks() {
        let px = x0 + (t - xs.lo) / (xs.hi - xs.lo) * (x1 - x0);
        let _ = writeln!(out, r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="#444"/><text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"##, y0 + 5.0, y0 + 18.0);
    }
    for (t, label) in ys.ticks() {
        let py = y0 + (t - ys.lo) / (ys.hi - ys.lo) * (y1 - y0);
        let _ = writeln!(out, r##"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="#444"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##, x0 - 5.0, x0 - 8.0, py + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(out, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0, escape(ylabel));
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| keep(p))
            .filter_map(|&(x, y)| Some(format!("{:.2},{:.2}", xs.map(x, x0, x1)?, ys.map(y, y0, y1)?)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if pts.len() == 1 {
            let (px, py) = pts[0].split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(out, r#"<circle cx="{px}" cy="{py}" r="3" fill="{color}"/>"#);
        } else {
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{}"/>"#, pts.join(" "));
        }
        let ly = y1 + 14.0 + 16.0 * k as f64;
        let _ = writeln!(out, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#, x1 - 150.0, x1 - 125.0, x1 - 120.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn color_ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Profile of a field: a line plot on intervals, a cell-averaged heat map on
/// rectangles.
pub fn profile(title: &str, mesh: &Mesh, fields: &[(&str, &DiscreteField)]) -> String {
    if mesh.dimension() == 1 {
        let series: Vec<Series> = fields
            .iter()
            .map(|(name, f)| Series::new(*name, mesh.nodes().iter().zip(&f.values).map(|(p, v)| (p[0], *v)).collect()))
            .collect();
        return line_chart(title, "x", "U(x)", &series, false, false);
    }
    let (name, field) = fields[0];
    let (lo, hi) = (field.min(), field.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (bl, tr) = mesh.bounding_box();
    let scale = ((W - LEFT - RIGHT) / (tr[0] - bl[0])).min((H - TOP - BOTTOM) / (tr[1] - bl[1]));
    let mut out = String::new();
    header(&mut out, &format!("{title}: {name} (min {lo:.6}, max {hi:.6})"));
    for e in mesh.elements() {
        let mean = mesh.element_mean(e, &field.values);
        let pts: Vec<String> = mesh
            .local_nodes(e)
            .iter()
            .map(|&n| {
                let p = mesh.nodes()[n];
                format!("{:.2},{:.2}", LEFT + (p[0] - bl[0]) * scale, H - BOTTOM - (p[1] - bl[1]) * scale)
            })
            .collect();
        let _ = writeln!(out, r#"<polygon points="{}" fill="{}" stroke="none"/>"#, pts.join(" "), color_ramp((mean - lo) / span));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec};

    #[test]
    fn charts_are_self_contained_and_deterministic() {
        let s = vec![Series::new("a<b", vec![(1e-4, 1e-9), (1e-2, 1e-5), (0.0, 1.0)]), Series::new("bound", vec![(1e-4, 1e-4)]).dashed()];
        let a = line_chart("gap", "eps", "gap", &s, true, true);
        assert_eq!(a, line_chart("gap", "eps", "gap", &s, true, true));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("a&lt;b") && !a.contains("href"));
        let m = build_mesh(MeshSpec::Rectangle { nx: 2, ny: 2, lx: 1.0, ly: 1.0 }).unwrap();
        let f = DiscreteField::from_fn(&m, |x| x[0]);
        let h = profile("p", &m, &[("u", &f)]);
        assert_eq!(h.matches("<polygon").count(), 8);
    }
}
