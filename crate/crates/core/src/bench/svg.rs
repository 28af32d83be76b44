//! Static SVG renderings of the report artifacts.
//!
//! Output is a pure function of the input: coordinates use fixed decimal
//! formatting and there is no randomness or timestamp.

use std::fmt::Write as _;

use crate::advisor::{CorrelationMatrix, ExtremePairs, HistogramStats, SurfaceGrid};
use crate::seeds;
use crate::shap::{DependenceSeries, ShapMatrix};

const FONT: &str = "font-family=\"sans-serif\"";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Canvas {
    buf: String,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Self {
        let mut buf = String::new();
        let _ = writeln!(
            buf,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
        );
        buf.push_str(
            "<defs><pattern id=\"nodata\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">\
             <rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>\
             <path d=\"M0,6 L6,0\" stroke=\"#999999\" stroke-width=\"1\"/></pattern></defs>\n",
        );
        let _ = writeln!(
            buf,
            "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>"
        );
        Self { buf }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.buf,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>"
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.buf,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width:.1}\"/>"
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.buf,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.1}\" fill=\"{fill}\" fill-opacity=\"0.8\"/>"
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.buf,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size:.0}\" {FONT} text-anchor=\"{anchor}\">{}</text>",
            escape(s)
        );
    }

    fn cross(&mut self, cx: f64, cy: f64, r: f64, stroke: &str) {
        self.line(cx - r, cy - r, cx + r, cy + r, stroke, 2.0);
        self.line(cx - r, cy + r, cx + r, cy - r, stroke, 2.0);
    }

    fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

fn hex(rgb: [f64; 3]) -> String {
    let c = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(rgb[0]), c(rgb[1]), c(rgb[2]))
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// Sequential ramp from dark purple through teal to yellow, `t` in `[0, 1]`.
fn sequential(t: f64) -> String {
    const STOPS: [[f64; 3]; 3] = [[0.267, 0.005, 0.329], [0.128, 0.567, 0.551], [0.993, 0.906, 0.144]];
    let t = t.clamp(0.0, 1.0);
    if t < 0.5 {
        hex(lerp3(STOPS[0], STOPS[1], t * 2.0))
    } else {
        hex(lerp3(STOPS[1], STOPS[2], (t - 0.5) * 2.0))
    }
}

/// Blue-white-red ramp for values in `[-1, 1]`.
fn diverging(r: f64) -> String {
    let white = [1.0, 1.0, 1.0];
    if r < 0.0 {
        hex(lerp3(white, [0.129, 0.4, 0.675], -r))
    } else {
        hex(lerp3(white, [0.698, 0.094, 0.169], r))
    }
}

fn normalize(values: &[f64]) -> impl Fn(f64) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

pub fn histogram_svg(h: &HistogramStats) -> String {
    let (w, hgt) = (480.0, 320.0);
    let (left, right, top, bottom) = (50.0, 20.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = hgt - top - bottom;
    let mut c = Canvas::new(w, hgt);
    c.text(w / 2.0, 22.0, 14.0, "middle", &h.column);
    let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bw = pw / h.counts.len() as f64;
    for (i, &n) in h.counts.iter().enumerate() {
        let bh = ph * n as f64 / max;
        c.rect(left + bw * i as f64, top + ph - bh, bw * 0.95, bh, "#4c72b0");
    }
    c.line(left, top + ph, left + pw, top + ph, "#000000", 1.0);
    c.line(left, top, left, top + ph, "#000000", 1.0);
    let first = h.edges[0];
    let last = h.edges[h.edges.len() - 1];
    c.text(left, top + ph + 16.0, 11.0, "start", &format!("{first:.3}"));
    c.text(left + pw, top + ph + 16.0, 11.0, "end", &format!("{last:.3}"));
    c.text(left - 6.0, top + 10.0, 11.0, "end", &format!("{max:.0}"));
    c.text(
        w / 2.0,
        hgt - 12.0,
        11.0,
        "middle",
        &format!("n={}  skew={:.3}  uniform p={:.3}", h.n, h.skew, h.uniform_p),
    );
    c.finish()
}

/// Heatmap of a correlation matrix. Positive extreme pairs get a black
/// cross, negative ones a white cross; undefined cells are hatched.
pub fn matrix_svg(m: &CorrelationMatrix, marks: Option<&ExtremePairs>, title: &str) -> String {
    let p = m.columns.len();
    let cell = 28.0;
    let label = 150.0;
    let size = label + cell * p as f64 + 20.0;
    let mut c = Canvas::new(size, size + 30.0);
    c.text(size / 2.0, 20.0, 14.0, "middle", title);
    let top = 30.0 + label;
    let index = |name: &str| m.columns.iter().position(|c| c == name);
    for i in 0..p {
        c.text(
            label - 4.0,
            top + cell * i as f64 + cell * 0.65,
            10.0,
            "end",
            &m.columns[i],
        );
        let _ = writeln!(
            c.buf,
            "<text transform=\"translate({:.2},{:.2}) rotate(-90)\" font-size=\"10\" {FONT}>{}</text>",
            label + cell * i as f64 + cell * 0.65,
            top - 4.0,
            escape(&m.columns[i])
        );
        for j in 0..p {
            let (x, y) = (label + cell * j as f64, top + cell * i as f64);
            match m.r[i][j] {
                Some(r) => {
                    c.rect(x, y, cell, cell, &diverging(r));
                    c.text(x + cell / 2.0, y + cell * 0.62, 8.0, "middle", &format!("{r:.2}"));
                }
                None => c.rect(x, y, cell, cell, "url(#nodata)"),
            }
        }
    }
    if let Some(marks) = marks {
        for (pairs, colour) in [(&marks.positive, "#000000"), (&marks.negative, "#ffffff")] {
            for pair in pairs {
                if let (Some(i), Some(j)) = (index(&pair.a), index(&pair.b)) {
                    for (r, col) in [(i, j), (j, i)] {
                        let cx = label + cell * col as f64 + cell / 2.0;
                        let cy = top + cell * r as f64 + cell / 2.0;
                        c.cross(cx, cy, cell * 0.3, colour);
                    }
                }
            }
        }
    }
    c.finish()
}

/// Mean objective per cell; cells without trials are hatched and labelled.
pub fn surface_svg(g: &SurfaceGrid) -> String {
    let res_x = g.x_edges.len() - 1;
    let res_y = g.y_edges.len() - 1;
    let (left, top) = (60.0, 40.0);
    let cell = (400.0 / res_x.max(res_y) as f64).floor().max(4.0);
    let pw = cell * res_x as f64;
    let ph = cell * res_y as f64;
    let mut c = Canvas::new(left + pw + 90.0, top + ph + 60.0);
    c.text(
        left + pw / 2.0,
        22.0,
        14.0,
        "middle",
        &format!("{} vs {}", g.y_param, g.x_param),
    );
    let means: Vec<f64> = g.cell_mean.iter().flatten().filter_map(|m| *m).collect();
    let norm = normalize(&means);
    for yi in 0..res_y {
        for xi in 0..res_x {
            // Larger y is drawn higher up.
            let x = left + cell * xi as f64;
            let y = top + ph - cell * (yi + 1) as f64;
            match g.cell_mean[yi][xi] {
                Some(m) => c.rect(x, y, cell, cell, &sequential(norm(m))),
                None => c.rect(x, y, cell, cell, "url(#nodata)"),
            }
        }
    }
    c.text(left, top + ph + 16.0, 11.0, "start", &format!("{:.3}", g.x_edges[0]));
    c.text(
        left + pw,
        top + ph + 16.0,
        11.0,
        "end",
        &format!("{:.3}", g.x_edges[res_x]),
    );
    c.text(left - 4.0, top + ph, 11.0, "end", &format!("{:.3}", g.y_edges[0]));
    c.text(left - 4.0, top + 10.0, 11.0, "end", &format!("{:.3}", g.y_edges[res_y]));
    c.text(left + pw / 2.0, top + ph + 34.0, 12.0, "middle", &g.x_param);
    let lx = left + pw + 20.0;
    c.rect(lx, top, 14.0, 14.0, "url(#nodata)");
    c.text(lx + 18.0, top + 11.0, 10.0, "start", "no data");
    if let (Some(lo), Some(hi)) = (
        means.iter().copied().reduce(f64::min),
        means.iter().copied().reduce(f64::max),
    ) {
        c.rect(lx, top + 24.0, 14.0, 14.0, &sequential(1.0));
        c.text(lx + 18.0, top + 35.0, 10.0, "start", &format!("{hi:.3}"));
        c.rect(lx, top + 44.0, 14.0, 14.0, &sequential(0.0));
        c.text(lx + 18.0, top + 55.0, 10.0, "start", &format!("{lo:.3}"));
    }
    c.finish()
}

/// Deterministic vertical jitter in `[-0.5, 0.5)` for point `i`.
fn jitter(i: usize, row: usize) -> f64 {
    let h = seeds::derive(row as u64, i as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

/// Attribution summary: one row per column in `order`, top to bottom,
/// points coloured by the column's value.
pub fn shap_summary_svg(m: &ShapMatrix, order: &[String]) -> String {
    let row_h = 26.0;
    let (left, top, pw) = (170.0, 40.0, 420.0);
    let ph = row_h * order.len() as f64;
    let mut c = Canvas::new(left + pw + 30.0, top + ph + 50.0);
    c.text(left + pw / 2.0, 22.0, 14.0, "middle", "attribution summary");
    let max = m
        .rows
        .iter()
        .flat_map(|r| r.attributions.iter().map(|a| a.abs()))
        .fold(0.0, f64::max)
        .max(1e-12);
    let sx = |v: f64| left + pw / 2.0 + v / max * pw / 2.0;
    c.line(sx(0.0), top, sx(0.0), top + ph, "#888888", 1.0);
    for (k, name) in order.iter().enumerate() {
        let Some(j) = m.columns.iter().position(|c| c == name) else {
            continue;
        };
        let cy = top + row_h * (k as f64 + 0.5);
        c.text(left - 6.0, cy + 4.0, 11.0, "end", name);
        let values = m.column_values(j);
        let norm = normalize(&values);
        for (i, (row, &v)) in m.rows.iter().zip(&values).enumerate() {
            let y = cy + jitter(i, j) * row_h * 0.7;
            c.circle(sx(row.attributions[j]), y, 2.0, &sequential(norm(v)));
        }
    }
    c.text(sx(-max), top + ph + 16.0, 11.0, "start", &format!("{:.3}", -max));
    c.text(sx(max), top + ph + 16.0, 11.0, "end", &format!("{max:.3}"));
    c.text(left + pw / 2.0, top + ph + 34.0, 12.0, "middle", "attribution");
    c.finish()
}

/// Feature value against its attribution, coloured by the interaction
/// column's value.
pub fn dependence_svg(d: &DependenceSeries) -> String {
    let (left, top, pw, ph) = (60.0, 40.0, 400.0, 280.0);
    let mut c = Canvas::new(left + pw + 30.0, top + ph + 60.0);
    c.text(
        left + pw / 2.0,
        22.0,
        14.0,
        "middle",
        &format!("{} (colour: {})", d.feature, d.interaction),
    );
    let xs: Vec<f64> = d.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = d.points.iter().map(|p| p.1).collect();
    let cs: Vec<f64> = d.points.iter().map(|p| p.2).collect();
    let (nx, ny, nc) = (normalize(&xs), normalize(&ys), normalize(&cs));
    for &(x, y, col) in &d.points {
        c.circle(left + nx(x) * pw, top + ph - ny(y) * ph, 2.5, &sequential(nc(col)));
    }
    c.line(left, top + ph, left + pw, top + ph, "#000000", 1.0);
    c.line(left, top, left, top + ph, "#000000", 1.0);
    if let (Some(lo), Some(hi)) = (xs.iter().copied().reduce(f64::min), xs.iter().copied().reduce(f64::max)) {
        c.text(left, top + ph + 16.0, 11.0, "start", &format!("{lo:.3}"));
        c.text(left + pw, top + ph + 16.0, 11.0, "end", &format!("{hi:.3}"));
    }
    if let (Some(lo), Some(hi)) = (ys.iter().copied().reduce(f64::min), ys.iter().copied().reduce(f64::max)) {
        c.text(left - 4.0, top + ph, 11.0, "end", &format!("{lo:.3}"));
        c.text(left - 4.0, top + 10.0, 11.0, "end", &format!("{hi:.3}"));
    }
    c.text(left + pw / 2.0, top + ph + 34.0, 12.0, "middle", &d.feature);
    c.finish()
}
