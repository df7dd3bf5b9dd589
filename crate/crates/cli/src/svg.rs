//! Minimal self-contained SVG line plots and heatmaps.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

impl Scale {
    fn map(self, v: f64) -> Option<f64> {
        match self {
            Scale::Linear => v.is_finite().then_some(v),
            Scale::Log => (v > 0.0 && v.is_finite()).then(|| v.log10()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Horizontal reference line.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub label: String,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub lines: Vec<Line>,
    pub references: Vec<Reference>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - d, hi + d);
    }
    let pad = 0.03 * (hi - lo);
    (lo - pad, hi + pad)
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, x_scale: Scale, y_scale: Scale) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let (xp, yp) = (frame.px(xv), frame.py(yv));
        let shown = |v: f64, s: Scale| tick_label(if s == Scale::Log { 10f64.powf(v) } else { v });
        let _ = writeln!(out, r#"<line x1="{xp:.2}" y1="{y1}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(out, r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y1 + 18.0, shown(xv, x_scale));
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{yp:.2}" x2="{x0}" y2="{yp:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, yp + 4.0, shown(yv, y_scale));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

impl LinePlot {
    pub fn render(&self) -> String {
        let mapped: Vec<Vec<(f64, f64)>> = self
            .lines
            .iter()
            .map(|l| {
                l.points
                    .iter()
                    .filter_map(|&(x, y)| Some((self.x_scale.map(x)?, self.y_scale.map(y)?)))
                    .collect()
            })
            .collect();
        let refs: Vec<f64> = self.references.iter().filter_map(|r| self.y_scale.map(r.y)).collect();
        let xs = mapped.iter().flatten().map(|p| p.0);
        let ys = mapped.iter().flatten().map(|p| p.1).chain(refs.iter().copied());
        let range = |it: &mut dyn Iterator<Item = f64>| it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (mut xr, mut yr) = (range(&mut xs.clone()), range(&mut ys.clone()));
        if !xr.0.is_finite() {
            xr = (0.0, 1.0);
        }
        if !yr.0.is_finite() {
            yr = (0.0, 1.0);
        }
        let frame = Frame {
            x: padded(xr.0, xr.1),
            y: padded(yr.0, yr.1),
        };
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &frame, &self.x_label, &self.y_label, self.x_scale, self.y_scale);
        for (i, (line, pts)) in self.lines.iter().zip(&mapped).enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
            let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            );
            let ly = TOP + 16.0 * i as f64 + 8.0;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 20.0);
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&line.label));
        }
        for (r, y) in self.references.iter().zip(&refs) {
            let yp = frame.py(*y);
            let _ = writeln!(
                out,
                r#"<line x1="{LEFT}" y1="{yp:.2}" x2="{}" y2="{yp:.2}" stroke="gray" stroke-dasharray="2 3"/>"#,
                WIDTH - RIGHT
            );
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" fill="gray">{}</text>"#, WIDTH - RIGHT + 4.0, yp + 4.0, escape(&r.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Perceptually ordered colormap, `v` clamped to `[0, 1]`.
pub fn colormap(v: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let s = v * (STOPS.len() - 1) as f64;
    let i = (s.floor() as usize).min(STOPS.len() - 2);
    let f = s - i as f64;
    let c: Vec<u8> = (0..3).map(|k| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Evenly spread indices, at most `max` of them.
fn thin(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..max).map(|i| i * (n - 1) / (max - 1)).collect();
    idx.dedup();
    idx
}

/// `values[i][j]` at `(x[j], y[i])`, colored on `[0, vmax]`.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64], values: &[Vec<f64>], vmax: f64) -> String {
    let (xi, yi) = (thin(x.len(), 250), thin(y.len(), 120));
    let edges = |grid: &[f64], idx: &[usize]| -> Vec<f64> {
        let pts: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
        if pts.len() == 1 {
            return vec![pts[0] - 0.5, pts[0] + 0.5];
        }
        let mut e = vec![pts[0] - 0.5 * (pts[1] - pts[0])];
        e.extend(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        e.push(pts[pts.len() - 1] + 0.5 * (pts[pts.len() - 1] - pts[pts.len() - 2]));
        e
    };
    let (xe, ye) = (edges(x, &xi), edges(y, &yi));
    let frame = Frame {
        x: (xe[0], xe[xe.len() - 1]),
        y: (ye[0], ye[ye.len() - 1]),
    };
    let mut out = String::new();
    header(&mut out, title);
    for (a, &i) in yi.iter().enumerate() {
        for (b, &j) in xi.iter().enumerate() {
            let (px0, px1) = (frame.px(xe[b]), frame.px(xe[b + 1]));
            let (py0, py1) = (frame.py(ye[a + 1]), frame.py(ye[a]));
            let _ = writeln!(
                out,
                r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px1 - px0 + 0.3,
                py1 - py0 + 0.3,
                colormap(values[i][j] / vmax)
            );
        }
    }
    axes(&mut out, &frame, x_label, y_label, Scale::Linear, Scale::Linear);
    let (bx, bw) = (WIDTH - RIGHT + 30.0, 20.0);
    for k in 0..50 {
        let f = k as f64 / 50.0;
        let yb = HEIGHT - BOTTOM - (f + 0.02) * (HEIGHT - TOP - BOTTOM);
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{yb:.2}" width="{bw}" height="{:.2}" fill="{}"/>"#,
            (HEIGHT - TOP - BOTTOM) / 50.0 + 0.3,
            colormap(f + 0.01)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, bx + bw + 4.0, TOP + 4.0, tick_label(vmax));
    let _ = writeln!(out, r#"<text x="{}" y="{}">0</text>"#, bx + bw + 4.0, HEIGHT - BOTTOM);
    out.push_str("</svg>\n");
    out
}
