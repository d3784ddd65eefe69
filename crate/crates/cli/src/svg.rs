//! Minimal SVG 1.1 charts. Every plotted number also appears in a CSV or JSON output.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(width: f64, height: f64) -> String {
    format!(
        r#"<svg version="1.1" xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>
"#
    )
}

/// Round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Plot area with linear axes.
struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 1.0, a + 1.0) };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn draw(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str, xticks: bool) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
        let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
        for t in ticks(self.y.0, self.y.1, 6) {
            let y = self.py(t);
            let _ = writeln!(out, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/>"##);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, label(t));
        }
        if xticks {
            for t in ticks(self.x.0, self.x.1, 6) {
                let x = self.px(t);
                let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y1 + 5.0);
                let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 18.0, label(t));
            }
        }
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

pub struct Series {
    pub name: String,
    /// `(x, y, half-width of the error bar)`
    pub points: Vec<(f64, f64, f64)>,
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (xl, xh) = range(all().map(|p| p.0));
    let (yl, yh) = range(all().flat_map(|p| [p.1 - p.2, p.1 + p.2]));
    let axes = Axes::new((xl, xh), (yl.min(0.0), yh * 1.05));
    let mut out = header(W, H);
    axes.draw(&mut out, title, xlabel, ylabel, true);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| format!("{}{:.2} {:.2}", if k == 0 { 'M' } else { 'L' }, axes.px(p.0), axes.py(p.1)))
            .collect();
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for p in &s.points {
            let (x, y) = (axes.px(p.0), axes.py(p.1));
            if p.2 > 0.0 {
                let _ = writeln!(
                    out,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    axes.py(p.1 - p.2),
                    axes.py(p.1 + p.2)
                );
            }
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, W - RIGHT - 150.0, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, W - RIGHT - 135.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

pub struct BoxGroup {
    pub label: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Box plots with whiskers at min/max and a red median mark.
pub fn box_plot(title: &str, ylabel: &str, groups: &[BoxGroup]) -> String {
    let (yl, yh) = range(groups.iter().flat_map(|g| [g.min, g.max]));
    let axes = Axes::new((0.0, groups.len() as f64), (yl.min(0.0), yh * 1.05));
    let mut out = header(W, H);
    axes.draw(&mut out, title, "configuration", ylabel, false);
    for (i, g) in groups.iter().enumerate() {
        let cx = axes.px(i as f64 + 0.5);
        let half = 0.3 * (axes.px(1.0) - axes.px(0.0));
        let (top, bot) = (axes.py(g.q3), axes.py(g.q1));
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            axes.py(g.max),
            axes.py(g.min)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="white" stroke="black"/>"#,
            cx - half,
            2.0 * half,
            (bot - top).max(0.5)
        );
        let my = axes.py(g.median);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{my:.2}" x2="{:.2}" y2="{my:.2}" stroke="red" stroke-width="2"/>"#,
            cx - half,
            cx + half
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            H - BOTTOM + 16.0,
            escape(&g.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bars over `(lo, hi, count)` bins.
pub fn histogram(title: &str, xlabel: &str, bins: &[(f64, f64, usize)]) -> String {
    let (xl, xh) = range(bins.iter().flat_map(|b| [b.0, b.1]));
    let top = bins.iter().map(|b| b.2).max().unwrap_or(1).max(1) as f64;
    let axes = Axes::new((xl, xh), (0.0, top * 1.05));
    let mut out = header(W, H);
    axes.draw(&mut out, title, xlabel, "runs", true);
    for b in bins {
        let (x0, x1) = (axes.px(b.0), axes.px(b.1));
        let y = axes.py(b.2 as f64);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            (x1 - x0).max(0.0),
            axes.py(0.0) - y
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Planar scene in `[-extent, extent]^2`.
pub struct Scene {
    extent: f64,
    size: f64,
    body: String,
}

impl Scene {
    pub fn new(extent: f64, size: f64) -> Self {
        Self {
            extent,
            size,
            body: String::new(),
        }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let s = self.size / (2.0 * self.extent);
        (self.size / 2.0 + p[0] * s, self.size / 2.0 - p[1] * s)
    }

    pub fn circle(&mut self, center: [f64; 2], radius: f64, stroke: &str, dashed: bool) {
        let (x, y) = self.map(center);
        let r = radius * self.size / (2.0 * self.extent);
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="none" stroke="{stroke}"{dash}/>"#);
    }

    pub fn dot(&mut self, p: [f64; 2], radius: f64, fill: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{radius}" fill="{fill}"/>"#);
    }

    pub fn arrow(&mut self, to: [f64; 2], stroke: &str) {
        let (x0, y0) = self.map([0.0, 0.0]);
        let (x, y) = self.map(to);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y:.2}" stroke="{stroke}" stroke-width="2"/>"#
        );
        self.dot(to, 4.0, stroke);
    }

    pub fn closed_path(&mut self, pts: &[[f64; 2]], stroke: &str, dashed: bool) {
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (x, y) = self.map(*p);
                format!("{}{x:.2} {y:.2}", if i == 0 { 'M' } else { 'L' })
            })
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(self.body, r#"<path d="{} Z" fill="none" stroke="{stroke}" stroke-width="2"{dash}/>"#, d.join(" "));
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(self.body, r#"<text x="{x}" y="{y}">{}</text>"#, escape(s));
    }

    pub fn finish(self) -> String {
        let mut out = header(self.size, self.size);
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}
