//! Minimal SVG line charts and heat tables for the summary figures.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 30.0, 40.0, 60.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

#[derive(Debug, Clone, Default)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional `(x, lo, hi)` error bars.
    pub bars: Vec<(f64, f64, f64)>,
    pub dashed: bool,
    /// Markers only, no connecting line.
    pub scatter: bool,
}

#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_x: bool,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let (l, r, t, b) = MARGIN;
        let fx = |x: f64| if self.log_x { x.max(1e-12).log10() } else { x };
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| fx(p.0)));
        let (x0, x1) = extent(xs);
        let ys = self.series.iter().flat_map(|s| {
            s.points
                .iter()
                .map(|p| p.1)
                .chain(s.bars.iter().flat_map(|&(_, lo, hi)| [lo, hi]))
        });
        let (y0, y1) = extent(ys);
        let px = |x: f64| l + (fx(x) - x0) / (x1 - x0) * (W - l - r);
        let py = |y: f64| H - b - (y - y0) / (y1 - y0) * (H - t - b);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(&self.title));
        let _ = writeln!(
            out,
            r#"<path d="M{l},{t} L{l},{} L{},{}" fill="none" stroke="black"/>"#,
            H - b,
            W - r,
            H - b
        );
        for k in 0..=4 {
            let yv = y0 + (y1 - y0) * k as f64 / 4.0;
            let xv = x0 + (x1 - x0) * k as f64 / 4.0;
            let xlabel = if self.log_x { 10f64.powf(xv) } else { xv };
            let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, l - 6.0, py(yv) + 4.0, yv);
            let xp = l + (xv - x0) / (x1 - x0) * (W - l - r);
            let _ = writeln!(out, r#"<text x="{xp:.1}" y="{}" text-anchor="middle">{:.3}</text>"#, H - b + 16.0, xlabel);
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, esc(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let c = COLORS[i % COLORS.len()];
            let d: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.1.is_finite())
                .enumerate()
                .map(|(k, &(x, y))| format!("{}{:.1},{:.1}", if k == 0 { "M" } else { "L" }, px(x), py(y)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            if !s.scatter {
                let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{c}" stroke-width="2"{dash}/>"#, d.join(" "));
            }
            for &(x, y) in s.points.iter().filter(|p| p.1.is_finite()) {
                let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, px(x), py(y));
            }
            for &(x, lo, hi) in &s.bars {
                let _ = writeln!(
                    out,
                    r#"<line x1="{0:.1}" x2="{0:.1}" y1="{1:.1}" y2="{2:.1}" stroke="{c}"/>"#,
                    px(x),
                    py(lo),
                    py(hi)
                );
            }
            let ly = t + 16.0 * i as f64 + 10.0;
            let _ = writeln!(
                out,
                r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{c}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                W - r - 150.0,
                W - r - 130.0,
                W - r - 125.0,
                ly + 4.0,
                esc(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// A grid of colored cells with the value printed in each.
pub fn heat_table(title: &str, row_label: &str, rows: &[String], col_label: &str, cols: &[String], values: &[Vec<f64>]) -> String {
    let cw = 56.0;
    let ch = 28.0;
    let (l, t) = (90.0, 60.0);
    let w = l + cw * cols.len() as f64 + 20.0;
    let h = t + ch * rows.len() as f64 + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(out, r#"<text x="{}" y="38" text-anchor="middle">{}</text>"#, l + cw * cols.len() as f64 / 2.0, esc(col_label));
    let _ = writeln!(out, r#"<text x="10" y="{}">{}</text>"#, t - 6.0, esc(row_label));
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, l + cw * (j as f64 + 0.5), t - 6.0, esc(c));
    }
    for (i, rlab) in rows.iter().enumerate() {
        let y = t + ch * i as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 8.0, y + ch / 2.0 + 4.0, esc(rlab));
        for (j, &v) in values[i].iter().enumerate() {
            let x = l + cw * j as f64;
            let u = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
            let fill = if v.is_finite() {
                format!("rgb({},{},{})", (255.0 * (1.0 - u)) as u8, (255.0 * (0.4 + 0.6 * u)) as u8, 255)
            } else {
                "#dddddd".to_string()
            };
            let _ = writeln!(out, r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="white"/>"#);
            let label = if v.is_finite() { format!("{v:.2}") } else { "-".into() };
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, x + cw / 2.0, y + ch / 2.0 + 4.0);
        }
    }
    out.push_str("</svg>\n");
    out
}
