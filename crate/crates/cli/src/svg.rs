//! Minimal static SVG line and scatter plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#c0392b", "#2471a3", "#239b56", "#7d3c98", "#b9770e", "#555555",
];

#[derive(Debug, Clone)]
pub enum Mark {
    Line,
    Dots,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn bounds(series: &[Series]) -> Option<(f64, f64, f64, f64)> {
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite())
    };
    let x0 = pts().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x1 = pts().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y0 = pts().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y1 = pts().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !x0.is_finite() {
        return None;
    }
    let pad = |a: f64, b: f64| {
        if b > a {
            (a, b)
        } else {
            (a - 0.5 * a.abs().max(1e-12), b + 0.5 * b.abs().max(1e-12))
        }
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    Some((x0, x1, y0, y1))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (px0, px1, py0, py1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            out,
            r#"<rect x="{px0}" y="{py1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            px1 - px0,
            py0 - py1
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (px0 + px1) / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            (py0 + py1) / 2.0,
            (py0 + py1) / 2.0,
            escape(&self.y_label)
        );
        if let Some((x0, x1, y0, y1)) = bounds(&self.series) {
            let sx = |x: f64| px0 + (x - x0) / (x1 - x0) * (px1 - px0);
            let sy = |y: f64| py0 - (y - y0) / (y1 - y0) * (py0 - py1);
            for (k, v) in [(0.0, x0), (1.0, x1)] {
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle">{v:.4}</text>"#,
                    px0 + k * (px1 - px0),
                    py0 + 16.0
                );
            }
            for (k, v) in [(0.0, y0), (1.0, y1)] {
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="end">{v:.3e}</text>"#,
                    px0 - 4.0,
                    py0 - k * (py0 - py1) + 4.0
                );
            }
            for (idx, s) in self.series.iter().enumerate() {
                let color = PALETTE[idx % PALETTE.len()];
                let pts: Vec<(f64, f64)> = s
                    .points
                    .iter()
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                    .map(|p| (sx(p.0), sy(p.1)))
                    .collect();
                match s.mark {
                    Mark::Line => {
                        let coords: Vec<String> =
                            pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                        let _ = writeln!(
                            out,
                            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
                            coords.join(" ")
                        );
                    }
                    Mark::Dots => {
                        for (x, y) in pts {
                            let _ = writeln!(
                                out,
                                r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{color}"/>"#
                            );
                        }
                    }
                }
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                    px0 + 8.0,
                    py1 + 16.0 + 14.0 * idx as f64,
                    escape(&s.label)
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}
