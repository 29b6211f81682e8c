//! Minimal self-contained SVG plots and PNG heatmaps.

use std::fmt::Write as _;
use std::path::Path;

const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 46.0;

/// Scatter/line plot with linear or log-x axes.
pub struct SvgPlot {
    width: f64,
    height: f64,
    title: String,
    x_label: String,
    y_label: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    log_x: bool,
    body: String,
}

impl SvgPlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            width: 720.0,
            height: 480.0,
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            log_x: false,
            body: String::new(),
        }
    }

    pub fn with_ranges(mut self, x: (f64, f64), y: (f64, f64)) -> Self {
        self.x_range = x;
        self.y_range = y;
        self
    }

    pub fn with_log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    fn tx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        let (x, lo, hi) = if self.log_x {
            (x.ln(), lo.ln(), hi.ln())
        } else {
            (x, lo, hi)
        };
        MARGIN_L + (x - lo) / (hi - lo) * (self.width - MARGIN_L - MARGIN_R)
    }

    fn ty(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - MARGIN_B - (y - lo) / (hi - lo) * (self.height - MARGIN_T - MARGIN_B)
    }

    fn in_range(&self, p: (f64, f64)) -> bool {
        p.0 >= self.x_range.0
            && p.0 <= self.x_range.1
            && p.1 >= self.y_range.0
            && p.1 <= self.y_range.1
    }

    pub fn scatter(&mut self, points: &[(f64, f64)], color: &str, radius: f64) {
        for &p in points {
            if !self.in_range(p) {
                continue;
            }
            let _ = write!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}"/>"#,
                self.tx(p.0),
                self.ty(p.1)
            );
        }
        self.body.push('\n');
    }

    pub fn line(&mut self, points: &[(f64, f64)], color: &str, stroke_width: f64) {
        if points.len() < 2 {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.tx(x), self.ty(y)))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{stroke_width}"/>"#,
            coords.join(" ")
        );
    }

    pub fn vline(&mut self, x: f64, color: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}" stroke-width="1" stroke-dasharray="4 3"/>"#,
            self.tx(x),
            self.ty(self.y_range.0),
            self.ty(self.y_range.1)
        );
    }

    fn ticks(lo: f64, hi: f64) -> Vec<f64> {
        let span = hi - lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| span / s <= 6.0)
            .unwrap_or(mag * 10.0);
        let mut t = (lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= hi + 1e-12 * span {
            out.push(t);
            t += step;
        }
        out
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        // Frame.
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            MARGIN_L,
            MARGIN_T,
            self.width - MARGIN_L - MARGIN_R,
            self.height - MARGIN_T - MARGIN_B
        );
        // Ticks and labels.
        let x_ticks = if self.log_x {
            let mut t = Vec::new();
            let mut d = 10f64.powf(self.x_range.0.log10().floor());
            while d <= self.x_range.1 {
                if d >= self.x_range.0 {
                    t.push(d);
                }
                d *= 10.0;
            }
            t
        } else {
            Self::ticks(self.x_range.0, self.x_range.1)
        };
        for t in x_ticks {
            let x = self.tx(t);
            let y0 = self.height - MARGIN_B;
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" font-size="12" text-anchor="middle">{t}</text>"#,
                y0 + 5.0,
                y0 + 19.0
            );
        }
        for t in Self::ticks(self.y_range.0, self.y_range.1) {
            let y = self.ty(t);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{t:.4}</text>"#,
                MARGIN_L - 5.0,
                MARGIN_L,
                MARGIN_L - 8.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="20" font-size="15" text-anchor="middle">{}</text>"#,
            0.5 * (MARGIN_L + self.width - MARGIN_R),
            xml_escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
            0.5 * (MARGIN_L + self.width - MARGIN_R),
            self.height - 10.0,
            xml_escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            0.5 * (MARGIN_T + self.height - MARGIN_B),
            0.5 * (MARGIN_T + self.height - MARGIN_B),
            xml_escape(&self.y_label)
        );
        svg.push_str(&self.body);
        svg.push_str("</svg>\n");
        std::fs::write(path, svg)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a [0,1]-normalized heatmap to PNG with optional overlay points
/// ((q, p) in the unit square, drawn in the given RGB color).
pub fn heatmap_png(
    values: &[f64],
    nq: usize,
    np: usize,
    pixels_per_cell: usize,
    overlays: &[(&[(f64, f64)], [u8; 3])],
    path: &Path,
) -> Result<(), image::ImageError> {
    let w = (nq * pixels_per_cell) as u32;
    let h = (np * pixels_per_cell) as u32;
    let mut img = image::RgbImage::new(w, h);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let iq = (x as usize) / pixels_per_cell;
        // Image rows run top-down; p runs bottom-up.
        let ip = np - 1 - (y as usize) / pixels_per_cell;
        *px = image::Rgb(colormap(values[ip * nq + iq]));
    }
    for (points, color) in overlays {
        for &(q, p) in points.iter() {
            let q = q.rem_euclid(1.0);
            let p = p.rem_euclid(1.0);
            let x = ((q * w as f64) as u32).min(w - 1);
            let y = h - 1 - ((p * h as f64) as u32).min(h - 1);
            img.put_pixel(x, y, image::Rgb(*color));
        }
    }
    img.save(path)
}

/// Dark-blue -> yellow-white ramp.
fn colormap(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * v.powf(0.7)).round() as u8;
    let g = (255.0 * v.powf(1.1)).round() as u8;
    let b = (90.0 + 165.0 * v.powf(3.0)).round() as u8;
    [r, g, b]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_wellformed_svg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        let mut plot = SvgPlot::new("t", "x", "y").with_ranges((0.0, 2.0), (-1.0, 1.0));
        plot.line(&[(0.0, -1.0), (1.0, 0.5), (2.0, 1.0)], "#336699", 1.5);
        plot.scatter(&[(0.5, 0.0), (5.0, 5.0)], "red", 2.0);
        plot.vline(1.0, "gray");
        plot.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.ends_with("</svg>\n"));
        // Out-of-range scatter point is clipped.
        assert_eq!(text.matches("<circle").count(), 1);
    }

    #[test]
    fn writes_png_heatmap() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.png");
        let values: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let overlay = [(0.1, 0.9)];
        heatmap_png(&values, 8, 8, 4, &[(&overlay, [255, 0, 0])], &path).unwrap();
        let img = image::open(&path).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (32, 32));
    }
}
