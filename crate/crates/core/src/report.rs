//! CSV tables and small SVG plots.
//!
//! Floats are written with Rust's shortest round-trip formatting, so the same
//! inputs always give byte-identical files.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::conformal::ConformalMapNumeric;
use crate::error::{Error, Result};
use crate::geometry::AdmissibleSetGeometry;
use crate::pipeline::LedgerRow;

/// CSV text with a header row and one record per row.
pub fn table<I>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::InvalidParameter(format!("row has {} fields, header has {}", r.len(), header.len())));
        }
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn ledger_csv(rows: &[LedgerRow]) -> Result<String> {
    table(
        &["stage", "slot", "lhs", "bound", "pass"],
        rows.iter().map(|r| {
            vec![r.stage.to_string(), r.slot.clone(), r.lhs.to_string(), r.bound.to_string(), r.pass.to_string()]
        }),
    )
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps a world box onto a `size x size` canvas (y up).
struct Canvas {
    out: String,
    min: Complex64,
    scale: f64,
    size: f64,
}

impl Canvas {
    fn new(lo: Complex64, hi: Complex64, size: f64) -> Self {
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(out, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
        Canvas { out, min: lo, scale: 0.9 * size / span, size }
    }

    fn xy(&self, z: Complex64) -> (f64, f64) {
        let pad = 0.05 * self.size;
        (pad + (z.re - self.min.re) * self.scale, self.size - pad - (z.im - self.min.im) * self.scale)
    }

    fn polyline(&mut self, pts: &[Complex64], stroke: &str, closed: bool) {
        let mut d = String::new();
        for (i, &z) in pts.iter().enumerate() {
            let (x, y) = self.xy(z);
            let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
        }
        if closed {
            d.push('Z');
        }
        let _ = writeln!(self.out, r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="1"/>"#);
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn circle_points(center: Complex64, r: f64, n: usize) -> Vec<Complex64> {
    (0..n).map(|k| center + Complex64::from_polar(r, 2.0 * PI * k as f64 / n as f64)).collect()
}

/// The domain boundary (grey) and the images of `|zeta| = rho R` (blue).
pub fn conformal_svg(map: &ConformalMapNumeric, rhos: &[f64]) -> String {
    let nodes: Vec<Complex64> = map.domain.nodes().iter().map(|n| n.z).collect();
    let (lo, hi) = bounds(&nodes);
    let mut c = Canvas::new(lo, hi, 600.0);
    c.polyline(&nodes, "#999", true);
    for &rho in rhos {
        let pts: Vec<Complex64> = circle_points(Complex64::new(0.0, 0.0), rho * map.source_radius, 256)
            .into_iter()
            .filter_map(|zeta| map.map_eval(zeta).ok().map(|v| v.0))
            .collect();
        c.polyline(&pts, "#2457a6", true);
    }
    c.finish()
}

/// Discs and segments of an admissible set.
pub fn geometry_svg(geometry: &AdmissibleSetGeometry) -> String {
    let mut pts = Vec::new();
    for d in &geometry.discs {
        pts.push(d.center - Complex64::new(d.radius, d.radius));
        pts.push(d.center + Complex64::new(d.radius, d.radius));
    }
    let (lo, hi) = bounds(&pts);
    let mut c = Canvas::new(lo, hi, 600.0);
    for d in &geometry.discs {
        c.polyline(&circle_points(d.center, d.radius, 180), "#2457a6", true);
    }
    for s in &geometry.segments {
        c.polyline(&[s.a, s.b], "#b8322a", false);
    }
    c.finish()
}

/// One bar per ledger row: `log10(lhs / bound)`, failures in red.
pub fn ledger_svg(rows: &[LedgerRow]) -> String {
    let h = 14.0;
    let width = 760.0;
    let height = h * rows.len() as f64 + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="10">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    // x = 520 is lhs = bound, 24 px per decade
    let zero = 520.0;
    let _ = writeln!(out, r#"<line x1="{zero}" y1="10" x2="{zero}" y2="{}" stroke="black"/>"#, height - 10.0);
    for (i, r) in rows.iter().enumerate() {
        let y = 20.0 + h * i as f64;
        let ratio = if r.lhs <= 0.0 { -16.0 } else { (r.lhs / r.bound).log10().clamp(-16.0, 9.0) };
        let x = zero + 24.0 * ratio;
        let (x0, w) = if x < zero { (x, zero - x) } else { (zero, x - zero) };
        let fill = if r.pass { "#4c8c4a" } else { "#b8322a" };
        let _ = writeln!(out, r#"<text x="4" y="{}">{} {}</text>"#, y + 9.0, r.stage, esc(&r.slot));
        let _ = writeln!(out, r#"<rect x="{x0:.1}" y="{y}" width="{w:.1}" height="{}" fill="{fill}"/>"#, h - 3.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Polylines of several series against their index.
pub fn traces_svg(series: &[(String, Vec<f64>)]) -> String {
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(1).max(2);
    let all: Vec<f64> = series.iter().flat_map(|s| s.1.iter().copied()).filter(|v| v.is_finite()).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(lo + 1e-12);
    let mut c = Canvas::new(Complex64::new(0.0, lo), Complex64::new((n - 1) as f64, hi), 600.0);
    // stretch the shorter axis
    c.scale = 0.9 * 600.0 / (hi - lo).max((n - 1) as f64);
    let (sx, sy) = (0.9 * 600.0 / (n - 1) as f64, 0.9 * 600.0 / (hi - lo));
    let colors = ["#2457a6", "#b8322a", "#4c8c4a", "#8a5db0", "#c47f17"];
    let mut body = String::new();
    for (k, (name, ys)) in series.iter().enumerate() {
        let mut d = String::new();
        for (i, &y) in ys.iter().enumerate().filter(|(_, y)| y.is_finite()) {
            let px = 30.0 + i as f64 * sx;
            let py = 570.0 - (y - lo) * sy;
            let _ = write!(d, "{}{px:.2},{py:.2} ", if d.is_empty() { "M" } else { "L" });
        }
        let color = colors[k % colors.len()];
        let _ = writeln!(body, r#"<path d="{d}" fill="none" stroke="{color}"/>"#);
        let _ = writeln!(body, r#"<text x="40" y="{}" fill="{color}" font-size="11">{}</text>"#, 20 + 14 * k, esc(name));
    }
    let mut out = c.finish();
    out.truncate(out.len() - "</svg>\n".len());
    out.push_str(&body);
    out.push_str("</svg>\n");
    out
}

fn bounds(pts: &[Complex64]) -> (Complex64, Complex64) {
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for z in pts {
        lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    (lo, hi)
}
