//! Planar geometry of admissible sets: discs joined by segments, and their
//! thickened dumbbell neighbourhoods with C¹-rounded corners.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_legendre_on, Node};

pub const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Complex64,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Disc { center, radius }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Complex64,
    pub b: Complex64,
}

/// Disjoint closed discs, attached segments, and an optional neck half-width
/// (`0` means the segments are infinitely thin and counted twice in the
/// boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSetGeometry {
    pub discs: Vec<Disc>,
    pub segments: Vec<Segment>,
    pub neck_width: f64,
}

impl AdmissibleSetGeometry {
    pub fn single(disc: Disc) -> Self {
        AdmissibleSetGeometry { discs: vec![disc], segments: vec![], neck_width: 0.0 }
    }

    /// `D(0, R) ∪ [R, c - r2] ∪ D(c, r2)` on the real axis.
    pub fn two_discs(left_radius: f64, c: f64, right_radius: f64) -> Self {
        AdmissibleSetGeometry {
            discs: vec![
                Disc::new(Complex64::new(0.0, 0.0), left_radius),
                Disc::new(Complex64::new(c, 0.0), right_radius),
            ],
            segments: vec![Segment {
                a: Complex64::new(left_radius, 0.0),
                b: Complex64::new(c - right_radius, 0.0),
            }],
            neck_width: 0.0,
        }
    }

    pub fn with_neck(mut self, w: f64) -> Self {
        self.neck_width = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.discs.is_empty() {
            return Err(Error::InvalidParameter("admissible set has no discs".into()));
        }
        for d in &self.discs {
            if !(d.radius > 0.0) {
                return Err(Error::InvalidParameter(format!("disc radius {} must be positive", d.radius)));
            }
        }
        for (i, a) in self.discs.iter().enumerate() {
            for b in &self.discs[i + 1..] {
                if (a.center - b.center).norm() <= a.radius + b.radius {
                    return Err(Error::InvalidParameter("discs of an admissible set must be disjoint".into()));
                }
            }
        }
        for s in &self.segments {
            for (end, other) in [(s.a, s.b), (s.b, s.a)] {
                let disc = self
                    .discs
                    .iter()
                    .find(|d| ((end - d.center).norm() - d.radius).abs() <= 1e-9 * (1.0 + d.radius))
                    .ok_or_else(|| Error::InvalidParameter(format!("segment endpoint {end} not on a disc boundary")))?;
                let normal = (end - disc.center) / disc.radius;
                let dir = (other - end) / (other - end).norm();
                let cos_to_normal = (dir * normal.conj()).re;
                // at least 10 degrees away from the tangent, pointing outward
                if cos_to_normal < (10.0f64).to_radians().sin() {
                    return Err(Error::InvalidParameter("segment does not meet its disc transversally".into()));
                }
            }
            for k in 1..64 {
                let z = s.a + (s.b - s.a) * (k as f64 / 64.0);
                if self.discs.iter().any(|d| (z - d.center).norm() < d.radius * (1.0 - 1e-12)) {
                    return Err(Error::InvalidParameter("segment passes through a disc".into()));
                }
            }
        }
        if self.neck_width < 0.0 {
            return Err(Error::InvalidParameter("neck width must be >= 0".into()));
        }
        Ok(())
    }

    /// Thickened dumbbell for the two-disc real-axis configuration.
    pub fn dumbbell(&self, boundary_nodes: usize) -> Result<DumbbellDomain> {
        match (self.discs.as_slice(), self.segments.as_slice()) {
            ([d], []) if d.center == Complex64::new(0.0, 0.0) => DumbbellDomain::single(d.radius, boundary_nodes),
            ([l, r], [_]) if l.center == Complex64::new(0.0, 0.0) && r.center.im == 0.0 && self.neck_width > 0.0 => {
                DumbbellDomain::new(l.radius, r.center.re, r.radius, self.neck_width, None, boundary_nodes)
            }
            _ => Err(Error::InvalidParameter(
                "thickened neck needs discs D(0,R), D(c,r) on the real axis joined by one segment".into(),
            )),
        }
    }
}

/// One analytic piece of the boundary, parametrised over `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPiece {
    /// `center + radius e^{i(t0 + (t1 - t0) s)}`; `t1 < t0` runs clockwise.
    Arc { center: Complex64, radius: f64, t0: f64, t1: f64 },
    Line { a: Complex64, b: Complex64 },
}

impl BoundaryPiece {
    pub fn length(&self) -> f64 {
        match *self {
            BoundaryPiece::Arc { radius, t0, t1, .. } => radius * (t1 - t0).abs(),
            BoundaryPiece::Line { a, b } => (b - a).norm(),
        }
    }

    /// Point and derivative with respect to `s`.
    pub fn eval(&self, s: f64) -> (Complex64, Complex64) {
        match *self {
            BoundaryPiece::Arc { center, radius, t0, t1 } => {
                let t = t0 + (t1 - t0) * s;
                let e = Complex64::new(t.cos(), t.sin());
                (center + radius * e, Complex64::new(0.0, radius * (t1 - t0)) * e)
            }
            BoundaryPiece::Line { a, b } => (a + (b - a) * s, b - a),
        }
    }

    /// Signed curvature with respect to the traversal direction.
    pub fn curvature(&self) -> f64 {
        match *self {
            BoundaryPiece::Arc { radius, t0, t1, .. } => (t1 - t0).signum() / radius,
            BoundaryPiece::Line { .. } => 0.0,
        }
    }
}

/// A Gauss–Legendre panel `[s0, s1]` of one boundary piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub piece: usize,
    pub s0: f64,
    pub s1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub z: Complex64,
    /// Unit tangent in the counterclockwise direction.
    pub tangent: Complex64,
    /// Arclength weight.
    pub weight: f64,
    pub panel: usize,
}

/// `D(0, R) ∪ neck ∪ D(c, r2)` with a boundary rounded by fillet arcs of
/// radius `rho`, or a single disc when the right disc is absent.
#[derive(Debug, Clone)]
pub struct DumbbellDomain {
    pub left_radius: f64,
    pub right: Option<(f64, f64)>,
    pub half_width: f64,
    pub fillet: f64,
    pieces: Vec<BoundaryPiece>,
    panels: Vec<Panel>,
    nodes: Vec<BoundaryNode>,
    /// `x0`, `x1`: abscissae of the fillet centres.
    fillet_x: (f64, f64),
}

impl DumbbellDomain {
    pub fn single(radius: f64, boundary_nodes: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("disc radius must be positive".into()));
        }
        let pieces = vec![BoundaryPiece::Arc { center: Complex64::new(0.0, 0.0), radius, t0: -PI, t1: PI }];
        let mut d = DumbbellDomain {
            left_radius: radius,
            right: None,
            half_width: 0.0,
            fillet: 0.0,
            pieces,
            panels: vec![],
            nodes: vec![],
            fillet_x: (0.0, 0.0),
        };
        d.discretize(boundary_nodes);
        Ok(d)
    }

    /// Dumbbell with fillet radius `rho` (default `w / 4`).
    pub fn new(r: f64, c: f64, r2: f64, w: f64, rho: Option<f64>, boundary_nodes: usize) -> Result<Self> {
        let rho = rho.unwrap_or(w / 4.0);
        if !(w > 0.0 && rho > 0.0 && r > 0.0 && r2 > 0.0) {
            return Err(Error::InvalidParameter("dumbbell sizes must be positive".into()));
        }
        if w >= r.min(r2) {
            return Err(Error::InvalidParameter(format!("neck half-width {w} must be below both radii")));
        }
        let h = w + rho;
        let x0 = ((r + rho).powi(2) - h * h).sqrt();
        let x1 = c - ((r2 + rho).powi(2) - h * h).sqrt();
        if !(x0 < x1) {
            return Err(Error::InvalidParameter(format!(
                "discs too close for a neck of half-width {w} and fillet {rho}"
            )));
        }
        let a_left = h.atan2(x0);
        let a_right = h.atan2(x1 - c);
        let pieces = vec![
            BoundaryPiece::Arc { center: Complex64::new(0.0, 0.0), radius: r, t0: a_left, t1: 2.0 * PI - a_left },
            BoundaryPiece::Arc { center: Complex64::new(x0, -h), radius: rho, t0: PI - a_left, t1: PI / 2.0 },
            BoundaryPiece::Line { a: Complex64::new(x0, -w), b: Complex64::new(x1, -w) },
            BoundaryPiece::Arc { center: Complex64::new(x1, -h), radius: rho, t0: PI / 2.0, t1: PI - a_right },
            BoundaryPiece::Arc { center: Complex64::new(c, 0.0), radius: r2, t0: -a_right, t1: a_right },
            BoundaryPiece::Arc { center: Complex64::new(x1, h), radius: rho, t0: a_right - PI, t1: -PI / 2.0 },
            BoundaryPiece::Line { a: Complex64::new(x1, w), b: Complex64::new(x0, w) },
            BoundaryPiece::Arc { center: Complex64::new(x0, h), radius: rho, t0: -PI / 2.0, t1: a_left - PI },
        ];
        let mut d = DumbbellDomain {
            left_radius: r,
            right: Some((c, r2)),
            half_width: w,
            fillet: rho,
            pieces,
            panels: vec![],
            nodes: vec![],
            fillet_x: (x0, x1),
        };
        d.discretize(boundary_nodes);
        d.check_jordan()?;
        Ok(d)
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn nodes(&self) -> &[BoundaryNode] {
        &self.nodes
    }

    pub fn boundary_length(&self) -> f64 {
        self.pieces.iter().map(BoundaryPiece::length).sum()
    }

    /// Rebuilds the boundary discretisation with about `boundary_nodes` nodes.
    pub fn rediscretized(&self, boundary_nodes: usize) -> Self {
        let mut d = self.clone();
        d.discretize(boundary_nodes);
        d
    }

    fn discretize(&mut self, boundary_nodes: usize) {
        let total = self.boundary_length();
        let h0 = total * PANEL_ORDER as f64 / boundary_nodes.max(PANEL_ORDER) as f64;
        let neck_h = if self.right.is_some() { h0.min(self.half_width) } else { h0 };
        let h_min = if self.right.is_some() { neck_h / 16.0 } else { h0 };
        let mut panels = Vec::new();
        for (pi, piece) in self.pieces.iter().enumerate() {
            let len = piece.length();
            let is_neck = self.right.is_some() && !matches!(pi, 0 | 4);
            let size_at = |d: f64| -> f64 {
                let cap = if is_neck { neck_h } else { h0 };
                (h_min + 0.5 * d).min(cap)
            };
            // March from both ends towards the middle with graded panels.
            let mut left = vec![0.0];
            let mut right = vec![len];
            loop {
                let a = *left.last().unwrap();
                let b = *right.last().unwrap();
                let gap = b - a;
                let step_a = size_at(a);
                let step_b = size_at(len - b);
                let step = step_a.max(step_b);
                if gap <= step_a + step_b + step {
                    let m = (gap / step).ceil().max(1.0) as usize;
                    for q in 1..m {
                        left.push(a + gap * q as f64 / m as f64);
                    }
                    break;
                }
                left.push(a + step_a);
                right.push(b - step_b);
            }
            right.reverse();
            left.extend(right);
            for pair in left.windows(2) {
                panels.push(Panel { piece: pi, s0: pair[0] / len, s1: pair[1] / len });
            }
        }
        let rule = gauss_legendre(PANEL_ORDER);
        // nodes in boundary order
        let mut order: Vec<(f64, f64)> = rule.0.iter().copied().zip(rule.1.iter().copied()).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nodes = Vec::with_capacity(panels.len() * PANEL_ORDER);
        for (k, p) in panels.iter().enumerate() {
            let piece = &self.pieces[p.piece];
            for &(x, w) in &order {
                let s = p.s0 + 0.5 * (x + 1.0) * (p.s1 - p.s0);
                let (z, dz) = piece.eval(s);
                let speed = dz.norm();
                nodes.push(BoundaryNode { z, tangent: dz / speed, weight: 0.5 * w * (p.s1 - p.s0) * speed, panel: k });
            }
        }
        self.panels = panels;
        self.nodes = nodes;
    }

    fn check_jordan(&self) -> Result<()> {
        let pts: Vec<Complex64> = self
            .panels
            .iter()
            .flat_map(|p| {
                let piece = self.pieces[p.piece];
                (0..4).map(move |k| piece.eval(p.s0 + (p.s1 - p.s0) * k as f64 / 4.0).0)
            })
            .collect();
        let n = pts.len();
        let cross = |a: Complex64, b: Complex64, c: Complex64| (b - a).re * (c - a).im - (b - a).im * (c - a).re;
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            for j in i + 2..n {
                if (j + 1) % n == i {
                    continue;
                }
                let (c, d) = (pts[j], pts[(j + 1) % n]);
                let d1 = cross(a, b, c);
                let d2 = cross(a, b, d);
                let d3 = cross(c, d, a);
                let d4 = cross(c, d, b);
                if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                    return Err(Error::InvalidParameter("dumbbell boundary self-intersects".into()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        if z.norm() < self.left_radius {
            return true;
        }
        let Some((c, r2)) = self.right else { return false };
        if (z - c).norm() < r2 {
            return true;
        }
        let (x0, x1) = self.fillet_x;
        let (w, rho) = (self.half_width, self.fillet);
        let (x, y) = (z.re, z.im.abs());
        if x <= 0.0 || x >= c {
            return false;
        }
        if y < w {
            return true;
        }
        // fillet zones: below the fillet circle and inside the tangency cone
        let fc = |xc: f64| Complex64::new(xc, w + rho);
        let in_left_zone = x <= x0 && y <= (w + rho) * x / x0 && (Complex64::new(x, y) - fc(x0)).norm() > rho;
        let in_right_zone =
            x >= x1 && y <= (w + rho) * (c - x) / (c - x1) && (Complex64::new(x, y) - fc(x1)).norm() > rho;
        in_left_zone || in_right_zone
    }

    /// Area nodes of the parts outside the two open discs: the neck strip
    /// and the four fillet slivers. `n` is the Gauss order per direction.
    pub fn neck_nodes(&self, n: usize) -> Vec<Node> {
        let Some((c, r2)) = self.right else { return vec![] };
        let (w, rho) = (self.half_width, self.fillet);
        let (x0, x1) = self.fillet_x;
        let mut out = Vec::new();
        let xl = |y: f64| (self.left_radius.powi(2) - y * y).sqrt();
        let xr = |y: f64| c - (r2 * r2 - y * y).sqrt();
        // strip |y| < w between the circles, split along x into panels about w long
        let len = xr(0.0) - xl(0.0);
        let m = ((len / w).ceil() as usize).clamp(1, 4096);
        for (y, wy) in gauss_legendre_on(n, -w, w) {
            let (a, b) = (xl(y), xr(y));
            for k in 0..m {
                let (pa, pb) = (a + (b - a) * k as f64 / m as f64, a + (b - a) * (k + 1) as f64 / m as f64);
                for (x, wx) in gauss_legendre_on(n, pa, pb) {
                    out.push(Node { z: Complex64::new(x, y), weight: wx * wy });
                }
            }
        }
        // fillets: y = w + (yt - w) tau^2 absorbs the square-root behaviour at y = w
        let h = w + rho;
        let yt_left = self.left_radius * h / (self.left_radius + rho);
        let yt_right = r2 * h / (r2 + rho);
        for side in [-1.0, 1.0] {
            for (yt, left) in [(yt_left, true), (yt_right, false)] {
                for (tau, wt) in gauss_legendre_on(n, 0.0, 1.0) {
                    let y = w + (yt - w) * tau * tau;
                    let dy = 2.0 * (yt - w) * tau * wt;
                    let s = (rho * rho - (y - h).powi(2)).max(0.0).sqrt();
                    let (a, b) = if left { (xl(y), x0 - s) } else { (x1 + s, xr(y)) };
                    if b <= a {
                        continue;
                    }
                    for (x, wx) in gauss_legendre_on(n, a, b) {
                        out.push(Node { z: Complex64::new(x, side * y), weight: wx * dy });
                    }
                }
            }
        }
        out
    }

    /// Area of the full domain.
    pub fn area(&self) -> f64 {
        let discs = PI * self.left_radius.powi(2) + self.right.map_or(0.0, |(_, r2)| PI * r2 * r2);
        discs + self.neck_nodes(24).iter().map(|n| n.weight).sum::<f64>()
    }

    /// Signed distance-like measure: minimum distance from `z` to the boundary nodes.
    pub fn distance_to_boundary(&self, z: Complex64) -> f64 {
        self.nodes.iter().map(|n| (n.z - z).norm()).fold(f64::INFINITY, f64::min)
    }
}
