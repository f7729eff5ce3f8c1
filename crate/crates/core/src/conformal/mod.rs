//! Numerical Riemann maps from a disc onto a dumbbell.
//!
//! The Szegő kernel of the dumbbell is the solution of the Kerzman–Stein
//! integral equation `(I + A) S = conj(H)` on the boundary, discretised with
//! the panel Gauss–Legendre nodes of [`DumbbellDomain`] and solved with GMRES.
//! The Riemann map `f` onto the unit disc follows from `S` in closed form, and
//! `phi = f^{-1}` is evaluated at interior points by a barycentric Cauchy
//! integral over the boundary correspondence.

mod gmres;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use gmres::gmres;

use crate::disc::{HoloMap, LiftedDisc};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::DumbbellDomain;
use crate::quadrature::gauss_legendre;
use crate::torus::CPoint;

const DENSE_LIMIT: usize = 4096;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `1 / (2 pi i)`.
fn k_cauchy() -> Complex64 {
    c(0.0, -1.0 / (2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalOptions {
    pub boundary_nodes: usize,
    pub gmres_tol: f64,
    pub max_matvecs: usize,
    /// Largest accepted self-reported boundary mismatch.
    pub accuracy_limit: f64,
    pub exec: Exec,
}

impl Default for ConformalOptions {
    fn default() -> Self {
        ConformalOptions { boundary_nodes: 2048, gmres_tol: 1e-13, max_matvecs: 600, accuracy_limit: 1e-3, exec: Exec::default() }
    }
}

/// The Riemann map `phi: D_R -> H` with `phi(0) = a`, `phi'(0) > 0`, stored
/// through its boundary correspondence.
#[derive(Debug, Clone)]
pub struct ConformalMapNumeric {
    pub domain: DumbbellDomain,
    pub source_radius: f64,
    /// `a = phi(0)`.
    pub center: Complex64,
    z: Vec<Complex64>,
    t: Vec<Complex64>,
    w: Vec<f64>,
    szego: Vec<Complex64>,
    /// `S(0, 0)`.
    saa: f64,
    /// `f(z_j)` on the unit circle.
    f: Vec<Complex64>,
    /// `f'(z_j)`.
    fp: Vec<Complex64>,
    /// Self-reported boundary mismatch, see [`ConformalMapNumeric::accuracy`].
    accuracy: f64,
    pub matvecs: usize,
    pub residual: f64,
}

/// Kerzman–Stein kernel `A(z, w)` for `z != w` with tangent `tz`, `tw`.
fn ks_kernel(z: Complex64, tz: Complex64, w: Complex64, tw: Complex64) -> Complex64 {
    let k = k_cauchy();
    k * tw / (z - w) + (k * tz / (z - w)).conj()
}

/// Right-hand side `conj(H(a, z))` of the Kerzman–Stein equation.
fn ks_rhs(z: Complex64, tz: Complex64, a: Complex64) -> Complex64 {
    (k_cauchy() * tz / (z - a)).conj()
}

impl ConformalMapNumeric {
    pub fn nodes(&self) -> usize {
        self.z.len()
    }

    /// `max |unwrapped arg f - integral of |f'| ds|` over the panel endpoints:
    /// the phase and the modulus of the computed Szegő kernel must agree for
    /// `S^2` to be the boundary value of a holomorphic function.
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn phi_prime_at_zero(&self) -> f64 {
        // f'(0) = 2 pi S(0,0) and xi = R f
        1.0 / (2.0 * PI * self.saa * self.source_radius)
    }

    /// Szegő kernel at a boundary point that is not a node.
    fn szego_at(&self, z: Complex64, tz: Complex64) -> Complex64 {
        let mut s = ks_rhs(z, tz, self.center);
        for j in 0..self.z.len() {
            let d = z - self.z[j];
            if d.norm() < 1e-14 {
                continue;
            }
            s -= ks_kernel(z, tz, self.z[j], self.t[j]) * self.szego[j] * self.w[j];
        }
        s
    }

    /// `(f, |f'|)` at a boundary point from the Nyström interpolant.
    fn correspondence_at(&self, z: Complex64, tz: Complex64) -> (Complex64, f64) {
        let s = self.szego_at(z, tz);
        let n2 = s.norm_sqr();
        (tz * s * s / (c(0.0, 1.0) * n2), 2.0 * PI * n2 / self.saa)
    }

    /// Boundary correspondence `R f(z)` at the point of piece `piece` with parameter `s`.
    pub fn boundary_value(&self, piece: usize, s: f64) -> Complex64 {
        let (z, dz) = self.domain.pieces()[piece].eval(s);
        self.source_radius * self.correspondence_at(z, dz / dz.norm()).0
    }

    /// Boundary correspondence angles `arg f(z_j)` at the quadrature nodes.
    pub fn boundary_angles(&self) -> Vec<f64> {
        self.f.iter().map(|f| f.arg()).collect()
    }

    /// Winding number of the image curve `f(∂H)` about `0` (one for a
    /// correspondence that traverses the circle once).
    pub fn boundary_winding(&self) -> f64 {
        let n = self.f.len();
        (0..n).map(|j| (self.f[(j + 1) % n] / self.f[j]).arg()).sum::<f64>() / (2.0 * PI)
    }

    /// Winding number of the boundary nodes, ordered by the correspondence, about `p`.
    pub fn winding_about(&self, p: Complex64) -> f64 {
        let mut order: Vec<usize> = (0..self.z.len()).collect();
        let angles = self.unwrapped_angles();
        order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
        let n = order.len();
        (0..n).map(|k| ((self.z[order[(k + 1) % n]] - p) / (self.z[order[k]] - p)).arg()).sum::<f64>() / (2.0 * PI)
    }

    fn unwrapped_angles(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.f.len());
        let mut acc = self.f[0].arg();
        out.push(acc);
        for j in 1..self.f.len() {
            acc += (self.f[j] / self.f[j - 1]).arg();
            out.push(acc);
        }
        out
    }

    /// `true` when the unwrapped boundary angle increases along the boundary.
    pub fn is_monotone(&self) -> bool {
        self.unwrapped_angles().windows(2).all(|p| p[1] > p[0])
    }

    /// `phi(zeta)` and `phi'(zeta)` for `|zeta| <= 0.99 R`.
    pub fn map_eval(&self, zeta: Complex64) -> Result<(Complex64, Complex64)> {
        let r = self.source_radius;
        if !(zeta.norm() <= 0.99 * r) {
            return Err(Error::PointTooCloseToBoundary { point: zeta });
        }
        // barycentric Cauchy integral in the xi = R f variable
        let (mut num, mut den, mut dnum, mut dden) = (c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        for j in 0..self.z.len() {
            let xi = r * self.f[j];
            let cw = r * self.fp[j] * self.t[j] * self.w[j];
            let inv = 1.0 / (xi - zeta);
            let a = cw * inv;
            let b = a * inv;
            num += self.z[j] * a;
            den += a;
            dnum += self.z[j] * b;
            dden += b;
        }
        let v = num / den;
        Ok((v, (dnum * den - num * dden) / (den * den)))
    }

    pub fn map_eval_many(&self, zetas: &[Complex64], exec: Exec) -> Result<Vec<(Complex64, Complex64)>> {
        exec.map_slice(zetas, |&z| self.map_eval(z)).into_iter().collect()
    }

    /// `psi(z) = R f(z)` and its derivative at an interior point of `H`.
    pub fn inverse_eval(&self, z: Complex64) -> (Complex64, Complex64) {
        let (mut num, mut den, mut dnum, mut dden) = (c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        for j in 0..self.z.len() {
            let inv = 1.0 / (self.z[j] - z);
            let a = self.t[j] * self.w[j] * inv;
            let b = a * inv;
            num += self.f[j] * a;
            den += a;
            dnum += self.f[j] * b;
            dden += b;
        }
        let r = self.source_radius;
        (r * num / den, r * (dnum * den - num * dden) / (den * den))
    }

    /// The inverse map as a [`HoloMap`] into `C`.
    pub fn inverse_map(&self) -> InverseMap<'_> {
        InverseMap { map: self }
    }

    /// Boundary Fourier coefficients `a_j, j = 0..=degree`, of `h ∘ phi` on
    /// `|zeta| = R`, returned as the disc `sum a_j (zeta / R)^j` on `D_R`.
    ///
    /// Each panel is split so that no sub-panel carries more than a few
    /// oscillations of `e^{-i j theta}`.
    pub fn fourier_refit(&self, h: &dyn HoloMap, degree: usize, exec: Exec) -> Result<LiftedDisc> {
        let dim = h.dim();
        let rule = gauss_legendre(16);
        let panels = self.domain.panels();
        // angular extent of each panel
        let mut span = vec![0.0; panels.len()];
        for (j, node_panel) in self.domain.nodes().iter().map(|n| n.panel).enumerate() {
            span[node_panel] += self.fp[j].norm() * self.w[j];
        }
        let mut jobs = Vec::new();
        for (k, p) in panels.iter().enumerate() {
            let m = ((degree as f64 * span[k] / 4.0).ceil() as usize).max(1);
            for q in 0..m {
                let s0 = p.s0 + (p.s1 - p.s0) * q as f64 / m as f64;
                let s1 = p.s0 + (p.s1 - p.s0) * (q + 1) as f64 / m as f64;
                jobs.push((p.piece, s0, s1));
            }
        }
        let pieces = self.domain.pieces();
        let partial: Vec<Vec<Vec<Complex64>>> = exec.map_slice(&jobs, |&(piece, s0, s1)| {
            let mut acc = vec![vec![c(0.0, 0.0); degree + 1]; dim];
            for (x, wq) in rule.0.iter().zip(&rule.1) {
                let s = s0 + 0.5 * (x + 1.0) * (s1 - s0);
                let (z, dz) = pieces[piece].eval(s);
                let speed = dz.norm();
                let (f, fpn) = self.correspondence_at(z, dz / speed);
                let weight = 0.5 * wq * (s1 - s0) * speed * fpn / (2.0 * PI);
                let (v, _) = h.eval(z);
                let fc = f.conj();
                for a in 0..dim {
                    let mut term = v[a] * weight;
                    for coef in acc[a].iter_mut() {
                        *coef += term;
                        term *= fc;
                    }
                }
            }
            acc
        });
        let mut coeffs = vec![vec![c(0.0, 0.0); degree + 1]; dim];
        for part in partial {
            for a in 0..dim {
                for (dst, src) in coeffs[a].iter_mut().zip(&part[a]) {
                    *dst += src;
                }
            }
        }
        LiftedDisc::from_scaled(c(0.0, 0.0), self.source_radius, coeffs)
    }

    /// [`ConformalMapNumeric::fourier_refit`] with the degree doubled until the
    /// upper half of the coefficients falls below `tol` times the largest one.
    pub fn fourier_refit_adaptive(&self, h: &dyn HoloMap, start: usize, cap: usize, tol: f64, exec: Exec) -> Result<LiftedDisc> {
        let mut degree = start.max(8);
        loop {
            let disc = self.fourier_refit(h, degree, exec)?;
            let coeffs = disc.scaled_coeffs();
            let top = coeffs.iter().flat_map(|c| c.iter()).map(|x| x.norm()).fold(0.0, f64::max);
            let tail = coeffs.iter().flat_map(|c| c[degree / 2..].iter()).map(|x| x.norm()).fold(0.0, f64::max);
            if tail <= tol * top.max(1e-300) {
                return Ok(disc);
            }
            if degree >= cap {
                return Err(Error::DegreeCapExceeded {
                    cap,
                    context: format!("boundary Fourier tail {:e} relative to {:e}", tail, top),
                    best: None,
                });
            }
            degree = (degree * 2).min(cap);
        }
    }
}

/// `z -> R f(z)` as a scalar holomorphic map on the dumbbell.
pub struct InverseMap<'a> {
    map: &'a ConformalMapNumeric,
}

impl HoloMap for InverseMap<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, z: Complex64) -> (CPoint, CPoint) {
        let (v, d) = self.map.inverse_eval(z);
        ([v, c(0.0, 0.0)], [d, c(0.0, 0.0)])
    }
}

/// `D_R -> H` as a scalar holomorphic map (see [`ConformalMapNumeric::map_eval`]).
impl HoloMap for ConformalMapNumeric {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, zeta: Complex64) -> (CPoint, CPoint) {
        let (v, d) = self
            .map_eval(zeta)
            .unwrap_or((c(f64::NAN, f64::NAN), c(f64::NAN, f64::NAN)));
        ([v, c(0.0, 0.0)], [d, c(0.0, 0.0)])
    }
}

/// Solves for the Riemann map `phi: D_R -> domain`, `phi(0) = 0`, `phi'(0) > 0`.
pub fn riemann_map(domain: &DumbbellDomain, source_radius: f64, opts: &ConformalOptions) -> Result<ConformalMapNumeric> {
    riemann_map_centered(domain, source_radius, c(0.0, 0.0), opts)
}

/// [`riemann_map`] normalised by `phi(0) = center` instead.
pub fn riemann_map_centered(
    domain: &DumbbellDomain,
    source_radius: f64,
    center: Complex64,
    opts: &ConformalOptions,
) -> Result<ConformalMapNumeric> {
    if !(source_radius > 0.0) {
        return Err(Error::InvalidParameter("source radius must be positive".into()));
    }
    if !domain.contains(center) || domain.distance_to_boundary(center) < 1e-3 * domain.left_radius {
        return Err(Error::InvalidParameter(format!("normalisation point {center} is not inside the domain")));
    }
    let domain = domain.rediscretized(opts.boundary_nodes);
    let nodes = domain.nodes();
    let n = nodes.len();
    let z: Vec<Complex64> = nodes.iter().map(|p| p.z).collect();
    let t: Vec<Complex64> = nodes.iter().map(|p| p.tangent).collect();
    let w: Vec<f64> = nodes.iter().map(|p| p.weight).collect();
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    // symmetric scaling: x = sqrt(w) S makes the operator I + (skew-Hermitian)
    let entry = |i: usize, j: usize| -> Complex64 {
        if i == j {
            c(0.0, 0.0)
        } else {
            sw[i] * ks_kernel(z[i], t[i], z[j], t[j]) * sw[j]
        }
    };
    let b: Vec<Complex64> = (0..n).map(|i| sw[i] * ks_rhs(z[i], t[i], center)).collect();
    let exec = opts.exec;
    let dense: Option<Vec<Complex64>> = if n <= DENSE_LIMIT {
        Some(exec.map_range(n, |i| (0..n).map(|j| entry(i, j)).collect::<Vec<_>>()).concat())
    } else {
        None
    };
    let matvec = |x: &[Complex64], y: &mut [Complex64]| {
        let rows = exec.map_range(n, |i| {
            let mut s = x[i];
            match &dense {
                Some(m) => {
                    let row = &m[i * n..(i + 1) * n];
                    for j in 0..n {
                        s += row[j] * x[j];
                    }
                }
                None => {
                    for j in 0..n {
                        s += entry(i, j) * x[j];
                    }
                }
            }
            s
        });
        y.copy_from_slice(&rows);
    };
    let (x, matvecs, residual) = gmres(matvec, &b, opts.gmres_tol, 120, opts.max_matvecs);
    if !(residual < 1e-9) || x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SolverDiverged(format!(
            "GMRES residual {residual:e} after {matvecs} products on {n} nodes"
        )));
    }
    let szego: Vec<Complex64> = x.iter().zip(&sw).map(|(v, s)| v / s).collect();
    let saa: f64 = szego.iter().zip(&w).map(|(s, w)| s.norm_sqr() * w).sum();
    let f: Vec<Complex64> = szego
        .iter()
        .zip(&t)
        .map(|(s, t)| t * s * s / (c(0.0, 1.0) * s.norm_sqr()))
        .collect();
    let fp: Vec<Complex64> = szego.iter().map(|s| 2.0 * PI * s * s / saa).collect();
    let mut map = ConformalMapNumeric {
        domain,
        source_radius,
        center,
        z,
        t,
        w,
        szego,
        saa,
        f,
        fp,
        accuracy: 0.0,
        matvecs,
        residual,
    };
    map.accuracy = phase_mismatch(&map);
    if !(map.accuracy <= opts.accuracy_limit) {
        return Err(Error::SolverDiverged(format!(
            "boundary mismatch {:e} above {:e}; the neck is not resolved by {} nodes",
            map.accuracy, opts.accuracy_limit, n
        )));
    }
    Ok(map)
}

fn phase_mismatch(map: &ConformalMapNumeric) -> f64 {
    let panels = map.domain.panels();
    let pieces = map.domain.pieces();
    let nodes = map.domain.nodes();
    let mut per_panel = vec![0.0; panels.len()];
    for (j, node) in nodes.iter().enumerate() {
        per_panel[node.panel] += map.fp[j].norm() * map.w[j];
    }
    let ends: Vec<Complex64> = panels
        .iter()
        .map(|p| {
            let (z, dz) = pieces[p.piece].eval(p.s0);
            map.correspondence_at(z, dz / dz.norm()).0
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut cum = 0.0;
    let mut phase = 0.0;
    for k in 1..=panels.len() {
        cum += per_panel[k - 1];
        phase += (ends[k % panels.len()] / ends[k - 1]).arg();
        let d = phase - cum;
        worst = worst.max(d.abs());
    }
    worst
}

/// `sup_{|z| = rho R} |phi_w(z) - z|` for each domain in a family of necks.
pub fn kernel_convergence_gap(domains: &[DumbbellDomain], rho: f64, opts: &ConformalOptions) -> Result<Vec<f64>> {
    domains
        .iter()
        .map(|d| {
            let r = d.left_radius;
            let map = riemann_map(d, r, opts)?;
            let samples = 256;
            let mut worst: f64 = 0.0;
            for k in 0..samples {
                let zeta = Complex64::from_polar(rho * r, 2.0 * PI * k as f64 / samples as f64);
                let (v, _) = map.map_eval(zeta)?;
                worst = worst.max((v - zeta).norm());
            }
            Ok(worst)
        })
        .collect()
}
