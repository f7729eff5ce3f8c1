//! Patching two disc lifts into one polynomial lift.
//!
//! `weak_oka1_patch` bridges the two discs, fits a C¹ polynomial `G` on the
//! admissible set, and optionally factors `G` through a Riemann map of a
//! dumbbell around the set: `F = H ∘ psi`, where `H` approximates `G ∘ phi`
//! on `phi^{-1}(K)` and `psi` approximates `phi^{-1}` on the set. The three error
//! terms of the factorization are measured separately.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::arnoldi::ArnoldiPoly;
use super::bridge::hermite_bridge;
use super::fit::{fit_scattered, mergelyan_c1_fit, runge_polyfit, FitOptions, FitSet};
use crate::conformal::{riemann_map_centered, ConformalOptions};
use crate::current::SetPieces;
use crate::disc::{HoloMap, LiftedDisc};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{AdmissibleSetGeometry, DumbbellDomain};
use crate::torus::{CPoint, LatticeTorus, ORIGIN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchOptions {
    /// Factor through the dumbbell Riemann map instead of returning the fit.
    pub conformal: bool,
    pub degree_cap: usize,
    pub boundary_nodes: usize,
    pub exec: Exec,
}

impl Default for PatchOptions {
    fn default() -> Self {
        PatchOptions { conformal: true, degree_cap: 512, boundary_nodes: 1024, exec: Exec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatchReport {
    pub budget: f64,
    /// `sup_K d(G, f)`.
    pub e1: f64,
    /// `sup_{phi^{-1}(K)} d(H, G ∘ phi)`.
    pub e2: f64,
    /// `sup_K d(H ∘ psi, H ∘ phi^{-1})`.
    pub e3: f64,
    /// `sup_K d(F, f)`.
    pub total: f64,
    pub bridge_length: f64,
    pub degree_g: usize,
    pub degree_h: usize,
    pub degree_psi: usize,
    /// `max_K |phi^{-1}|`.
    pub source_radius: f64,
    pub conformal_accuracy: f64,
    pub validation_points: usize,
}

/// The patched lift: either the fit itself or the factored composite.
#[derive(Debug, Clone)]
pub enum PatchLift {
    Direct(ArnoldiPoly),
    Factored { outer: ArnoldiPoly, psi: ArnoldiPoly },
}

impl HoloMap for PatchLift {
    fn dim(&self) -> usize {
        match self {
            PatchLift::Direct(p) => p.dim(),
            PatchLift::Factored { outer, .. } => outer.dim(),
        }
    }

    fn eval(&self, z: Complex64) -> (CPoint, CPoint) {
        match self {
            PatchLift::Direct(p) => p.eval(z),
            PatchLift::Factored { outer, psi } => {
                let (w, dw) = psi.eval(z);
                let (v, dv) = outer.eval(w[0]);
                let mut d = ORIGIN;
                for a in 0..outer.dim() {
                    d[a] = dv[a] * dw[0];
                }
                (v, d)
            }
        }
    }
}

/// Polar grid on each disc of `K`, four times denser than the fit sampling.
fn validation_grid(geometry: &AdmissibleSetGeometry, per_disc: usize) -> Vec<(usize, Complex64)> {
    let mut out = Vec::new();
    let rings = (per_disc / 32).clamp(8, 32);
    for (k, d) in geometry.discs.iter().enumerate() {
        out.push((k, d.center));
        for i in 1..=rings {
            let rho = d.radius * i as f64 / rings as f64;
            let count = ((per_disc as f64 * i as f64 / rings as f64) as usize).max(16);
            for j in 0..count {
                let th = 2.0 * PI * (j as f64 + 0.5 * (i % 2) as f64) / count as f64;
                out.push((k, d.center + rho * Complex64::new(th.cos(), th.sin())));
            }
        }
    }
    out
}

/// Entire lift within `e` of `f1` on the first disc and `f2` on the second.
pub fn weak_oka1_patch(
    geometry: &AdmissibleSetGeometry,
    f1: &dyn HoloMap,
    f2: &dyn HoloMap,
    e: f64,
    torus: &LatticeTorus,
    opts: &PatchOptions,
) -> Result<(PatchLift, PatchReport)> {
    if !(e > 0.0) {
        return Err(Error::InvalidParameter("patch error bound must be positive".into()));
    }
    if geometry.discs.len() != 2 || geometry.segments.len() != 1 {
        return Err(Error::InvalidParameter("patching needs two discs joined by one segment".into()));
    }
    geometry.validate()?;
    let exec = opts.exec;
    let seg = geometry.segments[0];
    let bridge = hermite_bridge(f1, f2, seg.a, seg.b, torus)?;
    // second lift moved by the bridge's lattice vector
    let lambda = bridge.lambda;
    let f2_shifted = crate::disc::FnMap {
        dim: f2.dim(),
        f: |z: Complex64| {
            let (mut v, d) = f2.eval(z);
            for a in 0..f2.dim() {
                v[a] -= lambda[a];
            }
            (v, d)
        },
    };
    // lifts that already agree along the segment are their own bridge
    let agree = (0..=32).all(|k| {
        let z = seg.a + (seg.b - seg.a) * (k as f64 / 32.0);
        let ((u, du), (v, dv)) = (f1.eval(z), f2.eval(z));
        (0..f1.dim()).all(|a| (u[a] - v[a]).norm() <= 1e-12 && (du[a] - dv[a]).norm() <= 1e-12)
    });
    let segment_map: &dyn HoloMap = if agree { f1 } else { &bridge };
    let pieces = SetPieces {
        discs: vec![f1, if agree { f1 } else { &f2_shifted }],
        segments: vec![segment_map],
        neck: None,
        degree_hints: vec![0, 0],
    };
    let budget = e / 3.0;
    // the error chain is in the sup norm, so the C¹ fit stops on its C⁰ error
    let fit_opts = FitOptions { exec, stop_on_c0: true, ..FitOptions::c1(budget, opts.degree_cap) };
    let (g, _) = mergelyan_c1_fit(geometry, &pieces, &fit_opts)?;

    let grid = validation_grid(geometry, (8 * (g.degree() + 1)).clamp(256, 1024));
    let pts: Vec<Complex64> = grid.iter().map(|p| p.1).collect();
    let target = |k: usize, z: Complex64| if k == 0 { f1.eval(z).0 } else { f2.eval(z).0 };
    let e1 = exec
        .map_slice(&grid, |&(k, z)| torus.distance(&g.eval(z).0, &target(k, z)))
        .into_iter()
        .fold(0.0, f64::max);
    let mut report = PatchReport {
        budget: e,
        e1,
        bridge_length: if agree { 0.0 } else { bridge.arclength },
        degree_g: g.degree(),
        validation_points: grid.len(),
        ..Default::default()
    };
    // a constant fit is unchanged by any factorization
    if !opts.conformal || g.degree() == 0 {
        report.total = e1;
        return Ok((PatchLift::Direct(g), report));
    }

    // A fat dumbbell S around K.
    let (d1, d2) = (geometry.discs[0], geometry.discs[1]);
    if d1.center.norm() > 1e-12 || d2.center.im.abs() > 1e-12 || d2.center.re <= 0.0 {
        return Err(Error::InvalidParameter("factorization expects discs centred at 0 and on the positive axis".into()));
    }
    let c = d2.center.re;
    let gap = c - d1.radius - d2.radius;
    let margin = (0.25 * gap).min(0.5 * d1.radius.min(d2.radius));
    let w = 0.5 * d1.radius.min(d2.radius);
    let s_domain = DumbbellDomain::new(d1.radius + margin, c, d2.radius + margin, w, None, opts.boundary_nodes)?;
    let copts = ConformalOptions { boundary_nodes: opts.boundary_nodes, exec, ..Default::default() };
    // normalised at the middle of the segment so that neither disc crowds against the circle
    let phi = riemann_map_centered(&s_domain, 1.0, 0.5 * (seg.a + seg.b), &copts)?;
    report.conformal_accuracy = phi.accuracy();

    // phi^{-1}(K) lies in D_{r_K}; H is fitted and validated there
    let pre: Vec<Complex64> = exec.map_slice(&pts, |&z| phi.inverse_eval(z).0);
    let r_k = pre.iter().map(|u| u.norm()).fold(0.0, f64::max);
    if !(r_k < 1.0) {
        return Err(Error::PointTooCloseToBoundary { point: Complex64::new(r_k, 0.0) });
    }
    report.source_radius = r_k;
    let g_on_k: Vec<CPoint> = exec.map_slice(&pts, |&z| g.eval(z).0);

    // H: least squares for G ∘ phi on phi^{-1}(K). G grows like exp(deg * Green's
    // function) off K, so samples of G ∘ phi near the circle would be useless.
    let g_pieces = SetPieces::uniform(&g, geometry, 0);
    let h_opts = FitOptions { exec, lawson_sweeps: 2, ..FitOptions::c0(budget, opts.degree_cap) };
    let mut degree = 16.min(opts.degree_cap);
    let (h, e2) = loop {
        let set = FitSet::sample(geometry, &g_pieces, (h_opts.oversampling * (degree + 1)).max(64), exec)?;
        let zeta: Vec<Complex64> = exec.map_slice(&set.points, |&z| phi.inverse_eval(z).0);
        let h = fit_scattered(&zeta, &set.values, g.dim(), degree, Complex64::new(0.0, 0.0), r_k, &h_opts)?;
        let e2 = exec
            .map_range(pts.len(), |i| torus.distance(&h.eval(pre[i]).0, &g_on_k[i]))
            .into_iter()
            .fold(0.0, f64::max);
        if e2 <= budget {
            break (h, e2);
        }
        if degree >= opts.degree_cap {
            return Err(Error::DegreeCapExceeded {
                cap: opts.degree_cap,
                context: format!("outer factor error {e2:e} above {budget:e}"),
                best: None,
            });
        }
        degree = (2 * degree).min(opts.degree_cap);
    };
    report.e2 = e2;
    report.degree_h = h.degree();

    // psi: Runge fit of phi^{-1} on K, accurate enough that H moves by at most its share
    let lip = exec.map_slice(&pre, |&u| torus.norm(&h.eval(u).1)).into_iter().fold(1.0, f64::max);
    let inverse = phi.inverse_map();
    let psi_pieces = SetPieces::uniform(&inverse, geometry, 0);
    let psi_opts = FitOptions { exec, lawson_sweeps: 4, ..FitOptions::c0(0.5 * budget / lip, opts.degree_cap) };
    let (psi, _) = runge_polyfit(geometry, &psi_pieces, &psi_opts)?;
    report.degree_psi = psi.degree();
    let psi_on_k: Vec<Complex64> = exec.map_slice(&pts, |&z| psi.eval(z).0[0]);
    report.e3 = exec
        .map_range(pts.len(), |i| torus.distance(&h.eval(psi_on_k[i]).0, &h.eval(pre[i]).0))
        .into_iter()
        .fold(0.0, f64::max);

    let lift = PatchLift::Factored { outer: h, psi };
    report.total = exec
        .map_slice(&grid, |&(k, z)| torus.distance(&lift.eval(z).0, &target(k, z)))
        .into_iter()
        .fold(0.0, f64::max);
    Ok((lift, report))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DoublingReport {
    /// Allowed error `eps / 2^{k+1}` of step `k`.
    pub step_bounds: Vec<f64>,
    /// Measured sup distance to the previous step on the original disc.
    pub step_errors: Vec<f64>,
    pub total_bound: f64,
    pub total_error: f64,
}

/// Repeated doubling of the domain of a polynomial lift. Polynomial lifts are
/// already entire, so every step is an exact restriction to the doubled disc.
pub fn extend_doubling(f0: &LiftedDisc, eps: f64, steps: usize, torus: &LatticeTorus) -> Result<(LiftedDisc, DoublingReport)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("doubling budget must be positive".into()));
    }
    let mut report = DoublingReport::default();
    let samples: Vec<Complex64> = (0..256)
        .map(|j| f0.center() + f0.radius() * Complex64::from_polar(1.0, 2.0 * PI * j as f64 / 256.0))
        .collect();
    let mut current = f0.clone();
    for k in 0..steps {
        let next = current.restrict(current.radius() * 2.0)?;
        let err = samples
            .iter()
            .map(|&z| torus.distance(&next.eval(z).0, &current.eval(z).0))
            .fold(0.0, f64::max);
        report.step_bounds.push(eps / 2f64.powi(k as i32 + 1));
        report.step_errors.push(err);
        current = next;
    }
    report.total_bound = report.step_bounds.iter().sum();
    report.total_error = samples
        .iter()
        .map(|&z| torus.distance(&current.eval(z).0, &f0.eval(z).0))
        .fold(0.0, f64::max);
    // hand back the lift on its original disc
    Ok((current.restrict(f0.radius())?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::cpoint;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn doubling_keeps_polynomials_and_budget() {
        let t = LatticeTorus::unit_square();
        let mut coeffs = vec![c(1.0)];
        for n in 1..=12 {
            let prev = coeffs[n - 1];
            coeffs.push(prev / n as f64);
        }
        let f0 = LiftedDisc::from_monomials(c(0.0), 1.0, vec![coeffs]).unwrap();
        let (f, rep) = extend_doubling(&f0, 0.1, 5, &t).unwrap();
        assert!((rep.total_bound - 0.096875).abs() < 1e-15);
        assert!(rep.total_error < 1e-12);
        for (a, b) in f.monomial_coeffs()[0].iter().zip(&f0.monomial_coeffs()[0]) {
            assert!((a - b).norm() < 1e-12 * b.norm().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn equal_constants_patch_to_a_constant() {
        let t = LatticeTorus::unit_square();
        let geo = AdmissibleSetGeometry::two_discs(1.0, 4.0, 1.0);
        let a = LiftedDisc::constant(c(0.0), 1.0, cpoint(&[Complex64::new(0.3, 0.1)]), 1).unwrap();
        let b = LiftedDisc::constant(c(4.0), 1.0, cpoint(&[Complex64::new(0.3, 0.1)]), 1).unwrap();
        let (_, rep) = weak_oka1_patch(&geo, &a, &b, 0.01, &t, &PatchOptions::default()).unwrap();
        assert!(rep.total < 1e-12, "{rep:?}");
    }

    #[test]
    fn identity_and_square_factor_through_the_dumbbell() {
        let t = LatticeTorus::unit_square();
        let geo = AdmissibleSetGeometry::two_discs(1.0, 4.0, 1.0);
        let f1 = LiftedDisc::identity(1.0);
        let f2 = LiftedDisc::from_monomials(c(4.0), 1.0, vec![vec![c(16.0), c(8.0), c(1.0)]]).unwrap();
        let e = 0.05;
        let (lift, rep) = weak_oka1_patch(&geo, &f1, &f2, e, &t, &PatchOptions::default()).unwrap();
        assert!(matches!(lift, PatchLift::Factored { .. }));
        assert!(rep.e1 <= e / 3.0 && rep.e2 <= e / 3.0 && rep.e3 <= e / 3.0, "{rep:?}");
        assert!(rep.total <= e && rep.total <= rep.e1 + rep.e2 + rep.e3 + 1e-12, "{rep:?}");
    }

    #[test]
    fn restrictions_of_one_polynomial_return_it() {
        let t = LatticeTorus::unit_square();
        let geo = AdmissibleSetGeometry::two_discs(1.0, 4.0, 1.0);
        let p = LiftedDisc::from_monomials(c(0.0), 5.0, vec![vec![c(0.1), c(0.2), c(0.01)]]).unwrap();
        let opts = PatchOptions { conformal: false, ..Default::default() };
        let (lift, rep) = weak_oka1_patch(&geo, &p, &p, 0.01, &t, &opts).unwrap();
        assert!(rep.total <= 1e-10, "{rep:?}");
        let z = Complex64::new(2.0, 0.3);
        assert!((lift.eval(z).0[0] - p.eval(z).0[0]).norm() < 1e-9);
    }
}
