//! Least-squares polynomial fits on admissible sets with degree escalation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::arnoldi::{ArnoldiBasis, ArnoldiPoly};
use crate::current::SetPieces;
use crate::disc::HoloMap;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::AdmissibleSetGeometry;
use crate::torus::{CPoint, MAX_DIM, ORIGIN};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitReport {
    /// `sup_K |p - f|`.
    pub sup_c0: f64,
    /// `sup_K |p' - f'|`.
    pub sup_derivative: f64,
    /// `sup_c0 + sup_derivative`.
    pub sup_c1: f64,
    pub degree: usize,
    /// `(degree, achieved error)` for every degree tried.
    pub residual_history: Vec<(usize, f64)>,
    pub fit_points: usize,
    pub validation_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub degree_cap: usize,
    pub tol: f64,
    /// Include derivative equations and measure the C¹ error.
    pub c1: bool,
    /// Stop on the C⁰ error even when derivative equations are included.
    pub stop_on_c0: bool,
    /// Lawson reweighting sweeps towards the minimax fit (0 = plain least squares).
    pub lawson_sweeps: usize,
    /// Boundary samples per disc per basis function.
    pub oversampling: usize,
    pub exec: Exec,
}

impl FitOptions {
    pub fn c0(tol: f64, degree_cap: usize) -> Self {
        FitOptions { degree_cap, tol, c1: false, stop_on_c0: true, lawson_sweeps: 24, oversampling: 4, exec: Exec::default() }
    }

    pub fn c1(tol: f64, degree_cap: usize) -> Self {
        FitOptions { degree_cap, tol, c1: true, stop_on_c0: false, lawson_sweeps: 0, oversampling: 4, exec: Exec::default() }
    }
}

/// Sample points of `K` with target values and derivatives.
#[derive(Debug, Clone)]
pub struct FitSet {
    pub points: Vec<Complex64>,
    pub values: Vec<CPoint>,
    pub derivatives: Vec<CPoint>,
    pub dim: usize,
}

impl FitSet {
    /// Samples `K` with about `per_disc` boundary points per disc; the interior
    /// rings and the segments are sampled proportionally.
    pub fn sample(geometry: &AdmissibleSetGeometry, pieces: &SetPieces, per_disc: usize, exec: Exec) -> Result<Self> {
        if pieces.discs.len() != geometry.discs.len() || pieces.segments.len() != geometry.segments.len() {
            return Err(Error::InconsistentPieces("fit pieces do not match the geometry".into()));
        }
        let dim = pieces.discs.first().map(|m| m.dim()).unwrap_or(1);
        let mut pts: Vec<(Complex64, &dyn HoloMap)> = Vec::new();
        for (d, &map) in geometry.discs.iter().zip(&pieces.discs) {
            for &(frac, count) in &[(1.0, per_disc), (0.8, per_disc / 2), (0.5, per_disc / 4)] {
                let count = count.max(8);
                for k in 0..count {
                    let th = 2.0 * PI * (k as f64 + 0.5 * (frac < 1.0) as u8 as f64) / count as f64;
                    pts.push((d.center + d.radius * frac * Complex64::new(th.cos(), th.sin()), map));
                }
            }
            pts.push((d.center, map));
        }
        for (s, &map) in geometry.segments.iter().zip(&pieces.segments) {
            let count = (per_disc / 4).max(8);
            for k in 0..=count {
                let t = 0.5 * (1.0 - (PI * k as f64 / count as f64).cos());
                pts.push((s.a + (s.b - s.a) * t, map));
            }
        }
        let evals = exec.map_slice(&pts, |(z, map)| map.eval(*z));
        Ok(FitSet {
            points: pts.iter().map(|p| p.0).collect(),
            values: evals.iter().map(|e| e.0).collect(),
            derivatives: evals.iter().map(|e| e.1).collect(),
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn diff_norm(a: &CPoint, b: &CPoint, dim: usize) -> f64 {
    (0..dim).map(|k| (a[k] - b[k]).norm_sqr()).sum::<f64>().sqrt()
}

/// Centre and scale that put `K` inside the unit disc of the basis variable.
fn basis_frame(geometry: &AdmissibleSetGeometry) -> (Complex64, f64) {
    let wsum: f64 = geometry.discs.iter().map(|d| d.radius * d.radius).sum();
    let center = geometry.discs.iter().map(|d| d.center * d.radius * d.radius).sum::<Complex64>() / wsum;
    let mut scale: f64 = geometry.discs.iter().map(|d| (d.center - center).norm() + d.radius).fold(0.0, f64::max);
    for s in &geometry.segments {
        scale = scale.max((s.a - center).norm()).max((s.b - center).norm());
    }
    (center, scale.max(1e-300))
}

/// Weighted least squares for all coordinates at once.
fn solve_weighted(
    q: &DMatrix<Complex64>,
    dq: Option<&DMatrix<Complex64>>,
    set: &FitSet,
    weights: &[f64],
    deriv_weight: f64,
) -> Vec<Vec<Complex64>> {
    let m = q.nrows();
    let n = q.ncols();
    let rows = if dq.is_some() { 2 * m } else { m };
    let mut a = DMatrix::<Complex64>::zeros(rows, n);
    let mut b = DMatrix::<Complex64>::zeros(rows, set.dim);
    for i in 0..m {
        let w = weights[i];
        for k in 0..n {
            a[(i, k)] = q[(i, k)] * w;
        }
        for c in 0..set.dim {
            b[(i, c)] = set.values[i][c] * w;
        }
    }
    if let Some(dq) = dq {
        for i in 0..m {
            let w = weights[i] * deriv_weight;
            for k in 0..n {
                a[(m + i, k)] = dq[(i, k)] * w;
            }
            for c in 0..set.dim {
                b[(m + i, c)] = set.derivatives[i][c] * w;
            }
        }
    }
    let qr = a.qr();
    let rhs = qr.q().adjoint() * b;
    let r = qr.r();
    let sol = r.solve_upper_triangular(&rhs).unwrap_or_else(|| {
        // rank-deficient: fall back to SVD least squares
        let svd = r.clone().svd(true, true);
        svd.solve(&rhs, 1e-14).expect("svd solve")
    });
    (0..set.dim).map(|c| sol.column(c).iter().copied().collect()).collect()
}

fn errors_on(poly: &ArnoldiPoly, set: &FitSet, exec: Exec) -> (f64, f64, Vec<f64>) {
    let errs = exec.map_range(set.len(), |i| {
        let (p, dp) = poly.eval(set.points[i]);
        (diff_norm(&p, &set.values[i], set.dim), diff_norm(&dp, &set.derivatives[i], set.dim))
    });
    let c0 = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let c1 = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    (c0, c1, errs.iter().map(|e| e.0).collect())
}

/// Weighted least squares followed by Lawson sweeps; keeps the best sweep.
fn lawson(
    basis: ArnoldiBasis,
    q: &DMatrix<Complex64>,
    dq: Option<&DMatrix<Complex64>>,
    set: &FitSet,
    deriv_weight: f64,
    opts: &FitOptions,
) -> ArnoldiPoly {
    let mut weights = vec![1.0; set.len()];
    let mut best: Option<(f64, ArnoldiPoly)> = None;
    for sweep in 0..=opts.lawson_sweeps {
        let coeffs = solve_weighted(q, dq, set, &weights, deriv_weight);
        let poly = ArnoldiPoly { basis: basis.clone(), coeffs };
        let (c0, c1, errs) = errors_on(&poly, set, opts.exec);
        let score = if opts.c1 { c0 + c1 } else { c0 };
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, poly));
        }
        if sweep == opts.lawson_sweeps || score == 0.0 {
            break;
        }
        // Lawson update on the squared weights, renormalised to mean one.
        let mut w2: Vec<f64> = weights.iter().zip(&errs).map(|(w, e)| w * w * e).collect();
        let mean = w2.iter().sum::<f64>() / w2.len() as f64;
        if !(mean > 0.0) {
            break;
        }
        for v in w2.iter_mut() {
            *v = (*v / mean).max(1e-12);
        }
        weights = w2.iter().map(|v| v.sqrt()).collect();
    }
    best.expect("at least one sweep").1
}

/// Sup-norm fit of degree `n` to values at scattered points, in an Arnoldi
/// basis for `(z - center) / scale`. Uses `opts.lawson_sweeps`; derivatives are ignored.
pub fn fit_scattered(
    points: &[Complex64],
    values: &[CPoint],
    dim: usize,
    n: usize,
    center: Complex64,
    scale: f64,
    opts: &FitOptions,
) -> Result<ArnoldiPoly> {
    if points.len() != values.len() || points.len() <= n {
        return Err(Error::InvalidParameter(format!(
            "scattered fit of degree {n} needs more than {n} points with values, got {} and {}",
            points.len(),
            values.len()
        )));
    }
    let set = FitSet { points: points.to_vec(), values: values.to_vec(), derivatives: vec![ORIGIN; points.len()], dim };
    let (basis, q) = ArnoldiBasis::build(points, center, scale, n);
    Ok(lawson(basis, &q, None, &set, 0.0, &FitOptions { c1: false, ..*opts }))
}

fn fit_at_degree(
    geometry: &AdmissibleSetGeometry,
    pieces: &SetPieces,
    n: usize,
    opts: &FitOptions,
) -> Result<(ArnoldiPoly, FitReport)> {
    let per_disc = (opts.oversampling * (n + 1)).max(64);
    let set = FitSet::sample(geometry, pieces, per_disc, opts.exec)?;
    let validation = FitSet::sample(geometry, pieces, 4 * per_disc, opts.exec)?;
    let (center, scale) = basis_frame(geometry);
    let (basis, q) = ArnoldiBasis::build(&set.points, center, scale, n);
    let dq = if opts.c1 { Some(basis.sample(&set.points).1) } else { None };
    // derivatives of degree-n polynomials are about n/scale times larger
    let deriv_weight = scale / (n.max(1) as f64);
    let poly = lawson(basis, &q, dq.as_ref(), &set, deriv_weight, opts);
    let (c0, c1, _) = errors_on(&poly, &validation, opts.exec);
    Ok((
        poly,
        FitReport {
            sup_c0: c0,
            sup_derivative: c1,
            sup_c1: c0 + c1,
            degree: n,
            residual_history: vec![],
            fit_points: set.len(),
            validation_points: validation.len(),
        },
    ))
}

fn escalate(geometry: &AdmissibleSetGeometry, pieces: &SetPieces, opts: &FitOptions) -> Result<(ArnoldiPoly, FitReport)> {
    let tol = opts.tol;
    let measure = |r: &FitReport| if opts.c1 && !opts.stop_on_c0 { r.sup_c1 } else { r.sup_c0 };
    escalate_until(geometry, pieces, opts, &mut |_, r| Ok(measure(r) <= tol))
}

/// Doubles the degree up to the cap until `accept` holds for the fit.
fn escalate_until(
    geometry: &AdmissibleSetGeometry,
    pieces: &SetPieces,
    opts: &FitOptions,
    accept: &mut dyn FnMut(&ArnoldiPoly, &FitReport) -> Result<bool>,
) -> Result<(ArnoldiPoly, FitReport)> {
    geometry.validate()?;
    if pieces.discs.iter().chain(&pieces.segments).any(|m| m.dim() > MAX_DIM) {
        return Err(Error::InvalidParameter("target dimension too large".into()));
    }
    let mut degrees = vec![0usize, 1];
    let mut n = 2;
    while n < opts.degree_cap {
        degrees.push(n);
        n *= 2;
    }
    degrees.push(opts.degree_cap);
    degrees.dedup();
    degrees.retain(|&d| d <= opts.degree_cap);
    let mut history = Vec::new();
    let mut best: Option<(ArnoldiPoly, FitReport)> = None;
    let measure = |r: &FitReport| if opts.c1 && !opts.stop_on_c0 { r.sup_c1 } else { r.sup_c0 };
    for &deg in &degrees {
        let (poly, report) = fit_at_degree(geometry, pieces, deg, opts)?;
        let err = measure(&report);
        history.push((deg, err));
        let better = best.as_ref().is_none_or(|(_, b)| err < measure(b));
        if accept(&poly, &report)? {
            let mut report = report;
            report.residual_history = history;
            return Ok((poly, report));
        }
        if better {
            best = Some((poly, report));
        }
    }
    let (_, mut report) = best.expect("at least one degree tried");
    report.residual_history = history;
    Err(Error::DegreeCapExceeded {
        cap: opts.degree_cap,
        context: format!("fit not accepted, tolerance {:e}", opts.tol),
        best: Some(Box::new(report)),
    })
}

/// Runge approximation of a holomorphic target on `K` in the sup norm.
pub fn runge_polyfit(
    geometry: &AdmissibleSetGeometry,
    pieces: &SetPieces,
    opts: &FitOptions,
) -> Result<(ArnoldiPoly, FitReport)> {
    escalate(geometry, pieces, &FitOptions { c1: false, stop_on_c0: true, ..*opts })
}

/// C¹ approximation of C¹-compatible pieces (discs and bridges) on `K`.
pub fn mergelyan_c1_fit(
    geometry: &AdmissibleSetGeometry,
    pieces: &SetPieces,
    opts: &FitOptions,
) -> Result<(ArnoldiPoly, FitReport)> {
    escalate(geometry, pieces, &FitOptions { c1: true, ..*opts })
}

/// [`mergelyan_c1_fit`] with a caller-supplied stopping rule in place of the
/// tolerance on `K`; `opts.tol` only labels the failure.
pub fn mergelyan_c1_fit_until(
    geometry: &AdmissibleSetGeometry,
    pieces: &SetPieces,
    opts: &FitOptions,
    accept: &mut dyn FnMut(&ArnoldiPoly, &FitReport) -> Result<bool>,
) -> Result<(ArnoldiPoly, FitReport)> {
    escalate_until(geometry, pieces, &FitOptions { c1: true, ..*opts }, accept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::hermite_bridge;
    use crate::disc::{FnMap, LiftedDisc};
    use crate::geometry::Disc;
    use crate::torus::{cpoint, LatticeTorus};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Independent check on a polar grid much denser than the fit samples.
    fn dense_sup(poly: &ArnoldiPoly, f: impl Fn(Complex64) -> (Complex64, Complex64), d: Disc) -> (f64, f64) {
        let mut worst = (0.0f64, 0.0f64);
        for i in 0..=40 {
            let rho = d.radius * i as f64 / 40.0;
            for j in 0..720 {
                let z = d.center + Complex64::from_polar(rho, 2.0 * PI * j as f64 / 720.0);
                let (p, dp) = poly.eval(z);
                let (v, dv) = f(z);
                worst = (worst.0.max((p[0] - v).norm()), worst.1.max((dp[0] - dv).norm()));
            }
        }
        worst
    }

    #[test]
    fn pole_outside_the_disc_at_degree_ten() {
        let g = AdmissibleSetGeometry::single(Disc::new(c(0.0), 1.0));
        let f = FnMap { dim: 1, f: |z: Complex64| (cpoint(&[1.0 / (z - 2.0)]), cpoint(&[-1.0 / ((z - 2.0) * (z - 2.0))])) };
        let bound = 0.5f64.powi(11);
        let (poly, rep) = runge_polyfit(&g, &SetPieces::uniform(&f, &g, 0), &FitOptions::c0(bound, 10)).unwrap();
        assert!(poly.degree() <= 10);
        let (sup, _) = dense_sup(&poly, |z| (1.0 / (z - 2.0), c(0.0)), g.discs[0]);
        assert!(sup <= bound && rep.sup_c0 <= bound, "{sup:e} {rep:?}");
    }

    #[test]
    fn escalation_stops_at_the_cap() {
        let g = AdmissibleSetGeometry::single(Disc::new(c(0.0), 1.0));
        let f = FnMap { dim: 1, f: |z: Complex64| (cpoint(&[1.0 / (z - 1.05)]), cpoint(&[c(0.0)])) };
        match runge_polyfit(&g, &SetPieces::uniform(&f, &g, 0), &FitOptions::c0(1e-12, 8)) {
            Err(Error::DegreeCapExceeded { best: Some(rep), .. }) => {
                assert_eq!(rep.residual_history.iter().map(|h| h.0).collect::<Vec<_>>(), vec![0, 1, 2, 4, 8]);
            }
            other => panic!("{other:?}"),
        }
    }

    fn two_disc_c1(f1: &LiftedDisc, f2: &LiftedDisc, tol: f64, deg_cap: usize) -> Result<(ArnoldiPoly, FitReport, f64)> {
        let torus = LatticeTorus::unit_square();
        let geo = AdmissibleSetGeometry::two_discs(1.0, 4.0, 1.0);
        let seg = geo.segments[0];
        let bridge = hermite_bridge(f1, f2, seg.a, seg.b, &torus).unwrap();
        let lambda = bridge.lambda;
        let shifted = FnMap {
            dim: 1,
            f: |z: Complex64| {
                let (mut v, d) = f2.eval(z);
                v[0] -= lambda[0];
                (v, d)
            },
        };
        let pieces = SetPieces { discs: vec![f1, &shifted], segments: vec![&bridge], neck: None, degree_hints: vec![0, 0] };
        let (poly, rep) = mergelyan_c1_fit(&geo, &pieces, &FitOptions::c1(tol, deg_cap))?;
        // C¹ error on both discs from a dense independent grid
        let (a0, a1) = dense_sup(&poly, |z| (f1.eval(z).0[0], f1.eval(z).1[0]), geo.discs[0]);
        let (b0, b1) = dense_sup(&poly, |z| (shifted.eval(z).0[0], shifted.eval(z).1[0]), geo.discs[1]);
        Ok((poly, rep, (a0 + a1).max(b0 + b1)))
    }

    fn history_decreases(rep: &FitReport) -> bool {
        rep.residual_history.iter().filter(|h| h.0 >= 16).map(|h| h.1).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0])
    }

    // The segment meets each disc at a right angle, which limits the C¹ rate
    // to about 1/n; tolerances here are the ones that rate reaches.
    #[test]
    fn constants_joined_by_a_bridge() {
        let f1 = LiftedDisc::constant(c(0.0), 1.0, cpoint(&[c(0.0)]), 1).unwrap();
        let f2 = LiftedDisc::constant(c(4.0), 1.0, cpoint(&[c(0.5)]), 1).unwrap();
        let (poly, rep, dense) = two_disc_c1(&f1, &f2, 0.02, 120).unwrap();
        assert!(poly.degree() <= 120 && rep.sup_c1 <= 0.02 && history_decreases(&rep), "{rep:?}");
        assert!(dense <= rep.sup_c1 + 1e-12, "{dense:e} {rep:?}");
        match two_disc_c1(&f1, &f2, 1e-3, 120) {
            Err(Error::DegreeCapExceeded { best: Some(best), .. }) => assert!(best.sup_c1 < 0.02 && history_decreases(&best)),
            other => panic!("{:?}", other.map(|r| r.1)),
        }
    }

    #[test]
    fn identity_and_shifted_cube() {
        let f1 = LiftedDisc::identity(1.0);
        // (z - 4)^3 + 0.2 about its own centre
        let f2 = LiftedDisc::from_monomials(c(4.0), 1.0, vec![vec![c(0.2), c(0.0), c(0.0), c(1.0)]]).unwrap();
        let (poly, rep, dense) = two_disc_c1(&f1, &f2, 0.25, 200).unwrap();
        assert!(poly.degree() <= 128 && history_decreases(&rep), "{rep:?}");
        assert!(dense <= rep.sup_c1 + 1e-12, "{dense:e} {rep:?}");
    }
}
