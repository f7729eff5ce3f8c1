//! Normalized integration currents `A_f(eta) = (1/Area) ∫ f^* eta` of discs and
//! admissible sets, with area, boundary length and the length-area ratio.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::disc::{HoloMap, LiftedDisc};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{AdmissibleSetGeometry, Disc, DumbbellDomain};
use crate::quadrature::{disc_nodes, gauss_legendre_on, CircleSampler, Node, QuadratureGrid};
use crate::torus::{hermitian_pair, Branch, CPoint, LatticeTorus, TestForm, ORIGIN};

pub const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentEvaluation {
    /// `∫ f^* eta_j` before normalization.
    pub integrals: Vec<f64>,
    /// `A_f(eta_j)`.
    pub pairings: Vec<f64>,
    pub area: f64,
    pub boundary_length: f64,
    pub ratio: f64,
    /// Change of each pairing under the last refinement.
    pub error_estimates: Vec<f64>,
    pub area_error: f64,
    pub length_error: f64,
}

impl CurrentEvaluation {
    fn from_parts(integrals: Vec<f64>, area: f64, length: f64) -> Result<Self> {
        if !(area >= DEGENERATE_AREA) {
            return Err(Error::DegenerateDisc { area });
        }
        let pairings = integrals.iter().map(|v| v / area).collect();
        Ok(CurrentEvaluation {
            error_estimates: vec![0.0; integrals.len()],
            integrals,
            pairings,
            area,
            boundary_length: length,
            ratio: length / area,
            area_error: 0.0,
            length_error: 0.0,
        })
    }

    /// `|ratio_a - ratio_b|` and the largest pairing gap over the first `n` forms.
    pub fn proximity(&self, other: &CurrentEvaluation, n: usize) -> (f64, f64) {
        let pair = (0..n.min(self.pairings.len()).min(other.pairings.len()))
            .map(|j| (self.pairings[j] - other.pairings[j]).abs())
            .fold(0.0, f64::max);
        ((self.ratio - other.ratio).abs(), pair)
    }

    fn change_from(&self, coarse: &CurrentEvaluation) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1e-300);
        let mut c = rel(self.area, coarse.area).max(rel(self.boundary_length, coarse.boundary_length));
        for (p, q) in self.pairings.iter().zip(&coarse.pairings) {
            c = c.max((p - q).abs() / p.abs().max(1.0));
        }
        c
    }

    fn with_errors_from(mut self, coarse: &CurrentEvaluation) -> Self {
        self.error_estimates = self.pairings.iter().zip(&coarse.pairings).map(|(p, q)| (p - q).abs()).collect();
        self.area_error = (self.area - coarse.area).abs();
        self.length_error = (self.boundary_length - coarse.boundary_length).abs();
        self
    }
}

/// Precomputed data for evaluating a list of test forms at many points.
pub struct FormBank<'a> {
    torus: &'a LatticeTorus,
    forms: Vec<TestForm>,
    modes: Vec<Vec<i64>>,
    form_mode: Vec<usize>,
    max_abs: usize,
}

impl<'a> FormBank<'a> {
    pub fn new(torus: &'a LatticeTorus, forms: &[TestForm]) -> Self {
        let mut modes: Vec<Vec<i64>> = Vec::new();
        let mut form_mode = Vec::with_capacity(forms.len());
        for f in forms {
            let idx = modes.iter().position(|m| *m == f.mode).unwrap_or_else(|| {
                modes.push(f.mode.clone());
                modes.len() - 1
            });
            form_mode.push(idx);
        }
        let max_abs = modes.iter().flat_map(|m| m.iter()).map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
        FormBank { torus, forms: forms.to_vec(), modes, form_mode, max_abs }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn forms(&self) -> &[TestForm] {
        &self.forms
    }

    pub fn torus(&self) -> &LatticeTorus {
        self.torus
    }

    /// Adds `weight * [|dp|^2_omega, integrand_1, ..., integrand_J]` to `acc`.
    #[inline]
    pub fn accumulate(&self, p: &CPoint, dp: &CPoint, weight: f64, acc: &mut [f64]) {
        let d = self.torus.dim();
        let mass = hermitian_pair(self.torus.hermitian(), d, dp, dp).re;
        acc[0] += weight * mass;
        if self.forms.is_empty() {
            return;
        }
        let t = self.torus.lattice().fractional_coords(p);
        let n = 2 * d;
        let m = self.max_abs;
        let width = 2 * m + 1;
        let mut pow = [[Complex64::new(0.0, 0.0); 2 * 16 + 1]; 4];
        let use_table = width <= pow[0].len();
        if use_table {
            for k in 0..n {
                let e = Complex64::from_polar(1.0, 2.0 * PI * t[k]);
                pow[k][m] = Complex64::new(1.0, 0.0);
                for q in 1..=m {
                    pow[k][m + q] = pow[k][m + q - 1] * e;
                    pow[k][m - q] = pow[k][m + q].conj();
                }
            }
        }
        let mut phase_cache = [Complex64::new(0.0, 0.0); 64];
        for (mi, mode) in self.modes.iter().enumerate().take(phase_cache.len()) {
            phase_cache[mi] = if use_table {
                let mut z = Complex64::new(1.0, 0.0);
                for k in 0..n {
                    z *= pow[k][(mode[k] + m as i64) as usize];
                }
                z
            } else {
                let s: f64 = mode.iter().zip(t.iter()).map(|(&q, &tk)| q as f64 * tk).sum();
                Complex64::from_polar(1.0, 2.0 * PI * s)
            };
        }
        for (j, f) in self.forms.iter().enumerate() {
            let mi = self.form_mode[j];
            let phase = if mi < phase_cache.len() {
                phase_cache[mi]
            } else {
                let s: f64 = f.mode.iter().zip(t.iter()).map(|(&q, &tk)| q as f64 * tk).sum();
                Complex64::from_polar(1.0, 2.0 * PI * s)
            };
            let chi = match f.branch {
                Branch::Cos => phase.re,
                Branch::Sin => phase.im,
            };
            let mv = if f.matrix_index == 0 { mass } else { hermitian_pair(&f.matrix, d, dp, dp).re };
            acc[j + 1] += weight * chi * mv;
        }
    }
}

/// Raw integrals `[area, ∫ f^* eta_1, ...]` and boundary length of a map on a
/// disc at fixed counts.
fn disc_pass(map: &dyn HoloMap, disc: Disc, bank: &FormBank, nr: usize, nt: usize, exec: Exec) -> (Vec<f64>, f64) {
    let len = bank.len() + 1;
    let lifted = map
        .as_lifted()
        .filter(|l| l.center() == disc.center && (l.radius() - disc.radius).abs() <= 1e-15 * disc.radius);
    let wt = 2.0 * PI / nt as f64;
    let r = disc.radius;
    let mass = |dp: &CPoint| hermitian_pair(bank.torus.hermitian(), bank.torus.dim(), dp, dp).re.max(0.0).sqrt();
    match lifted {
        Some(l) => {
            let radial = QuadratureGrid::radial(nr);
            let sampler = CircleSampler::new(nt);
            let acc = exec.sum_vec(radial.len(), len, |i, acc| {
                let (rho, w) = radial[i];
                let mut vals = vec![(ORIGIN, ORIGIN); nt];
                sampler.sample(l, rho, &mut vals);
                let weight = w * wt * r * r;
                for (p, dp) in &vals {
                    bank.accumulate(p, dp, weight, acc);
                }
            });
            let mut vals = vec![(ORIGIN, ORIGIN); nt];
            sampler.sample(l, 1.0, &mut vals);
            let length = vals.iter().map(|(_, dp)| mass(dp)).sum::<f64>() * wt * r;
            (acc, length)
        }
        None => {
            let nodes = disc_nodes(disc.center, r, nr, nt);
            let acc = integrate_nodes(map, &nodes, bank, exec);
            let length = exec
                .map_range(nt, |k| {
                    let th = wt * k as f64;
                    mass(&map.eval(disc.center + r * Complex64::new(th.cos(), th.sin())).1)
                })
                .iter()
                .sum::<f64>()
                * wt
                * r;
            (acc, length)
        }
    }
}

/// `sum_nodes weight * [|f'|^2, integrands...]`.
pub fn integrate_nodes(map: &dyn HoloMap, nodes: &[Node], bank: &FormBank, exec: Exec) -> Vec<f64> {
    exec.sum_vec(nodes.len(), bank.len() + 1, |i, acc| {
        let (p, dp) = map.eval(nodes[i].z);
        bank.accumulate(&p, &dp, nodes[i].weight, acc);
    })
}

/// Doubling refinement driver shared by all disc-type evaluations.
fn refine<F>(grid: &QuadratureGrid, start: (usize, usize), mut pass: F) -> Result<CurrentEvaluation>
where
    F: FnMut(usize, usize) -> Result<CurrentEvaluation>,
{
    let (mut nr, mut nt) = start;
    let mut coarse = pass(nr, nt)?;
    loop {
        let (nr2, nt2) = ((2 * nr).min(grid.max_radial), (2 * nt).min(grid.max_angular));
        if nr2 == nr && nt2 == nt {
            let change = coarse.error_estimates.iter().copied().fold(0.0, f64::max);
            if change > grid.fail_tol {
                return Err(Error::QuadratureNotConverged { change });
            }
            return Ok(coarse);
        }
        let fine = pass(nr2, nt2)?;
        let change = fine.change_from(&coarse);
        let fine = fine.with_errors_from(&coarse);
        if change < grid.rel_tol {
            return Ok(fine);
        }
        if nr2 == grid.max_radial && nt2 == grid.max_angular {
            if change > grid.fail_tol {
                return Err(Error::QuadratureNotConverged { change });
            }
            return Ok(fine);
        }
        coarse = fine;
        nr = nr2;
        nt = nt2;
    }
}

/// Current evaluation of any holomorphic map on a closed disc.
pub fn evaluate_map_on_disc(
    map: &dyn HoloMap,
    disc: Disc,
    torus: &LatticeTorus,
    forms: &[TestForm],
    grid: &QuadratureGrid,
    degree_hint: usize,
) -> Result<CurrentEvaluation> {
    let bank = FormBank::new(torus, forms);
    refine(grid, grid.sized_for(degree_hint), |nr, nt| {
        let (acc, length) = disc_pass(map, disc, &bank, nr, nt, grid.exec);
        CurrentEvaluation::from_parts(acc[1..].to_vec(), acc[0], length)
    })
}

/// Current evaluation of a lifted disc on its own domain.
pub fn evaluate_disc(
    disc: &LiftedDisc,
    torus: &LatticeTorus,
    forms: &[TestForm],
    grid: &QuadratureGrid,
) -> Result<CurrentEvaluation> {
    if disc.dim() != torus.dim() {
        return Err(Error::InvalidParameter(format!(
            "disc has {} coordinates but the torus has dimension {}",
            disc.dim(),
            torus.dim()
        )));
    }
    let domain = Disc::new(disc.center(), disc.radius());
    evaluate_map_on_disc(disc, domain, torus, forms, grid, disc.effective_degree())
}

/// `(area, boundary length, ratio)`.
pub fn metric_functionals(disc: &LiftedDisc, torus: &LatticeTorus, grid: &QuadratureGrid) -> Result<(f64, f64, f64)> {
    let e = evaluate_disc(disc, torus, &[], grid)?;
    Ok((e.area, e.boundary_length, e.ratio))
}

pub fn pair_with_form(disc: &LiftedDisc, form: &TestForm, torus: &LatticeTorus, grid: &QuadratureGrid) -> Result<f64> {
    Ok(evaluate_disc(disc, torus, std::slice::from_ref(form), grid)?.pairings[0])
}

/// Maps attached to the components of an admissible set.
pub struct SetPieces<'a> {
    pub discs: Vec<&'a dyn HoloMap>,
    pub segments: Vec<&'a dyn HoloMap>,
    /// Map used on the thickened neck (required when the neck width is positive).
    pub neck: Option<&'a dyn HoloMap>,
    /// Degree hints for the disc quadratures.
    pub degree_hints: Vec<usize>,
}

impl<'a> SetPieces<'a> {
    /// One map on every component.
    pub fn uniform(map: &'a dyn HoloMap, geometry: &AdmissibleSetGeometry, degree_hint: usize) -> Self {
        SetPieces {
            discs: vec![map; geometry.discs.len()],
            segments: vec![map; geometry.segments.len()],
            neck: Some(map),
            degree_hints: vec![degree_hint; geometry.discs.len()],
        }
    }
}

/// Image length `∫ |f'|_omega ds` of a segment, with a composite Gauss rule.
pub fn segment_image_length(map: &dyn HoloMap, a: Complex64, b: Complex64, torus: &LatticeTorus, panels: usize) -> f64 {
    let dir = b - a;
    let len = dir.norm();
    let mut total = 0.0;
    for k in 0..panels {
        let (s0, s1) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        for (s, w) in gauss_legendre_on(16, s0, s1) {
            total += w * len * torus.norm(&map.eval(a + dir * s).1);
        }
    }
    total
}

/// Current evaluation of an admissible set: disc interiors plus (for a
/// positive neck width) the neck; boundary from circles plus twice the
/// segment images, or the true boundary of the thickened dumbbell.
pub fn admissible_set_functionals(
    pieces: &SetPieces,
    geometry: &AdmissibleSetGeometry,
    torus: &LatticeTorus,
    forms: &[TestForm],
    grid: &QuadratureGrid,
) -> Result<CurrentEvaluation> {
    if pieces.discs.len() != geometry.discs.len() {
        return Err(Error::InconsistentPieces(format!(
            "{} disc maps for {} discs",
            pieces.discs.len(),
            geometry.discs.len()
        )));
    }
    if geometry.neck_width == 0.0 && pieces.segments.len() != geometry.segments.len() {
        return Err(Error::InconsistentPieces(format!(
            "{} segment maps for {} segments",
            pieces.segments.len(),
            geometry.segments.len()
        )));
    }
    if geometry.neck_width > 0.0 && pieces.neck.is_none() {
        return Err(Error::InconsistentPieces("thickened neck has no map".into()));
    }
    geometry.validate()?;
    let mut integrals = vec![0.0; forms.len()];
    let mut area = 0.0;
    let mut length = 0.0;
    let mut pair_err = vec![0.0; forms.len()];
    let mut area_err = 0.0;
    let mut length_err = 0.0;
    for (i, (&map, &disc)) in pieces.discs.iter().zip(&geometry.discs).enumerate() {
        let hint = pieces.degree_hints.get(i).copied().unwrap_or(8);
        let e = evaluate_map_on_disc(map, disc, torus, forms, grid, hint)?;
        for j in 0..forms.len() {
            integrals[j] += e.integrals[j];
            pair_err[j] += e.error_estimates[j] * e.area;
        }
        area += e.area;
        area_err += e.area_error;
        if geometry.neck_width == 0.0 {
            length += e.boundary_length;
            length_err += e.length_error;
        }
    }
    if geometry.neck_width == 0.0 {
        for (seg, &map) in geometry.segments.iter().zip(&pieces.segments) {
            let coarse = segment_image_length(map, seg.a, seg.b, torus, 8);
            let fine = segment_image_length(map, seg.a, seg.b, torus, 16);
            length += 2.0 * fine;
            length_err += 2.0 * (fine - coarse).abs();
        }
    } else {
        let neck = pieces.neck.expect("checked above");
        let bank = FormBank::new(torus, forms);
        let dumbbell = geometry.dumbbell(2048)?;
        let coarse = integrate_nodes(neck, &dumbbell.neck_nodes(16), &bank, grid.exec);
        let fine = integrate_nodes(neck, &dumbbell.neck_nodes(32), &bank, grid.exec);
        area += fine[0];
        area_err += (fine[0] - coarse[0]).abs();
        for j in 0..forms.len() {
            integrals[j] += fine[j + 1];
            pair_err[j] += (fine[j + 1] - coarse[j + 1]).abs();
        }
        let lc = dumbbell_boundary_length(pieces, geometry, &dumbbell, torus, grid.exec);
        let lf = dumbbell_boundary_length(pieces, geometry, &dumbbell.rediscretized(4096), torus, grid.exec);
        length += lf;
        length_err += (lf - lc).abs();
    }
    let mut e = CurrentEvaluation::from_parts(integrals, area, length)?;
    e.error_estimates = pair_err.iter().map(|v| v / area).collect();
    e.area_error = area_err;
    e.length_error = length_err;
    Ok(e)
}

fn dumbbell_boundary_length(
    pieces: &SetPieces,
    geometry: &AdmissibleSetGeometry,
    domain: &DumbbellDomain,
    torus: &LatticeTorus,
    exec: Exec,
) -> f64 {
    let nodes = domain.nodes();
    exec.sum_vec(nodes.len(), 1, |i, acc| {
        let n = nodes[i];
        let map = geometry
            .discs
            .iter()
            .position(|d| (n.z - d.center).norm() <= d.radius * (1.0 + 1e-12))
            .map(|k| pieces.discs[k])
            .or(pieces.neck)
            .expect("neck map present");
        acc[0] += n.weight * torus.norm(&map.eval(n.z).1);
    })[0]
}

/// Grid radii whose length-area ratio is below `threshold`, in increasing order.
pub fn select_ahlfors_radii(
    family: &[LiftedDisc],
    threshold: f64,
    torus: &LatticeTorus,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter("threshold must be positive".into()));
    }
    let mut radii = Vec::new();
    let mut last = 0.0;
    for disc in family {
        if disc.radius() <= last {
            return Err(Error::InvalidParameter("radius grid must be increasing".into()));
        }
        last = disc.radius();
        let (_, _, ratio) = metric_functionals(disc, torus, grid)?;
        if ratio < threshold {
            radii.push(disc.radius());
        }
    }
    Ok(radii)
}

/// Concentric restrictions of one lift to the given radii.
pub fn concentric_family(base: &LiftedDisc, radii: &[f64]) -> Result<Vec<LiftedDisc>> {
    radii.iter().map(|&r| base.restrict(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::test_forms;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> LatticeTorus {
        LatticeTorus::unit_square()
    }

    #[test]
    fn closed_form_functionals() {
        let t = unit();
        let g = QuadratureGrid::default();
        let (a, l, q) = metric_functionals(&LiftedDisc::identity(2.0), &t, &g).unwrap();
        assert_relative_eq!(a, 4.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(l, 4.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(q, 1.0, max_relative = 1e-12);
        let cube = LiftedDisc::monomial(1.0, Complex64::new(1.0, 0.0), 3);
        let (a, l, q) = metric_functionals(&cube, &t, &g).unwrap();
        assert_relative_eq!(a, 3.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(l, 6.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(q, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_disc_is_degenerate() {
        let c = LiftedDisc::constant(Complex64::new(0.0, 0.0), 1.0, [Complex64::new(0.3, 0.0); 2], 1).unwrap();
        assert!(matches!(metric_functionals(&c, &unit(), &QuadratureGrid::default()), Err(Error::DegenerateDisc { .. })));
    }

    #[test]
    fn single_disc_set_reduces_to_disc() {
        let t = unit();
        let g = QuadratureGrid::default();
        let forms = test_forms(&t, 8);
        let disc = LiftedDisc::from_monomials(Complex64::new(0.0, 0.0), 1.0, vec![vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.2), Complex64::new(0.3, 0.0)]]).unwrap();
        let geom = AdmissibleSetGeometry::single(Disc::new(Complex64::new(0.0, 0.0), 1.0));
        let set = admissible_set_functionals(&SetPieces::uniform(&disc, &geom, 2), &geom, &t, &forms, &g).unwrap();
        let direct = evaluate_disc(&disc, &t, &forms, &g).unwrap();
        assert_relative_eq!(set.ratio, direct.ratio, max_relative = 1e-14);
        for (a, b) in set.pairings.iter().zip(&direct.pairings) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn ahlfors_radii_for_identity() {
        let t = unit();
        let g = QuadratureGrid::default();
        let dyadic: Vec<f64> = (0..7).map(|k| (1u32 << k) as f64).collect();
        let fam = concentric_family(&LiftedDisc::identity(1.0), &dyadic).unwrap();
        assert_eq!(select_ahlfors_radii(&fam, 0.1, &t, &g).unwrap(), vec![32.0, 64.0]);
        assert_eq!(select_ahlfors_radii(&fam, 10.0, &t, &g).unwrap(), dyadic);
        let dense: Vec<f64> = (1..=64).map(|r| r as f64).collect();
        let fam = concentric_family(&LiftedDisc::identity(1.0), &dense).unwrap();
        let picked = select_ahlfors_radii(&fam, 0.1, &t, &g).unwrap();
        assert_eq!(picked, (21..=64).map(|r| r as f64).collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn mass_is_one(coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..7)) {
            let t = unit();
            let c: Vec<Complex64> = coeffs.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            prop_assume!(c[1..].iter().any(|v| v.norm() > 0.05));
            let disc = LiftedDisc::from_monomials(Complex64::new(0.0, 0.0), 1.0, vec![c]).unwrap();
            let e = evaluate_disc(&disc, &t, &test_forms(&t, 4), &QuadratureGrid::default()).unwrap();
            prop_assert!((e.pairings[0] - 1.0).abs() < 1e-10);
        }
    }
}
