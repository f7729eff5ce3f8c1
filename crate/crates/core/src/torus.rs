//! Flat complex tori `C^d / L` for `d` in {1, 2}: lattice reduction, the flat
//! distance, and the enumerated family of Fourier test (1,1)-forms.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// A point (or vector) of `C^d`; coordinates past `d` are kept at zero.
pub type CPoint = [Complex64; MAX_DIM];

pub const ORIGIN: CPoint = [Complex64::new(0.0, 0.0); MAX_DIM];

pub fn cpoint(coords: &[Complex64]) -> CPoint {
    let mut p = ORIGIN;
    p[..coords.len()].copy_from_slice(coords);
    p
}

/// Hermitian `d x d` matrix stored densely in a `2 x 2` block.
pub type HMatrix = [[Complex64; MAX_DIM]; MAX_DIM];

pub fn identity_matrix(d: usize) -> HMatrix {
    let mut m = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
    for (a, row) in m.iter_mut().enumerate().take(d) {
        row[a] = Complex64::new(1.0, 0.0);
    }
    m
}

/// `sum_{a,b} m_ab u_a conj(v_b)`.
#[inline]
pub fn hermitian_pair(m: &HMatrix, d: usize, u: &CPoint, v: &CPoint) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            acc += m[a][b] * u[a] * v[b].conj();
        }
    }
    acc
}

fn to_real(d: usize, p: &CPoint) -> [f64; 2 * MAX_DIM] {
    let mut x = [0.0; 2 * MAX_DIM];
    for a in 0..d {
        x[2 * a] = p[a].re;
        x[2 * a + 1] = p[a].im;
    }
    x
}

fn from_real(d: usize, x: &[f64]) -> CPoint {
    let mut p = ORIGIN;
    for a in 0..d {
        p[a] = Complex64::new(x[2 * a], x[2 * a + 1]);
    }
    p
}

/// LLL-reduced view of a lattice in a fixed inner product, used for
/// closest-vector queries.
#[derive(Debug, Clone)]
struct ReducedBasis {
    n: usize,
    gram: DMatrix<f64>,
    /// Columns are the reduced basis vectors in real coordinates.
    reduced: DMatrix<f64>,
    reduced_inv: DMatrix<f64>,
    /// Integer change of basis: `reduced = basis * transform`.
    transform: DMatrix<f64>,
    /// Half the length of the shortest reduced vector.
    packing_radius: f64,
}

impl ReducedBasis {
    fn new(basis: &DMatrix<f64>, gram: DMatrix<f64>) -> Self {
        let n = basis.ncols();
        let mut b = basis.clone();
        let mut u = DMatrix::<f64>::identity(n, n);
        let ip = |x: &DMatrix<f64>, i: usize, y: &DMatrix<f64>, j: usize| -> f64 {
            (x.column(i).transpose() * &gram * y.column(j))[(0, 0)]
        };
        // Textbook LLL with delta = 3/4; n <= 4 so recomputing Gram-Schmidt
        // after every swap costs nothing.
        let mut k = 1;
        let mut guard = 0;
        while k < n && guard < 10_000 {
            guard += 1;
            let (mu, bstar) = gram_schmidt(&b, &gram);
            for j in (0..k).rev() {
                let q = mu[(k, j)].round();
                if q != 0.0 {
                    let col_j = b.column(j).clone_owned();
                    let mut col_k = b.column_mut(k);
                    col_k -= col_j * q;
                    let uj = u.column(j).clone_owned();
                    let mut uk = u.column_mut(k);
                    uk -= uj * q;
                }
            }
            let (mu, _) = gram_schmidt(&b, &gram);
            if bstar[k] >= (0.75 - mu[(k, k - 1)].powi(2)) * bstar[k - 1] {
                k += 1;
            } else {
                b.swap_columns(k, k - 1);
                u.swap_columns(k, k - 1);
                k = (k - 1).max(1);
            }
        }
        let reduced_inv = b.clone().try_inverse().expect("lattice basis is invertible");
        let shortest = (0..n).map(|i| ip(&b, i, &b, i).sqrt()).fold(f64::INFINITY, f64::min);
        ReducedBasis {
            n,
            gram,
            reduced: b,
            reduced_inv,
            transform: u,
            packing_radius: 0.5 * shortest,
        }
    }

    fn norm_sq(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += x[i] * self.gram[(i, j)] * x[j];
            }
        }
        acc
    }

    /// Closest lattice vector to `x`; returns `(integer coordinates in the
    /// original basis, lattice vector in real coordinates)`.
    fn closest(&self, x: &[f64]) -> ([i64; 2 * MAX_DIM], [f64; 2 * MAX_DIM]) {
        let n = self.n;
        let mut y = [0.0; 2 * MAX_DIM];
        for i in 0..n {
            y[i] = (0..n).map(|j| self.reduced_inv[(i, j)] * x[j]).sum::<f64>().round();
        }
        let scale = 1.0 + self.norm_sq(x);
        let mut best: Option<(f64, [i64; 2 * MAX_DIM], [f64; 2 * MAX_DIM])> = None;
        let span = 5usize.pow(n as u32);
        for code in 0..span {
            let mut c = code;
            let mut k = [0.0; 2 * MAX_DIM];
            for ki in k.iter_mut().take(n) {
                *ki = (c % 5) as f64 - 2.0;
                c /= 5;
            }
            let mut red = [0.0; 2 * MAX_DIM];
            for i in 0..n {
                red[i] = y[i] + k[i];
            }
            let mut orig = [0i64; 2 * MAX_DIM];
            for i in 0..n {
                orig[i] = (0..n).map(|j| self.transform[(i, j)] * red[j]).sum::<f64>().round() as i64;
            }
            let mut v = [0.0; 2 * MAX_DIM];
            let mut diff = [0.0; 2 * MAX_DIM];
            for i in 0..n {
                v[i] = (0..n).map(|j| self.reduced[(i, j)] * red[j]).sum::<f64>();
                diff[i] = x[i] - v[i];
            }
            let d2 = self.norm_sq(&diff);
            let better = match &best {
                None => true,
                Some((bd, bo, _)) => {
                    if d2 < bd - 1e-12 * scale {
                        true
                    } else if (d2 - bd).abs() <= 1e-12 * scale {
                        orig[..n] < bo[..n]
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((d2, orig, v));
            }
        }
        let (_, o, v) = best.expect("search space is nonempty");
        (o, v)
    }
}

fn gram_schmidt(b: &DMatrix<f64>, gram: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = b.ncols();
    let ip = |x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>| (x.transpose() * gram * y)[(0, 0)];
    let mut stars: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    let mut mu = DMatrix::<f64>::zeros(n, n);
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let bi = b.column(i).clone_owned();
        let mut v = bi.clone();
        for j in 0..i {
            mu[(i, j)] = ip(&bi, &stars[j]) / norms[j];
            v -= &stars[j] * mu[(i, j)];
        }
        norms[i] = ip(&v, &v);
        stars.push(v);
    }
    (mu, norms)
}

/// A full-rank lattice in `C^d` given by `2d` real-linearly independent generators.
#[derive(Debug, Clone)]
pub struct Lattice {
    dim: usize,
    generators: Vec<CPoint>,
    basis: DMatrix<f64>,
    basis_inv: DMatrix<f64>,
    euclidean: ReducedBasis,
}

impl Lattice {
    pub fn new(dim: usize, generators: Vec<CPoint>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidParameter(format!("torus dimension {dim} not in {{1,2}}")));
        }
        if generators.len() != 2 * dim {
            return Err(Error::InvalidParameter(format!(
                "expected {} generators, got {}",
                2 * dim,
                generators.len()
            )));
        }
        let n = 2 * dim;
        let mut basis = DMatrix::<f64>::zeros(n, n);
        for (j, g) in generators.iter().enumerate() {
            let x = to_real(dim, g);
            for i in 0..n {
                basis[(i, j)] = x[i];
            }
        }
        let gram_det = (basis.transpose() * &basis).determinant();
        if gram_det.abs() <= 1e-12 || !gram_det.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lattice generators are degenerate (Gram determinant {gram_det:e})"
            )));
        }
        let basis_inv = basis.clone().try_inverse().ok_or_else(|| {
            Error::InvalidParameter("lattice basis not invertible".into())
        })?;
        let euclidean = ReducedBasis::new(&basis, DMatrix::identity(n, n));
        Ok(Lattice { dim, generators, basis, basis_inv, euclidean })
    }

    /// The Gaussian integers `Z + iZ`.
    pub fn square() -> Self {
        Lattice::new(1, vec![cpoint(&[Complex64::new(1.0, 0.0)]), cpoint(&[Complex64::new(0.0, 1.0)])])
            .expect("unit square lattice")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[CPoint] {
        &self.generators
    }

    /// Real coordinates of `p` with respect to the generators.
    pub fn fractional_coords(&self, p: &CPoint) -> [f64; 2 * MAX_DIM] {
        let x = to_real(self.dim, p);
        let n = 2 * self.dim;
        let mut t = [0.0; 2 * MAX_DIM];
        for i in 0..n {
            t[i] = (0..n).map(|j| self.basis_inv[(i, j)] * x[j]).sum();
        }
        t
    }

    pub fn point_from_coords(&self, t: &[f64]) -> CPoint {
        let n = 2 * self.dim;
        let mut x = [0.0; 2 * MAX_DIM];
        for i in 0..n {
            x[i] = (0..n).map(|j| self.basis[(i, j)] * t[j]).sum();
        }
        from_real(self.dim, &x)
    }

    /// Lattice vector from integer coordinates in the generator basis.
    pub fn vector(&self, coords: &[i64]) -> CPoint {
        let t: Vec<f64> = coords.iter().map(|&c| c as f64).collect();
        self.point_from_coords(&t)
    }

    /// Euclidean closest lattice vector, ties broken lexicographically on the
    /// integer coordinates. Returns the coordinates and the vector.
    pub fn nearest_translate(&self, w: &CPoint) -> (Vec<i64>, CPoint) {
        let x = to_real(self.dim, w);
        let (coords, v) = self.euclidean.closest(&x);
        (coords[..2 * self.dim].to_vec(), from_real(self.dim, &v))
    }
}

/// Nearest lattice point to `w` in the Euclidean norm of `C^d`.
pub fn nearest_lattice_translate(w: &CPoint, lattice: &Lattice) -> CPoint {
    lattice.nearest_translate(w).1
}

/// Serializable description of a torus, as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSpec {
    pub dim: usize,
    /// `2d` generators; each is `d` complex numbers written as `[re, im]`.
    pub generators: Vec<Vec<[f64; 2]>>,
    /// Row-major `d x d` Hermitian matrix, entries `[re, im]`.
    pub hermitian: Vec<Vec<[f64; 2]>>,
}

impl Default for TorusSpec {
    fn default() -> Self {
        TorusSpec {
            dim: 1,
            generators: vec![vec![[1.0, 0.0]], vec![[0.0, 1.0]]],
            hermitian: vec![vec![[1.0, 0.0]]],
        }
    }
}

/// The target `X = C^d / L` with flat Hermitian form
/// `omega = (i/2) sum h_ab dz_a ^ dzbar_b`.
#[derive(Debug, Clone)]
pub struct LatticeTorus {
    lattice: Lattice,
    hermitian: HMatrix,
    metric: ReducedBasis,
    diameter: f64,
}

impl LatticeTorus {
    pub fn new(lattice: Lattice, hermitian: HMatrix) -> Result<Self> {
        let d = lattice.dim;
        for a in 0..d {
            for b in 0..d {
                if (hermitian[a][b] - hermitian[b][a].conj()).norm() > 1e-12 {
                    return Err(Error::InvalidParameter("hermitian form is not Hermitian".into()));
                }
            }
        }
        let min_eig = if d == 1 {
            hermitian[0][0].re
        } else {
            let tr = hermitian[0][0].re + hermitian[1][1].re;
            let det = hermitian[0][0].re * hermitian[1][1].re - hermitian[0][1].norm_sqr();
            0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())
        };
        if min_eig <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "hermitian form is not positive definite (min eigenvalue {min_eig:e})"
            )));
        }
        let n = 2 * d;
        let q = |x: &[f64]| -> f64 {
            let v = from_real(d, x);
            hermitian_pair(&hermitian, d, &v, &v).re
        };
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut ei = [0.0; 2 * MAX_DIM];
                let mut ej = [0.0; 2 * MAX_DIM];
                let mut eij = [0.0; 2 * MAX_DIM];
                ei[i] = 1.0;
                ej[j] = 1.0;
                eij[i] += 1.0;
                eij[j] += 1.0;
                gram[(i, j)] = 0.5 * (q(&eij) - q(&ei) - q(&ej));
            }
        }
        let metric = ReducedBasis::new(&lattice.basis, gram);
        let mut torus = LatticeTorus { lattice, hermitian, metric, diameter: 0.0 };
        torus.diameter = torus.compute_diameter();
        Ok(torus)
    }

    /// `C / (Z + iZ)` with the flat identity form.
    pub fn unit_square() -> Self {
        LatticeTorus::new(Lattice::square(), identity_matrix(1)).expect("unit square torus")
    }

    pub fn from_spec(spec: &TorusSpec) -> Result<Self> {
        let d = spec.dim;
        let generators = spec
            .generators
            .iter()
            .map(|g| {
                if g.len() != d {
                    return Err(Error::InvalidParameter(format!(
                        "generator has {} coordinates, torus dimension is {d}",
                        g.len()
                    )));
                }
                Ok(cpoint(&g.iter().map(|c| Complex64::new(c[0], c[1])).collect::<Vec<_>>()))
            })
            .collect::<Result<Vec<_>>>()?;
        let lattice = Lattice::new(d, generators)?;
        if spec.hermitian.len() != d || spec.hermitian.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter(format!("hermitian form must be {d}x{d}")));
        }
        let mut h = identity_matrix(d);
        for a in 0..d {
            for b in 0..d {
                h[a][b] = Complex64::new(spec.hermitian[a][b][0], spec.hermitian[a][b][1]);
            }
        }
        LatticeTorus::new(lattice, h)
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn hermitian(&self) -> &HMatrix {
        &self.hermitian
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Squared flat norm `|v|_omega^2`.
    #[inline]
    pub fn norm_sq(&self, v: &CPoint) -> f64 {
        hermitian_pair(&self.hermitian, self.dim(), v, v).re.max(0.0)
    }

    #[inline]
    pub fn norm(&self, v: &CPoint) -> f64 {
        self.norm_sq(v).sqrt()
    }

    /// Flat distance of the projections of `p` and `q`.
    pub fn distance(&self, p: &CPoint, q: &CPoint) -> f64 {
        let d = self.dim();
        let mut diff = ORIGIN;
        for a in 0..d {
            diff[a] = p[a] - q[a];
        }
        let direct = self.norm(&diff);
        if direct < self.metric.packing_radius {
            return direct;
        }
        let x = to_real(d, &diff);
        let (_, v) = self.metric.closest(&x);
        let mut r = [0.0; 2 * MAX_DIM];
        for i in 0..2 * d {
            r[i] = x[i] - v[i];
        }
        self.metric.norm_sq(&r).max(0.0).sqrt()
    }

    /// Lattice vector closest to `w` in the flat metric.
    pub fn nearest_translate_flat(&self, w: &CPoint) -> CPoint {
        let d = self.dim();
        let (_, v) = self.metric.closest(&to_real(d, w));
        from_real(d, &v)
    }

    fn compute_diameter(&self) -> f64 {
        let d = self.dim();
        let n = 2 * d;
        let per_axis: usize = if d == 1 { 64 } else { 12 };
        let total = per_axis.pow(n as u32);
        let dist_at = |t: &[f64]| self.distance(&self.lattice.point_from_coords(t), &ORIGIN);
        let mut best = 0.0;
        let mut best_t = [0.0; 2 * MAX_DIM];
        for code in 0..total {
            let mut c = code;
            let mut t = [0.0; 2 * MAX_DIM];
            for ti in t.iter_mut().take(n) {
                *ti = (c % per_axis) as f64 / per_axis as f64;
                c /= per_axis;
            }
            let v = dist_at(&t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        // Pattern search around the best grid point; the distance-to-origin
        // function is piecewise smooth so this converges to the local maximum.
        let mut step = 0.5 / per_axis as f64;
        while step > 1e-10 {
            let mut improved = false;
            for i in 0..n {
                for s in [-1.0, 1.0] {
                    let mut t = best_t;
                    t[i] += s * step;
                    let v = dist_at(&t);
                    if v > best + 1e-15 {
                        best = v;
                        best_t = t;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }
}

/// Fourier branch of a real character on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    Cos,
    Sin,
}

/// One member `eta_j` of the dense family of test forms:
/// `chi_m(p) * (i/2) sum c_ab dz_a ^ dzbar_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestForm {
    /// 1-based position in the enumeration; `eta_1` is the mass form `omega`.
    pub index: usize,
    /// Integer mode against the generator coordinates (length `2d`).
    pub mode: Vec<i64>,
    pub branch: Branch,
    pub matrix_index: usize,
    pub matrix: HMatrix,
}

impl TestForm {
    pub fn is_mass(&self) -> bool {
        self.index == 1
    }

    /// `chi_m(p)`.
    pub fn character(&self, p: &CPoint, torus: &LatticeTorus) -> f64 {
        let t = torus.lattice.fractional_coords(p);
        let phase: f64 = 2.0 * PI * self.mode.iter().zip(t.iter()).map(|(&m, &ti)| m as f64 * ti).sum::<f64>();
        match self.branch {
            Branch::Cos => phase.cos(),
            Branch::Sin => phase.sin(),
        }
    }

    /// Mode label used in CSV output, e.g. `cos(0,1)[0]`.
    pub fn label(&self) -> String {
        let b = match self.branch {
            Branch::Cos => "cos",
            Branch::Sin => "sin",
        };
        let m: Vec<String> = self.mode.iter().map(|m| m.to_string()).collect();
        format!("{b}({})[{}]", m.join(" "), self.matrix_index)
    }
}

/// Matrix factor of the test form value at `p`.
pub fn test_form_value(form: &TestForm, p: &CPoint, torus: &LatticeTorus) -> HMatrix {
    let chi = form.character(p, torus);
    let mut out = form.matrix;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= chi;
        }
    }
    out
}

fn elementary_matrices(torus: &LatticeTorus) -> Vec<HMatrix> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match torus.dim() {
        1 => vec![torus.hermitian],
        _ => vec![
            torus.hermitian,
            [[zero, zero], [zero, one]],
            [[zero, one], [one, zero]],
            [[zero, i], [-i, zero]],
        ],
    }
}

/// Modes of total degree `deg` with first nonzero coordinate positive, in
/// lexicographic order.
fn half_space_modes(n: usize, deg: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; n];
    fn rec(i: usize, remaining: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        let n = cur.len();
        if i == n {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for v in -remaining..=remaining {
            cur[i] = v;
            rec(i + 1, remaining - v.abs(), cur, out);
        }
        cur[i] = 0;
    }
    rec(0, deg, &mut cur, &mut out);
    out.retain(|m| m.iter().find(|&&v| v != 0).map_or(deg == 0, |&v| v > 0));
    out.sort();
    out
}

fn branches_for(mode: &[i64]) -> &'static [Branch] {
    if mode.iter().all(|&m| m == 0) {
        &[Branch::Cos]
    } else {
        &[Branch::Cos, Branch::Sin]
    }
}

/// The first `count` test forms `eta_1, ..., eta_count`.
pub fn test_forms(torus: &LatticeTorus, count: usize) -> Vec<TestForm> {
    let mats = elementary_matrices(torus);
    let n = 2 * torus.dim();
    let mut out = Vec::with_capacity(count);
    let mut deg = 0;
    while out.len() < count {
        for mode in half_space_modes(n, deg) {
            for &branch in branches_for(&mode) {
                for (mi, m) in mats.iter().enumerate() {
                    if out.len() == count {
                        return out;
                    }
                    out.push(TestForm {
                        index: out.len() + 1,
                        mode: mode.clone(),
                        branch,
                        matrix_index: mi,
                        matrix: *m,
                    });
                }
            }
        }
        deg += 1;
    }
    out
}

/// Inverse of the enumeration: position of `(mode, branch, matrix_index)`.
pub fn test_form_index(torus: &LatticeTorus, mode: &[i64], branch: Branch, matrix_index: usize) -> Option<usize> {
    let n = 2 * torus.dim();
    let n_mat = elementary_matrices(torus).len();
    if mode.len() != n || matrix_index >= n_mat {
        return None;
    }
    let deg: i64 = mode.iter().map(|m| m.abs()).sum();
    let mut index = 1;
    for lower in 0..deg {
        index += half_space_modes(n, lower)
            .iter()
            .map(|m| branches_for(m).len() * n_mat)
            .sum::<usize>();
    }
    for m in half_space_modes(n, deg) {
        let bs = branches_for(&m);
        if m == mode {
            let bpos = bs.iter().position(|&b| b == branch)?;
            return Some(index + bpos * n_mat + matrix_index);
        }
        index += bs.len() * n_mat;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> CPoint {
        cpoint(&[Complex64::new(re, im)])
    }

    #[test]
    fn wraparound_distance() {
        let t = LatticeTorus::unit_square();
        assert_abs_diff_eq!(t.distance(&c(0.9, 0.0), &ORIGIN), 0.1, epsilon = 1e-14);
        assert_eq!(t.distance(&c(0.3, 0.7), &c(0.3, 0.7)), 0.0);
        assert_abs_diff_eq!(t.distance(&c(0.5, 0.5), &ORIGIN), 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn diameter_of_unit_square() {
        let t = LatticeTorus::unit_square();
        assert_abs_diff_eq!(t.diameter(), 0.5f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn nearest_translate_examples() {
        let l = Lattice::square();
        let (k, v) = l.nearest_translate(&c(7.3, 0.4));
        assert_eq!(k, vec![7, 0]);
        assert_abs_diff_eq!(v[0].re, 7.0, epsilon = 1e-14);
        assert_eq!(l.nearest_translate(&ORIGIN).0, vec![0, 0]);
        assert_eq!(l.nearest_translate(&c(0.5, 0.0)).0, vec![0, 0]);
        assert_eq!(l.nearest_translate(&c(7.5, 0.0)).0, vec![7, 0]);
    }

    #[test]
    fn skewed_lattice_is_reduced() {
        // Generators 1 and 7 + i span Z + iZ.
        let l = Lattice::new(1, vec![c(1.0, 0.0), c(7.0, 1.0)]).unwrap();
        let (_, v) = l.nearest_translate(&c(3.2, 0.1));
        assert_abs_diff_eq!(v[0].re, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_generators_rejected() {
        assert!(Lattice::new(1, vec![c(1.0, 0.0), c(2.0, 0.0)]).is_err());
    }

    #[test]
    fn mass_form_and_character_values() {
        let t = LatticeTorus::unit_square();
        let forms = test_forms(&t, 8);
        assert!(forms[0].mode.iter().all(|&m| m == 0));
        assert_eq!(test_form_value(&forms[0], &c(0.3, 0.1), &t), identity_matrix(1));
        let cos_x = forms.iter().find(|f| f.mode == vec![1, 0] && f.branch == Branch::Cos).unwrap();
        assert_abs_diff_eq!(cos_x.character(&c(0.25, 0.0), &t), 0.0, epsilon = 1e-15);
        let p = c(0.37, -0.21);
        let q = c(1.37, -0.21);
        for f in &forms {
            assert_abs_diff_eq!(f.character(&p, &t), f.character(&q, &t), epsilon = 1e-14);
        }
    }

    #[test]
    fn enumeration_inverts() {
        for torus in [LatticeTorus::unit_square(), two_torus()] {
            let forms = test_forms(&torus, 100);
            for f in &forms {
                assert_eq!(test_form_index(&torus, &f.mode, f.branch, f.matrix_index), Some(f.index));
            }
        }
    }

    fn two_torus() -> LatticeTorus {
        static T: std::sync::OnceLock<LatticeTorus> = std::sync::OnceLock::new();
        T.get_or_init(build_two_torus).clone()
    }

    fn build_two_torus() -> LatticeTorus {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        let gens = vec![cpoint(&[one, z]), cpoint(&[i, z]), cpoint(&[z, one]), cpoint(&[0.3 * one, i])];
        LatticeTorus::new(Lattice::new(2, gens).unwrap(), identity_matrix(2)).unwrap()
    }

    #[test]
    fn two_torus_distance_is_sane() {
        let t = two_torus();
        assert!(t.diameter() > 0.5 && t.diameter() < 1.5, "diameter {}", t.diameter());
        let p = cpoint(&[Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.0)]);
        assert_abs_diff_eq!(t.distance(&p, &ORIGIN), 0.1, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn distance_bounded_by_diameter(a in -5.0..5.0f64, b in -5.0..5.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
            let t = LatticeTorus::unit_square();
            prop_assert!(t.distance(&c(a, b), &c(x, y)) <= t.diameter() + 1e-12);
        }

        #[test]
        fn triangle_inequality(p in prop::array::uniform6(-3.0..3.0f64)) {
            let t = two_torus();
            let pt = |i: usize| cpoint(&[Complex64::new(p[i], p[i + 1]), Complex64::new(p[(i + 2) % 6], p[(i + 3) % 6])]);
            let (a, b, s) = (pt(0), pt(2), pt(4));
            prop_assert!(t.distance(&a, &b) + t.distance(&b, &s) >= t.distance(&a, &s) - 1e-12);
            prop_assert!((t.distance(&a, &b) - t.distance(&b, &a)).abs() < 1e-12);
        }
    }
}
