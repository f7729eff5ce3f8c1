//! Holomorphic discs `D(c, r) -> C^d / L` represented by polynomial lifts.
//!
//! Coefficients are stored in the scaled variable `u = (z - c) / r`, so a lift
//! is `P(z) = sum_j a_j u^j`. Keeping `|u| <= 1` on the disc keeps Horner
//! evaluation well conditioned at the large degrees produced by `k_fold`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::{CPoint, MAX_DIM, ORIGIN};

pub const DEFAULT_DEGREE_CAP: usize = 4096;

/// Anything that can be evaluated together with its complex derivative.
pub trait HoloMap: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: Complex64) -> (CPoint, CPoint);

    /// Second complex derivative. The default reads the first Taylor
    /// coefficient of the derivative off a small circle around `z`.
    fn second_derivative(&self, z: Complex64) -> CPoint {
        const N: usize = 16;
        const R: f64 = 1e-2;
        let mut out = ORIGIN;
        for k in 0..N {
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / N as f64);
            let (_, d) = self.eval(z + R * w);
            for a in 0..self.dim() {
                out[a] += d[a] / (R * w * N as f64);
            }
        }
        out
    }

    /// The polynomial representation, when the map is a [`LiftedDisc`].
    fn as_lifted(&self) -> Option<&LiftedDisc> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedDisc {
    center: Complex64,
    radius: f64,
    dim: usize,
    /// `coeffs[a][j]`: coefficient of `u^j` in coordinate `a`.
    coeffs: Vec<Vec<Complex64>>,
    degree_cap: usize,
}

impl LiftedDisc {
    /// Builds a disc from coefficients in the scaled variable `(z - c) / r`.
    pub fn from_scaled(center: Complex64, radius: f64, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("disc radius {radius} must be positive")));
        }
        let dim = coeffs.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidParameter(format!("lift has {dim} coordinates")));
        }
        if !center.re.is_finite() || !center.im.is_finite() {
            return Err(Error::InvalidParameter("disc center is not finite".into()));
        }
        let len = coeffs.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut coeffs = coeffs;
        for c in coeffs.iter_mut() {
            if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::InvalidParameter("lift coefficient is not finite".into()));
            }
            c.resize(len, Complex64::new(0.0, 0.0));
        }
        let mut disc = LiftedDisc { center, radius, dim, coeffs, degree_cap: DEFAULT_DEGREE_CAP };
        disc.trim();
        Ok(disc)
    }

    /// Builds a disc from ordinary coefficients of powers of `(z - c)`.
    pub fn from_monomials(center: Complex64, radius: f64, monomials: Vec<Vec<Complex64>>) -> Result<Self> {
        let scaled = monomials
            .into_iter()
            .map(|c| {
                let mut s = 1.0;
                c.into_iter()
                    .map(|b| {
                        let v = b * s;
                        s *= radius;
                        v
                    })
                    .collect()
            })
            .collect();
        Self::from_scaled(center, radius, scaled)
    }

    /// The scalar lift `z -> z` on `D(0, r)`.
    pub fn identity(radius: f64) -> Self {
        Self::from_monomials(Complex64::new(0.0, 0.0), radius, vec![vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]])
            .expect("identity disc")
    }

    /// Scalar monomial lift `z -> a z^k` on `D(0, r)`.
    pub fn monomial(radius: f64, a: Complex64, k: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); k + 1];
        c[k] = a;
        Self::from_monomials(Complex64::new(0.0, 0.0), radius, vec![c]).expect("monomial disc")
    }

    pub fn constant(center: Complex64, radius: f64, value: CPoint, dim: usize) -> Result<Self> {
        Self::from_scaled(center, radius, (0..dim).map(|a| vec![value[a]]).collect())
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    fn trim(&mut self) {
        let mut len = self.coeffs[0].len();
        while len > 1 && self.coeffs.iter().all(|c| c[len - 1] == Complex64::new(0.0, 0.0)) {
            len -= 1;
        }
        for c in self.coeffs.iter_mut() {
            c.truncate(len);
        }
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    /// Highest index whose (derivative-weighted) coefficient is not negligible
    /// relative to the whole lift.
    pub fn effective_degree(&self) -> usize {
        let total: f64 = self
            .coeffs
            .iter()
            .flat_map(|c| c.iter().enumerate().map(|(j, v)| (j.max(1) as f64) * v.norm()))
            .sum();
        let mut eff = 0;
        for c in &self.coeffs {
            for (j, v) in c.iter().enumerate() {
                if (j.max(1) as f64) * v.norm() > 1e-17 * total {
                    eff = eff.max(j);
                }
            }
        }
        eff
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn scaled_coeffs(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    pub fn scaled_coeffs_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.coeffs
    }

    /// Ordinary coefficients of powers of `(z - c)`.
    pub fn monomial_coeffs(&self) -> Vec<Vec<Complex64>> {
        self.coeffs
            .iter()
            .map(|c| {
                let mut s = 1.0;
                c.iter()
                    .map(|a| {
                        let v = a / s;
                        s *= self.radius;
                        v
                    })
                    .collect()
            })
            .collect()
    }

    /// Value and derivative at `u = (z - c) / r`; the derivative is `dP/dz`.
    #[inline]
    pub fn eval_scaled(&self, u: Complex64) -> (CPoint, CPoint) {
        let mut p = ORIGIN;
        let mut dp = ORIGIN;
        for (a, c) in self.coeffs.iter().enumerate() {
            let mut v = Complex64::new(0.0, 0.0);
            let mut dv = Complex64::new(0.0, 0.0);
            for &coef in c.iter().rev() {
                dv = dv * u + v;
                v = v * u + coef;
            }
            p[a] = v;
            dp[a] = dv / self.radius;
        }
        (p, dp)
    }

    pub fn eval_with_derivative(&self, points: &[Complex64]) -> Vec<(CPoint, CPoint)> {
        points.iter().map(|&z| HoloMap::eval(self, z)).collect()
    }

    /// `z -> P(r z)` on the unit disc; the disc must be centred at 0.
    pub fn rescale_to_unit(&self) -> Result<Self> {
        if self.center.norm() > 0.0 {
            return Err(Error::InvalidParameter("rescale_to_unit needs a disc centred at 0".into()));
        }
        let mut out = self.clone();
        out.radius = 1.0;
        Ok(out)
    }

    /// `z -> P((z - c)^k)` on `D(c, 1)`; the input must be the unit disc at 0.
    pub fn k_fold(&self, k: usize, c: Complex64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter(format!("k_fold needs k >= 1, got {k}")));
        }
        if self.center.norm() > 0.0 || self.radius != 1.0 {
            return Err(Error::InvalidParameter("k_fold needs the unit disc centred at 0".into()));
        }
        let degree = self.degree() * k;
        if degree > self.degree_cap {
            return Err(Error::DegreeCapExceeded {
                cap: self.degree_cap,
                context: format!("k_fold with k = {k} needs degree {degree}"),
                best: None,
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|src| {
                let mut dst = vec![Complex64::new(0.0, 0.0); degree + 1];
                for (j, &v) in src.iter().enumerate() {
                    dst[j * k] = v;
                }
                dst
            })
            .collect();
        Ok(LiftedDisc { center: c, radius: 1.0, dim: self.dim, coeffs, degree_cap: self.degree_cap })
    }

    /// `z -> P(c + (1 - delta)(z - c))` on the same domain.
    pub fn dilate(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("dilate needs delta in (0,1), got {delta}")));
        }
        Ok(self.rescaled(1.0 - delta))
    }

    /// Same lift on the concentric disc of radius `radius`.
    pub fn restrict(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("restriction radius {radius} must be positive")));
        }
        let mut out = self.rescaled(radius / self.radius);
        out.radius = radius;
        Ok(out)
    }

    fn rescaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            let mut f = 1.0;
            for v in c.iter_mut() {
                *v *= f;
                f *= s;
            }
        }
        out.trim();
        out
    }

    /// Lift shifted by a constant vector (for example a lattice translate).
    pub fn translated(&self, shift: &CPoint) -> Self {
        let mut out = self.clone();
        for (a, c) in out.coeffs.iter_mut().enumerate() {
            c[0] += shift[a];
        }
        out
    }
}

impl HoloMap for LiftedDisc {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn eval(&self, z: Complex64) -> (CPoint, CPoint) {
        self.eval_scaled((z - self.center) / self.radius)
    }

    fn second_derivative(&self, z: Complex64) -> CPoint {
        let u = (z - self.center) / self.radius;
        let mut out = ORIGIN;
        for (a, c) in self.coeffs.iter().enumerate() {
            let (mut v, mut d, mut dd) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &coef in c.iter().rev() {
                dd = dd * u + 2.0 * d;
                d = d * u + v;
                v = v * u + coef;
            }
            out[a] = dd / (self.radius * self.radius);
        }
        out
    }

    fn as_lifted(&self) -> Option<&LiftedDisc> {
        Some(self)
    }
}

/// `outer ∘ inner` for a scalar `inner`.
pub struct Composite<'a, A: HoloMap + ?Sized, B: HoloMap + ?Sized> {
    pub outer: &'a A,
    pub inner: &'a B,
}

impl<A: HoloMap + ?Sized, B: HoloMap + ?Sized> HoloMap for Composite<'_, A, B> {
    fn dim(&self) -> usize {
        self.outer.dim()
    }

    fn eval(&self, z: Complex64) -> (CPoint, CPoint) {
        let (w, dw) = self.inner.eval(z);
        let (v, dv) = self.outer.eval(w[0]);
        let mut d = ORIGIN;
        for a in 0..self.outer.dim() {
            d[a] = dv[a] * dw[0];
        }
        (v, d)
    }
}

/// Wraps a closure `z -> (value, derivative)` as a [`HoloMap`].
pub struct FnMap<F: Fn(Complex64) -> (CPoint, CPoint) + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(Complex64) -> (CPoint, CPoint) + Sync> HoloMap for FnMap<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, z: Complex64) -> (CPoint, CPoint) {
        (self.f)(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn second_derivative_agrees_with_the_contour_default() {
        let d = LiftedDisc::from_monomials(c(1.0), 2.0, vec![vec![c(1.0), c(-2.0), Complex64::new(0.5, 1.0), c(3.0), c(0.25)]]).unwrap();
        let f = FnMap { dim: 1, f: |z: Complex64| d.eval(z) };
        for z in [c(0.0), Complex64::new(1.5, -0.7), c(3.0)] {
            let u = z - 1.0;
            // P(z) = 1 - 2u + (0.5+i)u^2 + 3u^3 + 0.25u^4 in u = z - 1
            let exact = 2.0 * Complex64::new(0.5, 1.0) + 18.0 * u + 3.0 * u * u;
            assert!((d.second_derivative(z)[0] - exact).norm() < 1e-12 * exact.norm().max(1.0));
            assert!((f.second_derivative(z)[0] - exact).norm() < 1e-9 * exact.norm().max(1.0));
        }
    }

    #[test]
    fn horner_examples() {
        let id = LiftedDisc::identity(3.0);
        let (v, d) = id.eval(c(2.0));
        assert_abs_diff_eq!(v[0].re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[0].re, 1.0, epsilon = 1e-15);

        let cube = LiftedDisc::monomial(1.0, c(1.0), 3);
        let (v, d) = cube.eval(c(1.0));
        assert_eq!((v[0], d[0]), (c(1.0), c(3.0)));
    }

    #[test]
    fn truncated_exponential() {
        let mut fact = 1.0;
        let mut coeffs = vec![c(1.0)];
        for k in 1..=10 {
            fact *= k as f64;
            coeffs.push(c(1.0 / fact));
        }
        let disc = LiftedDisc::from_monomials(c(0.0), 2.0, vec![coeffs]).unwrap();
        let (v, d) = disc.eval(c(1.0));
        // direct summation oracle
        let mut term = 1.0;
        let mut val = 1.0;
        let mut der = 0.0;
        for k in 1..=10 {
            der += term;
            term /= k as f64;
            val += term;
        }
        assert_abs_diff_eq!(v[0].re, val, epsilon = 1e-14);
        assert_abs_diff_eq!(d[0].re, der, epsilon = 1e-14);
        assert_abs_diff_eq!(v[0].re, std::f64::consts::E, epsilon = 1e-7);
    }

    #[test]
    fn reparametrization_examples() {
        let id2 = LiftedDisc::identity(2.0);
        let unit = id2.rescale_to_unit().unwrap();
        assert_eq!(unit.radius(), 1.0);
        assert_eq!(unit.monomial_coeffs()[0], vec![c(0.0), c(2.0)]);

        let folded = LiftedDisc::identity(1.0).k_fold(3, c(5.0)).unwrap();
        assert_eq!(folded.center(), c(5.0));
        assert_eq!(folded.degree(), 3);
        let (v, d) = folded.eval(c(5.5));
        assert_abs_diff_eq!(v[0].re, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(d[0].re, 0.75, epsilon = 1e-15);

        let sq = LiftedDisc::monomial(1.0, c(1.0), 2).dilate(0.5).unwrap();
        assert_eq!(sq.monomial_coeffs()[0], vec![c(0.0), c(0.0), c(0.25)]);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let id = LiftedDisc::identity(1.0);
        assert!(id.k_fold(0, c(0.0)).is_err());
        assert!(id.dilate(0.0).is_err());
        assert!(id.dilate(1.0).is_err());
        assert!(LiftedDisc::identity(2.0).k_fold(2, c(0.0)).is_err());
        assert!(LiftedDisc::from_scaled(c(0.0), -1.0, vec![vec![c(1.0)]]).is_err());
        assert!(matches!(
            id.with_degree_cap(8).k_fold(9, c(4.0)),
            Err(Error::DegreeCapExceeded { cap: 8, .. })
        ));
    }

    #[test]
    fn restriction_keeps_the_map() {
        let disc = LiftedDisc::from_monomials(c(0.5), 1.0, vec![vec![c(1.0), c(-2.0), Complex64::new(0.3, 1.0)]]).unwrap();
        let small = disc.restrict(0.25).unwrap();
        let z = Complex64::new(0.6, 0.1);
        let (a, da) = disc.eval(z);
        let (b, db) = small.eval(z);
        assert_abs_diff_eq!((a[0] - b[0]).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((da[0] - db[0]).norm(), 0.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn k_fold_is_precomposition(k in 1usize..9, re in -1.0..1.0f64, im in -1.0..1.0f64, a in -2.0..2.0f64) {
            let base = LiftedDisc::from_monomials(c(0.0), 1.0, vec![vec![c(a), c(1.0), Complex64::new(0.0, a)]]).unwrap();
            let folded = base.k_fold(k, c(6.0)).unwrap();
            let u = Complex64::new(re, im) * 0.7;
            let (v, _) = folded.eval(c(6.0) + u);
            let (w, _) = base.eval(u.powu(k as u32));
            prop_assert!((v[0] - w[0]).norm() < 1e-12);
        }
    }
}
