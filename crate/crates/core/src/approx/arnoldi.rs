//! Polynomials in a discrete-orthogonal basis built by Arnoldi iteration on the
//! sample points (Vandermonde with Arnoldi). The Hessenberg recurrence lets us
//! evaluate the fitted polynomial and its derivative anywhere without ever
//! forming monomial coefficients.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::disc::{HoloMap, LiftedDisc};
use crate::error::Result;
use crate::torus::{CPoint, ORIGIN};

/// The recurrence data: `u q_{k-1} = sum_{j<=k} H[j][k] q_j`, with `u = (z - center) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldiBasis {
    pub center: Complex64,
    pub scale: f64,
    /// `h[k]` holds the column `H[0..=k][k]` for `k = 1..=n` (`h[0]` unused).
    h: Vec<Vec<Complex64>>,
}

impl ArnoldiBasis {
    /// Orthogonalizes `1, u, ..., u^n` against the points; returns the basis
    /// and the sample matrix `Q` (columns of norm `sqrt(M)`).
    pub fn build(points: &[Complex64], center: Complex64, scale: f64, n: usize) -> (Self, DMatrix<Complex64>) {
        let m = points.len();
        let mf = m as f64;
        let u: Vec<Complex64> = points.iter().map(|&z| (z - center) / scale).collect();
        let mut q = DMatrix::<Complex64>::zeros(m, n + 1);
        q.column_mut(0).fill(Complex64::new(1.0, 0.0));
        let mut h = vec![Vec::new(); n + 1];
        for k in 1..=n {
            let mut v: Vec<Complex64> = (0..m).map(|i| u[i] * q[(i, k - 1)]).collect();
            let mut col = vec![Complex64::new(0.0, 0.0); k + 1];
            // classical Gram–Schmidt applied twice
            for _ in 0..2 {
                for j in 0..k {
                    let mut dot = Complex64::new(0.0, 0.0);
                    for i in 0..m {
                        dot += q[(i, j)].conj() * v[i];
                    }
                    let c = dot / mf;
                    col[j] += c;
                    for i in 0..m {
                        v[i] -= c * q[(i, j)];
                    }
                }
            }
            let norm = (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / mf).sqrt();
            col[k] = Complex64::new(norm, 0.0);
            for i in 0..m {
                q[(i, k)] = v[i] / norm;
            }
            h[k] = col;
        }
        (ArnoldiBasis { center, scale, h }, q)
    }

    pub fn degree(&self) -> usize {
        self.h.len() - 1
    }

    /// Truncation to degree `n`.
    pub fn truncated(&self, n: usize) -> Self {
        ArnoldiBasis { center: self.center, scale: self.scale, h: self.h[..=n.min(self.degree())].to_vec() }
    }

    /// Basis values and derivatives at `z`, written into `w` and `dw` (length `n + 1`).
    pub fn eval_into(&self, z: Complex64, w: &mut [Complex64], dw: &mut [Complex64]) {
        let n = self.degree();
        let u = (z - self.center) / self.scale;
        w[0] = Complex64::new(1.0, 0.0);
        dw[0] = Complex64::new(0.0, 0.0);
        for k in 1..=n {
            let col = &self.h[k];
            let mut v = u * w[k - 1];
            let mut dv = w[k - 1] / self.scale + u * dw[k - 1];
            for j in 0..k {
                v -= col[j] * w[j];
                dv -= col[j] * dw[j];
            }
            w[k] = v / col[k];
            dw[k] = dv / col[k];
        }
    }

    /// Sample matrices `(Q, Q')` at arbitrary points.
    pub fn sample(&self, points: &[Complex64]) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let n = self.degree();
        let mut q = DMatrix::zeros(points.len(), n + 1);
        let mut dq = DMatrix::zeros(points.len(), n + 1);
        let mut w = vec![Complex64::new(0.0, 0.0); n + 1];
        let mut dw = w.clone();
        for (i, &z) in points.iter().enumerate() {
            self.eval_into(z, &mut w, &mut dw);
            for k in 0..=n {
                q[(i, k)] = w[k];
                dq[(i, k)] = dw[k];
            }
        }
        (q, dq)
    }
}

/// A `C^d`-valued polynomial `sum_k c_k q_k(z)` in an Arnoldi basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldiPoly {
    pub basis: ArnoldiBasis,
    /// `coeffs[a]` has length `degree + 1`.
    pub coeffs: Vec<Vec<Complex64>>,
}

impl ArnoldiPoly {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Exact re-expansion as a lifted disc on `D(center, radius)`, through
    /// samples on the boundary circle.
    pub fn to_lifted(&self, center: Complex64, radius: f64) -> Result<LiftedDisc> {
        let n = self.degree();
        let len = (2 * (n + 1)).next_power_of_two().max(16);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let mut per_coord = vec![vec![Complex64::new(0.0, 0.0); len]; self.coeffs.len()];
        for k in 0..len {
            let th = 2.0 * PI * k as f64 / len as f64;
            let (v, _) = self.eval(center + radius * Complex64::new(th.cos(), th.sin()));
            for (a, buf) in per_coord.iter_mut().enumerate() {
                buf[k] = v[a];
            }
        }
        let coeffs = per_coord
            .into_iter()
            .map(|mut buf| {
                fft.process(&mut buf);
                buf.truncate(n + 1);
                buf.iter().map(|c| c / len as f64).collect()
            })
            .collect();
        LiftedDisc::from_scaled(center, radius, coeffs)
    }
}

impl HoloMap for ArnoldiPoly {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn eval(&self, z: Complex64) -> (CPoint, CPoint) {
        let n = self.degree();
        let mut w = vec![Complex64::new(0.0, 0.0); n + 1];
        let mut dw = w.clone();
        self.basis.eval_into(z, &mut w, &mut dw);
        let mut p = ORIGIN;
        let mut dp = ORIGIN;
        for (a, c) in self.coeffs.iter().enumerate() {
            for k in 0..=n {
                p[a] += c[k] * w[k];
                dp[a] += c[k] * dw[k];
            }
        }
        (p, dp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize, c: Complex64, r: f64) -> Vec<Complex64> {
        (0..n).map(|k| c + r * Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect()
    }

    #[test]
    fn columns_are_discretely_orthonormal() {
        let mut pts = circle(80, Complex64::new(0.0, 0.0), 1.0);
        pts.extend(circle(80, Complex64::new(4.0, 0.0), 1.0));
        let (basis, q) = ArnoldiBasis::build(&pts, Complex64::new(2.0, 0.0), 3.0, 40);
        let gram = q.adjoint() * &q / Complex64::new(pts.len() as f64, 0.0);
        for i in 0..=40 {
            for j in 0..=40 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).norm() < 1e-10, "gram({i},{j}) = {}", gram[(i, j)]);
            }
        }
        let (q2, _) = basis.sample(&pts);
        assert!((q2 - q).norm() < 1e-8);
    }

    #[test]
    fn derivative_recurrence_matches_differences() {
        let pts = circle(64, Complex64::new(0.0, 0.0), 1.0);
        let (basis, _) = ArnoldiBasis::build(&pts, Complex64::new(0.1, 0.0), 1.2, 12);
        let z = Complex64::new(0.3, -0.2);
        let h = 1e-6;
        let n = 13;
        let (mut w, mut dw) = (vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]);
        let (mut wp, mut wm) = (w.clone(), w.clone());
        let mut scratch = w.clone();
        basis.eval_into(z, &mut w, &mut dw);
        basis.eval_into(z + h, &mut wp, &mut scratch);
        basis.eval_into(z - h, &mut wm, &mut scratch);
        for k in 0..n {
            let fd = (wp[k] - wm[k]) / (2.0 * h);
            assert!((fd - dw[k]).norm() < 1e-6 * (1.0 + dw[k].norm()), "k = {k}");
        }
    }
}
