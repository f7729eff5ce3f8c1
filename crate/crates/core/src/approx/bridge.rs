//! Almost-geodesic bridges: quintic Hermite paths joining two disc lifts along
//! a segment, matching value, slope and curvature at both junctions, after moving the second lift by the lattice vector that makes
//! the chord on the torus short.

use num_complex::Complex64;

use crate::disc::HoloMap;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;
use crate::torus::{CPoint, LatticeTorus, ORIGIN};

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeMap {
    pub q: Complex64,
    pub p: Complex64,
    /// Lattice vector subtracted from the second lift.
    pub lambda: CPoint,
    /// `coeffs[a][m]`: coefficient of `t^m`, `t = (z - q) / (p - q)`.
    pub coeffs: Vec<[Complex64; 6]>,
    pub arclength: f64,
    /// Flat distance between the projected endpoint images.
    pub chord: f64,
    /// Largest value/derivative mismatch at the two junctions.
    pub junction_residual: f64,
}

impl BridgeMap {
    /// Value and `d/dt` at parameter `t` (complex `t` gives the holomorphic
    /// extension off the segment).
    pub fn eval_t(&self, t: Complex64) -> (CPoint, CPoint) {
        let mut v = ORIGIN;
        let mut dv = ORIGIN;
        for (a, c) in self.coeffs.iter().enumerate() {
            let mut x = Complex64::new(0.0, 0.0);
            let mut dx = Complex64::new(0.0, 0.0);
            for &coef in c.iter().rev() {
                dx = dx * t + x;
                x = x * t + coef;
            }
            v[a] = x;
            dv[a] = dx;
        }
        (v, dv)
    }
}

impl HoloMap for BridgeMap {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn eval(&self, z: Complex64) -> (CPoint, CPoint) {
        let span = self.p - self.q;
        let (v, dv) = self.eval_t((z - self.q) / span);
        let mut d = ORIGIN;
        for a in 0..self.coeffs.len() {
            d[a] = dv[a] / span;
        }
        (v, d)
    }
}

fn quintic(v0: Complex64, d0: Complex64, a0: Complex64, v1: Complex64, d1: Complex64, a1: Complex64) -> [Complex64; 6] {
    // value, slope and curvature at both ends
    let dv = v1 - v0;
    [
        v0,
        d0,
        0.5 * a0,
        10.0 * dv - 6.0 * d0 - 4.0 * d1 - 1.5 * a0 + 0.5 * a1,
        -15.0 * dv + 8.0 * d0 + 7.0 * d1 + 1.5 * a0 - a1,
        6.0 * dv - 3.0 * d0 - 3.0 * d1 - 0.5 * a0 + 0.5 * a1,
    ]
}

/// Hermite bridge without the length check on the result.
pub fn hermite_bridge(
    piece1: &dyn HoloMap,
    piece2: &dyn HoloMap,
    q: Complex64,
    p: Complex64,
    torus: &LatticeTorus,
) -> Result<BridgeMap> {
    let d = torus.dim();
    if piece1.dim() != d || piece2.dim() != d {
        return Err(Error::InvalidParameter("bridge pieces do not match the torus dimension".into()));
    }
    if (p - q).norm() == 0.0 {
        return Err(Error::InvalidParameter("bridge segment is degenerate".into()));
    }
    let (v0, dz0) = piece1.eval(q);
    let (v1_raw, dz1) = piece2.eval(p);
    let mut diff = ORIGIN;
    for a in 0..d {
        diff[a] = v1_raw[a] - v0[a];
    }
    let (_, lambda) = torus.lattice().nearest_translate(&diff);
    let span = p - q;
    let (a0, a1) = (piece1.second_derivative(q), piece2.second_derivative(p));
    let mut coeffs = Vec::with_capacity(d);
    let mut v1 = ORIGIN;
    for a in 0..d {
        v1[a] = v1_raw[a] - lambda[a];
        let s2 = span * span;
        coeffs.push(quintic(v0[a], dz0[a] * span, a0[a] * s2, v1[a], dz1[a] * span, a1[a] * s2));
    }
    let mut bridge = BridgeMap {
        q,
        p,
        lambda,
        coeffs,
        arclength: 0.0,
        chord: torus.distance(&v0, &v1),
        junction_residual: 0.0,
    };
    bridge.arclength = (0..64)
        .map(|k| {
            gauss_legendre_on(16, k as f64 / 64.0, (k + 1) as f64 / 64.0)
                .into_iter()
                .map(|(t, w)| w * torus.norm(&bridge.eval_t(Complex64::new(t, 0.0)).1))
                .sum::<f64>()
        })
        .sum();
    let (b0, db0) = bridge.eval(q);
    let (b1, db1) = bridge.eval(p);
    let mut res: f64 = 0.0;
    for a in 0..d {
        res = res
            .max((b0[a] - v0[a]).norm())
            .max((db0[a] - dz0[a]).norm())
            .max((b1[a] - v1[a]).norm())
            .max((db1[a] - dz1[a]).norm());
    }
    bridge.junction_residual = res;
    Ok(bridge)
}

/// Bridge between `piece1` at `q` and `piece2` at `p`; fails when the image
/// is longer than `diam(X) + 1`.
pub fn build_bridge(
    piece1: &dyn HoloMap,
    piece2: &dyn HoloMap,
    q: Complex64,
    p: Complex64,
    torus: &LatticeTorus,
) -> Result<BridgeMap> {
    let bridge = hermite_bridge(piece1, piece2, q, p, torus)?;
    let bound = torus.diameter() + 1.0;
    if bridge.arclength > bound {
        return Err(Error::BridgeTooLong { length: bridge.arclength, bound });
    }
    Ok(bridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::LiftedDisc;
    use crate::torus::cpoint;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn constant_pieces_give_constant_path() {
        let t = LatticeTorus::unit_square();
        let a = LiftedDisc::constant(c(0.0), 1.0, cpoint(&[Complex64::new(0.2, 0.3)]), 1).unwrap();
        let b = LiftedDisc::constant(c(4.0), 1.0, cpoint(&[Complex64::new(0.2, 0.3)]), 1).unwrap();
        let br = build_bridge(&a, &b, c(1.0), c(3.0), &t).unwrap();
        assert!(br.arclength < 1e-15);
        assert!(br.junction_residual < 1e-12);
    }

    #[test]
    fn lattice_renormalization_shortens_chord() {
        let t = LatticeTorus::unit_square();
        let a = LiftedDisc::constant(c(0.0), 1.0, cpoint(&[c(0.0)]), 1).unwrap();
        let b = LiftedDisc::constant(c(4.0), 1.0, cpoint(&[c(7.5)]), 1).unwrap();
        let br = build_bridge(&a, &b, c(1.0), c(3.0), &t).unwrap();
        assert_eq!(br.lambda[0], c(7.0));
        assert!((br.arclength - 0.5).abs() < 1e-12);
        assert!(br.arclength <= t.diameter() + 0.5);
    }

    #[test]
    fn curvature_matches_at_both_junctions() {
        let t = LatticeTorus::unit_square();
        let a = LiftedDisc::identity(1.0);
        let b = LiftedDisc::from_monomials(c(4.0), 1.0, vec![vec![c(0.2), c(0.0), c(0.0), c(1.0)]]).unwrap();
        let br = hermite_bridge(&a, &b, c(1.0), c(3.0), &t).unwrap();
        assert!(br.junction_residual < 1e-12);
        let span = c(2.0);
        let at = |t: f64| {
            let cf = &br.coeffs[0];
            (2.0 * cf[2] + 6.0 * cf[3] * t + 12.0 * cf[4] * t * t + 20.0 * cf[5] * t * t * t) / (span * span)
        };
        assert!(at(0.0).norm() < 1e-12);
        assert!((at(1.0) - c(-6.0)).norm() < 1e-12);
    }

    #[test]
    fn random_ends_stay_near_the_chord() {
        use rand::{Rng, SeedableRng};
        let t = LatticeTorus::unit_square();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r = |s: f64| Complex64::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
        for _ in 0..20 {
            let a = LiftedDisc::from_monomials(c(0.0), 1.0, vec![vec![r(3.0), r(0.05), r(0.02)]]).unwrap();
            let b = LiftedDisc::from_monomials(c(4.0), 1.0, vec![vec![r(3.0), r(0.05), r(0.02)]]).unwrap();
            let br = build_bridge(&a, &b, c(1.0), c(3.0), &t).unwrap();
            // independent arclength from 10^4 chords along the path
            let n = 10_000;
            let pts: Vec<Complex64> = (0..=n).map(|k| br.eval_t(c(k as f64 / n as f64)).0[0]).collect();
            let polyline: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            assert!((polyline - br.arclength).abs() < 1e-6, "{polyline} {}", br.arclength);
            assert!(br.arclength <= br.chord + 0.5, "{} {}", br.arclength, br.chord);
        }
    }

    #[test]
    fn steep_ends_are_rejected() {
        let t = LatticeTorus::unit_square();
        let a = LiftedDisc::identity(1.0);
        let b = LiftedDisc::identity(1.0).k_fold(64, c(4.0)).unwrap();
        assert!(matches!(build_bridge(&a, &b, c(1.0), c(3.0), &t), Err(Error::BridgeTooLong { .. })));
    }
}
