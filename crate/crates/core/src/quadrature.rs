//! Gauss–Legendre rules and the tensor (radial Gauss × angular trapezoid) rule
//! on discs.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::disc::{HoloMap, LiftedDisc};
use crate::exec::Exec;
use crate::torus::{CPoint, ORIGIN};

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on the three-term recurrence.
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(&x, &w)| (mid + half * x, half * w)).collect()
}

/// Refinement policy for the disc tensor rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub n_radial: usize,
    pub n_angular: usize,
    pub max_radial: usize,
    pub max_angular: usize,
    /// Stop doubling once the relative change drops below this.
    pub rel_tol: f64,
    /// Changes above this at the cap are reported as non-convergence.
    pub fail_tol: f64,
    pub exec: Exec,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            n_radial: 16,
            n_angular: 64,
            max_radial: 4096,
            max_angular: 16384,
            rel_tol: 1e-9,
            fail_tol: 1e-6,
            exec: Exec::default(),
        }
    }
}

impl QuadratureGrid {
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Starting counts large enough to integrate `|P'|^2` exactly for a lift of
    /// the given degree.
    pub fn sized_for(&self, degree: usize) -> (usize, usize) {
        let nr = (degree + 8).max(self.n_radial).next_power_of_two().min(self.max_radial);
        let nt = (2 * degree + 32).max(self.n_angular).next_power_of_two().min(self.max_angular);
        (nr, nt)
    }

    /// Radial nodes `rho` in `[0, 1]` with weights including the `rho` Jacobian.
    pub fn radial(n: usize) -> Vec<(f64, f64)> {
        gauss_legendre_on(n, 0.0, 1.0).into_iter().map(|(r, w)| (r, w * r)).collect()
    }
}

/// Values and derivatives of a lift on a circle `|u| = rho` at `n` equispaced
/// angles, computed with one FFT per coordinate so the cost does not grow with
/// the product of degree and sample count.
pub struct CircleSampler {
    fft: Arc<dyn Fft<f64>>,
    n: usize,
}

impl CircleSampler {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        CircleSampler { fft: planner.plan_fft_inverse(n), n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Fills `out[k] = (P(c + r rho e^{i theta_k}), P'(...))`, `theta_k = 2 pi k / n`.
    pub fn sample(&self, disc: &LiftedDisc, rho: f64, out: &mut [(CPoint, CPoint)]) {
        let n = self.n;
        let mut vals = vec![Complex64::new(0.0, 0.0); n];
        let mut ders = vec![Complex64::new(0.0, 0.0); n];
        for o in out.iter_mut() {
            *o = (ORIGIN, ORIGIN);
        }
        for (a, coeffs) in disc.scaled_coeffs().iter().enumerate() {
            vals.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            ders.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let mut pw = 1.0;
            let mut pw_prev = 0.0;
            for (j, &c) in coeffs.iter().enumerate() {
                if j > 0 {
                    pw_prev = pw;
                    pw *= rho;
                }
                if pw == 0.0 && pw_prev == 0.0 {
                    break;
                }
                vals[j % n] += c * pw;
                if j > 0 {
                    ders[(j - 1) % n] += c * (j as f64 * pw_prev);
                }
            }
            self.fft.process(&mut vals);
            self.fft.process(&mut ders);
            let inv_r = 1.0 / disc.radius();
            for k in 0..n {
                out[k].0[a] = vals[k];
                out[k].1[a] = ders[k] * inv_r;
            }
        }
    }
}

/// One quadrature node of a planar region: position, weight (area element).
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub z: Complex64,
    pub weight: f64,
}

/// Tensor nodes of `D(c, r)` at the given counts, grouped by radius.
pub fn disc_nodes(center: Complex64, radius: f64, nr: usize, nt: usize) -> Vec<Node> {
    let mut out = Vec::with_capacity(nr * nt);
    let wt = 2.0 * PI / nt as f64;
    for (rho, w) in QuadratureGrid::radial(nr) {
        for k in 0..nt {
            let th = wt * k as f64;
            out.push(Node {
                z: center + radius * rho * Complex64::new(th.cos(), th.sin()),
                weight: w * wt * radius * radius,
            });
        }
    }
    out
}

/// Evaluates `map` at all nodes with the given policy.
pub fn sample_map(map: &dyn HoloMap, zs: &[Complex64], exec: Exec) -> Vec<(CPoint, CPoint)> {
    exec.map_slice(zs, |&z| map.eval(z))
}
