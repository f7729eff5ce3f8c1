use num_complex::Complex64;

/// Restarted GMRES with modified Gram–Schmidt. Returns the solution, the
/// number of matrix-vector products and the final relative residual.
pub fn gmres<F>(matvec: F, b: &[Complex64], tol: f64, restart: usize, max_iter: usize) -> (Vec<Complex64>, usize, f64)
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let norm = |v: &[Complex64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let bnorm = norm(b).max(1e-300);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut matvecs = 0;
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    let mut rel = 1.0;
    while matvecs < max_iter {
        matvec(&x, &mut ax);
        matvecs += 1;
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel < tol {
            break;
        }
        let m = restart.min(max_iter - matvecs + 1).max(1);
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![Complex64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![Complex64::new(0.0, 0.0); m];
        let mut sn = vec![Complex64::new(0.0, 0.0); m];
        let mut g = vec![Complex64::new(0.0, 0.0); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            matvec(&v[k], &mut w);
            matvecs += 1;
            for (j, vj) in v.iter().enumerate() {
                let dot: Complex64 = vj.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                h[j][k] = dot;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= dot * vi;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            // apply previous rotations
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = a / den;
            sn[k] = bb / den;
            h[k][k] = Complex64::new(den, 0.0);
            h[k + 1][k] = Complex64::new(0.0, 0.0);
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            rel = g[k + 1].norm() / bnorm;
            if rel < tol || wn == 0.0 || matvecs >= max_iter {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        // back substitution
        let mut y = vec![Complex64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
        if rel < tol {
            break;
        }
    }
    (x, matvecs, rel)
}
