//! One inductive step `F_n -> F_{n+1}`: the five tricks, each recording its
//! measured inequalities in the ledger.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ledger::VerificationLedger;
use crate::approx::{build_bridge, mergelyan_c1_fit_until, ArnoldiPoly, BridgeMap, FitOptions};
use crate::conformal::{riemann_map, ConformalOptions};
use crate::current::{admissible_set_functionals, evaluate_disc, CurrentEvaluation, SetPieces};
use crate::disc::{HoloMap, LiftedDisc};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::AdmissibleSetGeometry;
use crate::quadrature::QuadratureGrid;
use crate::torus::{HMatrix, LatticeTorus, TestForm, ORIGIN};

/// Numerical knobs of the construction.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub torus: LatticeTorus,
    pub catalog: Vec<LiftedDisc>,
    pub stages: usize,
    /// Number of test forms `J` in the target evaluations.
    pub forms: usize,
    pub grid: QuadratureGrid,
    /// Degree cap of the lifts (bounds `k` through `k_fold`).
    pub degree_cap: usize,
    pub fit_degree_cap: usize,
    /// Degree cap of the boundary Fourier refit of `h ∘ phi`.
    pub mu_degree_cap: usize,
    /// Distance between `D_{R_{n+1}}` and `D(c_{n+1}, 1)`.
    pub gap: f64,
    pub k_max: usize,
    pub neck_w0: f64,
    pub neck_floor: f64,
    pub delta0: f64,
    pub delta_floor: f64,
    pub boundary_nodes: usize,
    pub probes: usize,
    pub max_halvings: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let one = Complex64::new(1.0, 0.0);
        PipelineConfig {
            torus: LatticeTorus::unit_square(),
            catalog: vec![
                LiftedDisc::identity(1.0),
                LiftedDisc::monomial(1.0, one, 2),
                LiftedDisc::monomial(1.0, 3.0 * one, 1),
            ],
            stages: 4,
            forms: 32,
            grid: QuadratureGrid::default(),
            degree_cap: 4096,
            fit_degree_cap: 512,
            mu_degree_cap: 2048,
            gap: 0.1,
            k_max: 4096,
            neck_w0: 0.4,
            neck_floor: 1e-3,
            delta0: 0.1,
            delta_floor: 1e-8,
            boundary_nodes: 2048,
            probes: 8,
            max_halvings: 10,
            seed: 1,
            exec: Exec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stages", self.stages as f64),
            ("forms", self.forms as f64),
            ("degree_cap", self.degree_cap as f64),
            ("fit_degree_cap", self.fit_degree_cap as f64),
            ("mu_degree_cap", self.mu_degree_cap as f64),
            ("gap", self.gap),
            ("k_max", self.k_max as f64),
            ("neck_w0", self.neck_w0),
            ("neck_floor", self.neck_floor),
            ("delta0", self.delta0),
            ("delta_floor", self.delta_floor),
            ("boundary_nodes", self.boundary_nodes as f64),
            ("probes", self.probes as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.catalog.is_empty() {
            return Err(Error::InvalidParameter("catalog is empty".into()));
        }
        for (i, d) in self.catalog.iter().enumerate() {
            if d.center().norm() > 0.0 {
                return Err(Error::InvalidParameter(format!("catalog disc {i} must be centred at 0")));
            }
            if d.dim() != self.torus.dim() {
                return Err(Error::InvalidParameter(format!("catalog disc {i} does not match the torus dimension")));
            }
        }
        if self.delta0 >= 1.0 {
            return Err(Error::InvalidParameter("delta0 must be below 1".into()));
        }
        Ok(())
    }
}

/// Intermediate objects of the step in progress.
#[derive(Debug, Clone, Default)]
pub struct StageScratch {
    pub epsilon_next: Option<f64>,
    /// `G_{n+1}`.
    pub extended: Option<LiftedDisc>,
    pub c_next: Option<f64>,
    /// `L_{n+1} = [q, p]`.
    pub segment: Option<(f64, f64)>,
    pub k: Option<usize>,
    /// `g~_{n+1,k}` on `D(c_{n+1}, 1)`.
    pub folded: Option<LiftedDisc>,
    pub bridge: Option<BridgeMap>,
    pub h: Option<ArnoldiPoly>,
    pub neck_width: Option<f64>,
    pub mu: Option<LiftedDisc>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StageState {
    pub n: usize,
    /// `R_n`.
    pub radius: f64,
    /// `epsilon_n`.
    pub epsilon: f64,
    /// `m_n`, with `U'_n = D_{R_n + m_n}`.
    pub margin: f64,
    /// `F_n` on `D_{R_n}`.
    pub f: LiftedDisc,
    pub scratch: StageScratch,
}

impl StageState {
    /// `R_1 = r_1`, `epsilon_1 = 1`, `F_1 = g_1`.
    pub fn base(g1: &LiftedDisc) -> Self {
        let r = g1.radius();
        StageState { n: 1, radius: r, epsilon: 1.0, margin: r / 4.0, f: g1.clone(), scratch: StageScratch::default() }
    }

    pub fn u_prime_radius(&self) -> f64 {
        self.radius + self.margin
    }

    fn bound(&self) -> f64 {
        0.5f64.powi(self.n as i32 + 1)
    }

    fn eps_next(&self) -> Result<f64> {
        self.scratch
            .epsilon_next
            .ok_or_else(|| Error::InvalidParameter("the error bound of the next stage is not set".into()))
    }
}

/// Sample points of the closed disc `D_r`: a 64 x 64 grid plus 256 boundary points.
pub fn disc_samples(r: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(64 * 64 + 256);
    for i in 0..64 {
        for j in 0..64 {
            let z = Complex64::new(-r + 2.0 * r * (i as f64 + 0.5) / 64.0, -r + 2.0 * r * (j as f64 + 0.5) / 64.0);
            if z.norm() <= r {
                out.push(z);
            }
        }
    }
    for k in 0..256 {
        out.push(Complex64::from_polar(r, 2.0 * PI * k as f64 / 256.0));
    }
    out
}

/// `sup d_X(a, b)` over [`disc_samples`] of `D_r`.
pub fn sup_distance(a: &dyn HoloMap, b: &dyn HoloMap, r: f64, torus: &LatticeTorus, exec: Exec) -> f64 {
    let pts = disc_samples(r);
    exec.map_slice(&pts, |&z| torus.distance(&a.eval(z).0, &b.eval(z).0)).into_iter().fold(0.0, f64::max)
}

fn spectral_norm(m: &HMatrix, d: usize) -> f64 {
    if d == 1 {
        return m[0][0].norm();
    }
    let (a, b, c) = (m[0][0].re, m[0][1], m[1][1].re);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c).powi(2) + b.norm_sqr()).sqrt();
    (mid + rad).abs().max((mid - rad).abs())
}

fn smallest_eigenvalue(m: &HMatrix, d: usize) -> f64 {
    if d == 1 {
        return m[0][0].re;
    }
    let (a, b, c) = (m[0][0].re, m[0][1], m[1][1].re);
    0.5 * (a + c) - (0.25 * (a - c).powi(2) + b.norm_sqr()).sqrt()
}

/// Lipschitz constant of the character of `form` with respect to the flat metric.
fn character_lipschitz(form: &TestForm, torus: &LatticeTorus) -> f64 {
    let d = torus.dim();
    let mut grad_sq = 0.0;
    for a in 0..d {
        for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let mut e = ORIGIN;
            e[a] = unit;
            let t = torus.lattice().fractional_coords(&e);
            let g: f64 = form.mode.iter().zip(t.iter()).map(|(&m, &tk)| m as f64 * tk).sum();
            grad_sq += g * g;
        }
    }
    2.0 * PI * grad_sq.sqrt() / smallest_eigenvalue(torus.hermitian(), d).sqrt()
}

/// First-order sensitivity of the ratio and the pairings of `F_n` on `D_R` to
/// a perturbation of C¹ size `eta`: returns `(derivative part, value part)` so
/// that each functional moves by at most `(L_d |p'| + L_v |p|)`.
fn functional_lipschitz(e: &CurrentEvaluation, forms: &[TestForm], radius: f64, torus: &LatticeTorus) -> (f64, f64) {
    let a = e.area;
    let len = e.boundary_length;
    // ∫|f'| <= sqrt(pi R^2 A)
    let s = (PI * radius * radius * a).sqrt();
    let mut ld = 2.0 * PI * radius / a + len * 2.0 * s / (a * a);
    let mut lv: f64 = 0.0;
    let lmin = smallest_eigenvalue(torus.hermitian(), torus.dim());
    for (j, form) in forms.iter().enumerate() {
        let mnorm = if form.matrix_index == 0 { 1.0 } else { spectral_norm(&form.matrix, torus.dim()) / lmin };
        let lchi = if form.is_mass() { 0.0 } else { character_lipschitz(form, torus) };
        ld = ld.max(mnorm * 2.0 * s / a + e.pairings[j].abs() * 2.0 * s / a);
        lv = lv.max(mnorm * lchi);
    }
    (ld, lv)
}

/// `F + (size) a (z / R')^q` on the disc of `F`.
fn perturbed(f: &LiftedDisc, size: f64, rng: &mut ChaCha8Rng, u_prime: f64, torus: &LatticeTorus) -> Result<LiftedDisc> {
    let q = rng.gen_range(0..=8usize);
    let d = f.dim();
    let mut dir = ORIGIN;
    for v in dir.iter_mut().take(d) {
        *v = Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>()) * rng.gen_range(0.5..1.0);
    }
    let norm = torus.norm(&dir);
    let scale = size / norm * (f.radius() / u_prime).powi(q as i32);
    let mut coeffs = f.scaled_coeffs().to_vec();
    for (a, c) in coeffs.iter_mut().enumerate() {
        if c.len() <= q {
            c.resize(q + 1, Complex64::new(0.0, 0.0));
        }
        c[q] += dir[a] * scale;
    }
    LiftedDisc::from_scaled(f.center(), f.radius(), coeffs)
}

/// Trick 1: the error bound `epsilon_{n+1}` that keeps the ratio and the
/// first `n` pairings of `F_n` within `2^{-n}`.
pub fn trick1_error_bound(
    cfg: &PipelineConfig,
    state: &mut StageState,
    forms: &[TestForm],
    ledger: &mut VerificationLedger,
) -> Result<f64> {
    let torus = &cfg.torus;
    let n = state.n;
    let forms = &forms[..n.min(forms.len())];
    let base = evaluate_disc(&state.f, torus, forms, &cfg.grid)?;
    let (ld, lv) = functional_lipschitz(&base, forms, state.radius, torus);
    let cauchy = 1.0 / state.margin;
    let lip = ld + lv / cauchy;
    let target = 0.5f64.powi(n as i32);
    // strictly below epsilon_n / 2
    let mut eps = (0.99 * state.epsilon / 2.0).min(target / (4.0 * lip * cauchy));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(n as u64)));
    let mut halvings = 0;
    loop {
        let mut worst_ratio: f64 = 0.0;
        let mut worst_pair: f64 = 0.0;
        for _ in 0..cfg.probes {
            let p = perturbed(&state.f, eps / 2.0, &mut rng, state.u_prime_radius(), torus)?;
            let e = evaluate_disc(&p, torus, forms, &cfg.grid)?;
            let (dr, dp) = e.proximity(&base, forms.len());
            worst_ratio = worst_ratio.max(dr);
            worst_pair = worst_pair.max(dp);
        }
        if worst_ratio < target && worst_pair < target {
            ledger.record(n + 1, "t1.eps_halving", eps, state.epsilon / 2.0);
            ledger.record(n + 1, "t1.probe_ratio", worst_ratio, target);
            ledger.record(n + 1, "t1.probe_pairings", worst_pair, target);
            state.scratch.epsilon_next = Some(eps);
            return Ok(eps);
        }
        if halvings == cfg.max_halvings {
            ledger.record(n + 1, "t1.probe_ratio", worst_ratio, target);
            ledger.record(n + 1, "t1.probe_pairings", worst_pair, target);
            return Err(Error::ProbeFailed { halvings });
        }
        eps /= 2.0;
        halvings += 1;
    }
}

/// Trick 2: `G_{n+1} = F_n` on `D_{2 R_n}` (polynomial lifts are entire).
pub fn trick2_extend(cfg: &PipelineConfig, state: &mut StageState, ledger: &mut VerificationLedger) -> Result<LiftedDisc> {
    let eps = state.eps_next()?;
    let g = state.f.restrict(2.0 * state.radius)?;
    let err = sup_distance(&g, &state.f, state.u_prime_radius(), &cfg.torus, cfg.exec);
    ledger.record(state.n + 1, "t2.extend_sup", err, eps / 8.0);
    state.scratch.extended = Some(g.clone());
    Ok(g)
}

fn two_disc_geometry(r: f64, c: f64) -> AdmissibleSetGeometry {
    AdmissibleSetGeometry::two_discs(r, c, 1.0)
}

/// Trick 3: attach `g~_{n+1,k}` on `D(c_{n+1}, 1)` through a bridge and double
/// `k` until the glued set has the ratio and pairings of `g_{n+1}`.
pub fn trick3_bridge_and_k(
    cfg: &PipelineConfig,
    state: &mut StageState,
    g_next: &LiftedDisc,
    target: &CurrentEvaluation,
    forms: &[TestForm],
    ledger: &mut VerificationLedger,
) -> Result<usize> {
    let torus = &cfg.torus;
    let stage = state.n + 1;
    let forms = &forms[..stage.min(forms.len())];
    let bound = state.bound();
    let g = state.scratch.extended.clone().ok_or_else(|| Error::InvalidParameter("trick 2 has not run".into()))?;
    let r1 = 2.0 * state.radius;
    let c = r1 + cfg.gap + 1.0;
    let (q, p) = (r1, c - 1.0);
    let geometry = two_disc_geometry(r1, c);
    let unit = g_next.rescale_to_unit()?.with_degree_cap(cfg.degree_cap);
    let own = evaluate_disc(&unit, torus, forms, &cfg.grid)?;
    let mut k = 1;
    let mut best = (f64::INFINITY, f64::INFINITY, 0.0);
    loop {
        let folded = match unit.k_fold(k, Complex64::new(c, 0.0)) {
            Ok(d) => d,
            Err(err) => {
                ledger.record(stage, "t3.ratio", best.0, bound);
                ledger.record(stage, "t3.pairings", best.1, bound);
                return Err(err);
            }
        };
        let bridge = build_bridge(&g, &folded, Complex64::new(q, 0.0), Complex64::new(p, 0.0), torus)?;
        let pieces = SetPieces {
            discs: vec![&g, &folded],
            segments: vec![&bridge],
            neck: None,
            degree_hints: vec![g.effective_degree(), folded.effective_degree()],
        };
        let e = admissible_set_functionals(&pieces, &geometry, torus, forms, &cfg.grid)?;
        let (dr, dp) = e.proximity(target, forms.len());
        if dr.max(dp) < best.0.max(best.1) {
            best = (dr, dp, bridge.arclength);
        }
        if dr < bound && dp < bound {
            let standalone = evaluate_disc(&folded, torus, forms, &cfg.grid)?;
            let (ir, ip) = standalone.proximity(&own, forms.len());
            ledger.record(stage, "t3.ratio", dr, bound);
            ledger.record(stage, "t3.pairings", dp, bound);
            ledger.record(stage, "t3.bridge_length", bridge.arclength, torus.diameter() + 1.0);
            ledger.record(stage, "t3.kfold_invariance", ir.max(ip), 1e-8);
            let s = &mut state.scratch;
            s.c_next = Some(c);
            s.segment = Some((q, p));
            s.k = Some(k);
            // the bridge ends at the translated lift; keep the pieces continuous
            let mut shift = ORIGIN;
            for a in 0..folded.dim() {
                shift[a] = -bridge.lambda[a];
            }
            s.folded = Some(folded.translated(&shift));
            s.bridge = Some(bridge);
            return Ok(k);
        }
        if 2 * k > cfg.k_max {
            ledger.record(stage, "t3.ratio", best.0, bound);
            ledger.record(stage, "t3.pairings", best.1, bound);
            return Err(Error::DegreeCapExceeded {
                cap: cfg.k_max,
                context: format!("k reached {k} with ratio gap {:e} and pairing gap {:e}", best.0, best.1),
                best: None,
            });
        }
        k *= 2;
    }
}

/// `h` re-expanded exactly on each disc, with `h` itself on the segment and neck.
fn fitted_pieces<'a>(
    h: &'a ArnoldiPoly,
    lifted: &'a [LiftedDisc; 2],
) -> SetPieces<'a> {
    SetPieces {
        discs: vec![&lifted[0], &lifted[1]],
        segments: vec![h],
        neck: Some(h),
        degree_hints: vec![h.degree(), h.degree()],
    }
}

/// Trick 4: C¹ fit `h` of the glued map, a thin neck around the segment, and
/// `mu = h ∘ phi` for the Riemann map `phi: D_{R_{n+1}} -> H`.
pub fn trick4_round(
    cfg: &PipelineConfig,
    state: &mut StageState,
    target: &CurrentEvaluation,
    forms: &[TestForm],
    ledger: &mut VerificationLedger,
) -> Result<LiftedDisc> {
    let torus = &cfg.torus;
    let stage = state.n + 1;
    let forms = &forms[..stage.min(forms.len())];
    let bound = state.bound();
    let eps = state.eps_next()?;
    let u_prime = state.u_prime_radius();
    let s = &state.scratch;
    let missing = || Error::InvalidParameter("trick 3 has not run".into());
    let g = s.extended.clone().ok_or_else(missing)?;
    let folded = s.folded.clone().ok_or_else(missing)?;
    let bridge = s.bridge.clone().ok_or_else(missing)?;
    let c = s.c_next.ok_or_else(missing)?;
    let r1 = 2.0 * state.radius;
    let geometry = two_disc_geometry(r1, c);
    let pieces = SetPieces {
        discs: vec![&g, &folded],
        segments: vec![&bridge],
        neck: None,
        degree_hints: vec![g.effective_degree(), folded.effective_degree()],
    };

    // (a) the C¹ fit, escalated until sup_{U'_n} d(h, G) and the functionals on K hold
    let opts = FitOptions { exec: cfg.exec, stop_on_c0: true, ..FitOptions::c1(eps / 8.0, cfg.fit_degree_cap) };
    let mut best = (f64::INFINITY, f64::INFINITY);
    let mut accepted = None;
    let fit = mergelyan_c1_fit_until(&geometry, &pieces, &opts, &mut |h, _| {
        let sup = sup_distance(h, &g, u_prime, torus, cfg.exec);
        if sup >= eps / 8.0 {
            best = (best.0.min(sup), best.1);
            return Ok(false);
        }
        let lifted = [h.to_lifted(geometry.discs[0].center, r1)?, h.to_lifted(geometry.discs[1].center, 1.0)?];
        let e = admissible_set_functionals(&fitted_pieces(h, &lifted), &geometry, torus, forms, &cfg.grid)?;
        let (dr, dp) = e.proximity(target, forms.len());
        let gap = dr.max(dp);
        if sup < best.0 {
            best = (sup, gap);
        }
        if gap < bound {
            accepted = Some((lifted, sup, gap));
            return Ok(true);
        }
        Ok(false)
    });
    let (h, (lifted, fit_sup, fit_gap)) = match (fit, accepted) {
        (Ok((h, _)), Some(a)) => (h, a),
        (Ok(_), None) => unreachable!("accepted fits set the record"),
        (Err(err), _) => {
            ledger.record(stage, "t4.fit_sup", best.0, eps / 8.0);
            ledger.record(stage, "t4.fit_functionals", best.1, bound);
            return Err(err);
        }
    };
    ledger.record(stage, "t4.fit_sup", fit_sup, eps / 8.0);
    ledger.record(stage, "t4.fit_functionals", fit_gap, bound);

    // (b) the neck: halve w until the dumbbell functionals and the kernel bound hold
    let copts = ConformalOptions { boundary_nodes: cfg.boundary_nodes, exec: cfg.exec, ..Default::default() };
    let mut w = cfg.neck_w0;
    let mut last = (f64::INFINITY, f64::INFINITY);
    let phi = loop {
        if w < cfg.neck_floor {
            ledger.record(stage, "t4.neck_functionals", last.0, bound);
            ledger.record(stage, "t4.kernel_sup", last.1, eps / 8.0);
            return Err(Error::NeckFloorReached { floor: cfg.neck_floor });
        }
        let thick = geometry.clone().with_neck(w);
        let domain = match thick.dumbbell(cfg.boundary_nodes) {
            Ok(d) => d,
            Err(Error::InvalidParameter(_)) => {
                w /= 2.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let e = admissible_set_functionals(&fitted_pieces(&h, &lifted), &thick, torus, forms, &cfg.grid)?;
        let (dr, dp) = e.proximity(target, forms.len());
        let phi = riemann_map(&domain, r1, &copts)?;
        let pts = disc_samples(u_prime);
        let kernel = cfg
            .exec
            .map_slice(&pts, |&z| -> Result<f64> {
                let (zeta, _) = phi.map_eval(z)?;
                Ok(torus.distance(&h.eval(zeta).0, &h.eval(z).0))
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        last = (dr.max(dp), kernel);
        if last.0 < bound && kernel < eps / 8.0 {
            break phi;
        }
        w /= 2.0;
    };
    ledger.record(stage, "t4.neck_functionals", last.0, bound);
    state.scratch.neck_width = Some(w);

    // (c) mu from the boundary Fourier series of h ∘ phi
    let mut degree = 64.min(cfg.mu_degree_cap);
    loop {
        let mu = phi.fourier_refit(&h, degree, cfg.exec)?.with_degree_cap(cfg.degree_cap);
        let kernel = sup_distance(&mu, &h, u_prime, torus, cfg.exec);
        let e = evaluate_disc(&mu, torus, forms, &cfg.grid)?;
        let (dr, dp) = e.proximity(target, forms.len());
        if (kernel < eps / 8.0 && dr.max(dp) < bound) || degree >= cfg.mu_degree_cap {
            ledger.record(stage, "t4.kernel_sup", kernel, eps / 8.0);
            ledger.record(stage, "t4.disc_functionals", dr.max(dp), bound);
            if kernel < eps / 8.0 && dr.max(dp) < bound {
                state.scratch.h = Some(h);
                state.scratch.mu = Some(mu.clone());
                return Ok(mu);
            }
            return Err(Error::DegreeCapExceeded {
                cap: cfg.mu_degree_cap,
                context: format!("refit of h ∘ phi: kernel gap {kernel:e}, functional gap {:e}", dr.max(dp)),
                best: None,
            });
        }
        degree = (2 * degree).min(cfg.mu_degree_cap);
    }
}

/// Trick 5: `F_{n+1}(z) = mu((1 - delta) z)` with `delta` halved from `delta0`.
pub fn trick5_dilate(
    cfg: &PipelineConfig,
    state: &mut StageState,
    target: &CurrentEvaluation,
    forms: &[TestForm],
    ledger: &mut VerificationLedger,
) -> Result<LiftedDisc> {
    let torus = &cfg.torus;
    let stage = state.n + 1;
    let forms = &forms[..stage.min(forms.len())];
    let bound = state.bound();
    let eps = state.eps_next()?;
    let u_prime = state.u_prime_radius();
    let mu = state.scratch.mu.clone().ok_or_else(|| Error::InvalidParameter("trick 4 has not run".into()))?;
    let mut delta = cfg.delta0;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let f_next = loop {
        if delta < cfg.delta_floor {
            ledger.record(stage, "t5.dilate_sup", last.0, eps / 8.0);
            ledger.record(stage, "t5.ratio", last.1, bound);
            ledger.record(stage, "t5.pairings", last.2, bound);
            return Err(Error::DeltaFloorReached { floor: cfg.delta_floor });
        }
        let f = mu.dilate(delta)?;
        let sup = sup_distance(&f, &mu, u_prime, torus, cfg.exec);
        let e = evaluate_disc(&f, torus, forms, &cfg.grid)?;
        let (dr, dp) = e.proximity(target, forms.len());
        last = (sup, dr, dp);
        if sup < eps / 8.0 && dr < bound && dp < bound {
            break f;
        }
        delta /= 2.0;
    };
    ledger.record(stage, "t5.dilate_sup", last.0, eps / 8.0);
    ledger.record(stage, "t5.ratio", last.1, bound);
    ledger.record(stage, "t5.pairings", last.2, bound);
    state.scratch.delta = Some(delta);
    let total = sup_distance(&f_next, &state.f, u_prime, torus, cfg.exec);
    ledger.record(stage, "chain.total", total, eps / 2.0);
    let slots: f64 = ["t2.extend_sup", "t4.fit_sup", "t4.kernel_sup", "t5.dilate_sup"]
        .iter()
        .map(|name| ledger.slots(stage, name).last().map_or(f64::INFINITY, |r| r.lhs))
        .sum();
    ledger.record(stage, "chain.slots_sum", slots, eps / 2.0);
    Ok(f_next)
}

/// Runs the five tricks and returns the next stage.
pub fn advance(
    cfg: &PipelineConfig,
    mut state: StageState,
    g_next: &LiftedDisc,
    target: &CurrentEvaluation,
    forms: &[TestForm],
    ledger: &mut VerificationLedger,
) -> Result<StageState> {
    let stage = state.n + 1;
    let eps = trick1_error_bound(cfg, &mut state, forms, ledger)?;
    trick2_extend(cfg, &mut state, ledger)?;
    trick3_bridge_and_k(cfg, &mut state, g_next, target, forms, ledger)?;
    trick4_round(cfg, &mut state, target, forms, ledger)?;
    let f = trick5_dilate(cfg, &mut state, target, forms, ledger)?;
    if let Some(row) = ledger.stage_rows(stage).find(|r| !r.pass) {
        return Err(Error::LedgerViolation { slot: row.slot.clone(), lhs: row.lhs, bound: row.bound });
    }
    let r = 2.0 * state.radius;
    Ok(StageState { n: stage, radius: r, epsilon: eps, margin: r / 4.0, f, scratch: StageScratch::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::test_forms;

    #[test]
    fn trick1_on_the_identity_disc() {
        let cfg = PipelineConfig::default();
        let forms = test_forms(&cfg.torus, 4);
        let mut state = StageState::base(&LiftedDisc::identity(1.0));
        assert_eq!(state.margin, 0.25);
        let mut ledger = VerificationLedger::new();
        let eps = trick1_error_bound(&cfg, &mut state, &forms, &mut ledger).unwrap();
        assert!(eps < 0.5);
        assert!(ledger.all_pass());
        // C = 4 and L = 6 for z on the unit disc
        assert!((eps - 0.5 / 96.0).abs() < 1e-12, "eps = {eps}");
    }

    #[test]
    fn trick1_is_monotone_in_margin_and_stage() {
        let cfg = PipelineConfig::default();
        let forms = test_forms(&cfg.torus, 4);
        let run = |margin: f64, n: usize| {
            let mut s = StageState::base(&LiftedDisc::identity(1.0));
            s.margin = margin;
            s.n = n;
            trick1_error_bound(&cfg, &mut s, &forms, &mut VerificationLedger::new()).unwrap()
        };
        assert!(run(0.5, 1) >= run(0.25, 1));
        assert!(run(0.25, 2) < run(0.25, 1));
        assert!(run(0.25, 3) < run(0.25, 2));
    }

    #[test]
    fn trick2_is_exact_and_doubles_the_radius() {
        let cfg = PipelineConfig::default();
        let mut state = StageState::base(&LiftedDisc::identity(1.0));
        state.scratch.epsilon_next = Some(0.01);
        let mut ledger = VerificationLedger::new();
        let g = trick2_extend(&cfg, &mut state, &mut ledger).unwrap();
        assert_eq!(g.radius(), 2.0);
        let row = &ledger.rows()[0];
        assert_eq!(row.lhs, 0.0);
        assert_eq!(row.bound, 0.01 / 8.0);
    }
}
