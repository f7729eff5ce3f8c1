use super::ledger::{LedgerRow, VerificationLedger};
use super::schedule::{schedule_discs, DiscSchedule};
use super::stage::{advance, sup_distance, PipelineConfig, StageState};
use crate::current::{evaluate_disc, CurrentEvaluation};
use crate::disc::LiftedDisc;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;
use crate::torus::{test_forms, LatticeTorus, TestForm};

/// Ratio and pairings of every scheduled disc `g_j` against the first `J` test forms.
#[derive(Debug, Clone)]
pub struct TargetCurrentSpec {
    pub forms: Vec<TestForm>,
    /// `evaluations[j - 1]` belongs to `g_j`.
    pub evaluations: Vec<CurrentEvaluation>,
}

impl TargetCurrentSpec {
    pub fn build(schedule: &DiscSchedule, torus: &LatticeTorus, forms: Vec<TestForm>, grid: &QuadratureGrid) -> Result<Self> {
        let per_entry = schedule
            .catalog
            .iter()
            .map(|d| evaluate_disc(d, torus, &forms, grid))
            .collect::<Result<Vec<_>>>()?;
        let evaluations = schedule.indices.iter().map(|&i| per_entry[i].clone()).collect();
        Ok(TargetCurrentSpec { forms, evaluations })
    }

    pub fn target(&self, j: usize) -> &CurrentEvaluation {
        &self.evaluations[j - 1]
    }
}

/// Everything needed to resume after stage `stage`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCheckpoint {
    pub stage: usize,
    pub radius: f64,
    pub epsilon: f64,
    pub margin: f64,
    /// `F_stage` on `D_{R_stage}`.
    pub disc: LiftedDisc,
    pub rows: Vec<LedgerRow>,
}

impl StageCheckpoint {
    fn of(state: &StageState, ledger: &VerificationLedger) -> Self {
        StageCheckpoint {
            stage: state.n,
            radius: state.radius,
            epsilon: state.epsilon,
            margin: state.margin,
            disc: state.f.clone(),
            rows: ledger.stage_rows(state.n).cloned().collect(),
        }
    }

    fn state(&self) -> StageState {
        StageState {
            n: self.stage,
            radius: self.radius,
            epsilon: self.epsilon,
            margin: self.margin,
            f: self.disc.clone(),
            scratch: Default::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub stages: Vec<StageCheckpoint>,
    pub ledger: VerificationLedger,
    pub schedule: DiscSchedule,
    pub targets: TargetCurrentSpec,
}

impl PipelineOutput {
    pub fn final_disc(&self) -> &LiftedDisc {
        &self.stages.last().expect("at least the base stage").disc
    }
}

/// Runs stages `1..=cfg.stages`, starting after the last of `resume` if given,
/// and hands every completed stage to `on_checkpoint`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    resume: Vec<StageCheckpoint>,
    on_checkpoint: &mut dyn FnMut(&StageCheckpoint) -> Result<()>,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let schedule = schedule_discs(&cfg.catalog, cfg.stages)?;
    let forms = test_forms(&cfg.torus, cfg.forms);
    let targets = TargetCurrentSpec::build(&schedule, &cfg.torus, forms.clone(), &cfg.grid)?;
    let mut ledger = VerificationLedger::new();
    let mut stages = resume;
    for (k, cp) in stages.iter().enumerate() {
        if cp.stage != k + 1 {
            return Err(Error::Checkpoint(format!("checkpoint {} found where stage {} was expected", cp.stage, k + 1)));
        }
        for row in &cp.rows {
            ledger.push(row.clone());
        }
    }
    let mut state = match stages.last() {
        Some(cp) => cp.state(),
        None => {
            let g1 = schedule.disc(1);
            let state = StageState::base(g1);
            let own = evaluate_disc(&state.f, &cfg.torus, &forms[..1], &cfg.grid)?;
            let (dr, dp) = own.proximity(targets.target(1), 1);
            ledger.record(1, "base.ratio", dr, 0.5);
            ledger.record(1, "base.pairings", dp, 0.5);
            let cp = StageCheckpoint::of(&state, &ledger);
            on_checkpoint(&cp)?;
            stages.push(cp);
            state
        }
    };
    while state.n < cfg.stages {
        let stage = state.n + 1;
        let mut stage_ledger = VerificationLedger::new();
        match advance(cfg, state, schedule.disc(stage), targets.target(stage), &forms, &mut stage_ledger) {
            Ok(next) => {
                ledger.extend(stage_ledger);
                state = next;
                let cp = StageCheckpoint::of(&state, &ledger);
                on_checkpoint(&cp)?;
                stages.push(cp);
            }
            Err(source) => {
                ledger.extend(stage_ledger);
                return Err(Error::StageFailed { stage, source: Box::new(source), ledger: Box::new(ledger) });
            }
        }
    }
    Ok(PipelineOutput { stages, ledger, schedule, targets })
}

#[derive(Debug, Clone, Default)]
pub struct AmalgamationReport {
    pub rows: Vec<LedgerRow>,
}

impl AmalgamationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// The final curve restricted to each earlier disc `D_{R_n}` stays within
/// `2^{-n} + 2^{-(n+1)}` of `g_n` in ratio and in the first `n` pairings.
pub fn verify_amalgamation(
    final_disc: &LiftedDisc,
    stages: &[StageCheckpoint],
    targets: &TargetCurrentSpec,
    torus: &LatticeTorus,
    grid: &QuadratureGrid,
) -> Result<AmalgamationReport> {
    let mut ledger = VerificationLedger::new();
    for cp in stages.iter().take(stages.len().saturating_sub(1)) {
        let n = cp.stage;
        let forms = &targets.forms[..n.min(targets.forms.len())];
        let part = final_disc.restrict(cp.radius)?;
        let e = evaluate_disc(&part, torus, forms, grid)?;
        let (dr, dp) = e.proximity(targets.target(n), forms.len());
        let bound = 0.5f64.powi(n as i32) + 0.5f64.powi(n as i32 + 1);
        ledger.record(n, "claim.ratio", dr, bound);
        ledger.record(n, "claim.pairings", dp, bound);
    }
    Ok(AmalgamationReport { rows: ledger.rows().to_vec() })
}

/// `sup_{U'_n} d(F_m, F_n) < epsilon_{n+1}` for all recorded `n < m`.
pub fn cauchy_check(stages: &[StageCheckpoint], torus: &LatticeTorus, exec: crate::Exec) -> Vec<LedgerRow> {
    let mut ledger = VerificationLedger::new();
    for (i, a) in stages.iter().enumerate() {
        let Some(next) = stages.get(i + 1) else { break };
        for b in &stages[i + 1..] {
            let err = sup_distance(&b.disc, &a.disc, a.radius + a.margin, torus, exec);
            ledger.record(a.stage, &format!("cauchy.m{}", b.stage), err, next.epsilon);
        }
    }
    ledger.rows().to_vec()
}

/// Copy of `disc` with its largest scaled coefficient multiplied by `1.1`.
pub fn inject_fault(disc: &LiftedDisc) -> Result<LiftedDisc> {
    let mut coeffs = disc.scaled_coeffs().to_vec();
    let mut best = (0, 0, -1.0);
    for (a, c) in coeffs.iter().enumerate() {
        for (k, v) in c.iter().enumerate() {
            if v.norm() > best.2 {
                best = (a, k, v.norm());
            }
        }
    }
    coeffs[best.0][best.1] *= 1.1;
    LiftedDisc::from_scaled(disc.center(), disc.radius(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn tiny_config() -> PipelineConfig {
        PipelineConfig { catalog: vec![LiftedDisc::identity(1.0)], stages: 1, forms: 4, ..Default::default() }
    }

    #[test]
    fn single_stage_run_checkpoints_the_base() {
        let cfg = tiny_config();
        let mut seen = Vec::new();
        let out = run_pipeline(&cfg, vec![], &mut |cp| {
            seen.push(cp.stage);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![1]);
        assert!(out.ledger.all_pass());
        assert_eq!(out.final_disc(), &LiftedDisc::identity(1.0));
        assert_eq!(out.stages[0].margin, 0.25);
    }

    #[test]
    fn resume_rejects_gaps() {
        let cfg = tiny_config();
        let out = run_pipeline(&cfg, vec![], &mut |_| Ok(())).unwrap();
        let mut cp = out.stages[0].clone();
        cp.stage = 2;
        assert!(matches!(run_pipeline(&cfg, vec![cp], &mut |_| Ok(())), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn fault_injection_scales_the_largest_coefficient() {
        let d = LiftedDisc::from_monomials(Complex64::new(0.0, 0.0), 1.0, vec![vec![
            Complex64::new(0.1, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.5, 0.0),
        ]])
        .unwrap();
        let f = inject_fault(&d).unwrap();
        assert!((f.scaled_coeffs()[0][1] - Complex64::new(2.2, 0.0)).norm() < 1e-15);
        assert_eq!(f.scaled_coeffs()[0][0], d.scaled_coeffs()[0][0]);
    }

    #[test]
    fn cauchy_rows_compare_later_stages() {
        let torus = LatticeTorus::unit_square();
        let mk = |n: usize, r: f64, eps: f64, d: LiftedDisc| StageCheckpoint {
            stage: n,
            radius: r,
            epsilon: eps,
            margin: r / 4.0,
            disc: d,
            rows: vec![],
        };
        let a = LiftedDisc::identity(1.0);
        let b = a.restrict(2.0).unwrap();
        let rows = cauchy_check(&[mk(1, 1.0, 1.0, a), mk(2, 2.0, 0.01, b)], &torus, crate::Exec::Sequential);
        assert_eq!(rows.len(), 1);
        assert!(rows[0].pass && rows[0].lhs == 0.0 && rows[0].bound == 0.01);
    }
}
