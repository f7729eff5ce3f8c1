//! The inductive ping-pong construction: disc scheduling, the five tricks of
//! each inductive step, and verification of the assembled curve.

mod ledger;
mod run;
mod schedule;
mod stage;

pub use ledger::{LedgerRow, VerificationLedger};
pub use run::{
    cauchy_check, inject_fault, run_pipeline, verify_amalgamation, AmalgamationReport, PipelineOutput, StageCheckpoint,
    TargetCurrentSpec,
};
pub use schedule::{schedule_discs, schedule_index, DiscSchedule};
pub use stage::{
    advance, disc_samples, sup_distance, trick1_error_bound, trick2_extend, trick3_bridge_and_k, trick4_round,
    trick5_dilate, PipelineConfig, StageScratch, StageState,
};
