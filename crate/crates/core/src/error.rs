use thiserror::Error;

use crate::approx::FitReport;
use crate::pipeline::VerificationLedger;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate disc: area {area:e} below cutoff")]
    DegenerateDisc { area: f64 },

    #[error("quadrature did not converge: relative change {change:e} at cap")]
    QuadratureNotConverged { change: f64 },

    #[error("inconsistent pieces: {0}")]
    InconsistentPieces(String),

    #[error("degree cap {cap} exceeded: {context}")]
    DegreeCapExceeded {
        cap: usize,
        context: String,
        best: Option<Box<FitReport>>,
    },

    #[error("bridge too long: arclength {length} > bound {bound}")]
    BridgeTooLong { length: f64, bound: f64 },

    #[error("conformal solver diverged: {0}")]
    SolverDiverged(String),

    #[error("point {point} too close to the boundary of the source disc")]
    PointTooCloseToBoundary { point: num_complex::Complex64 },

    #[error("perturbation probe failed after {halvings} halvings")]
    ProbeFailed { halvings: usize },

    #[error("neck width floor {floor:e} reached before the neck inequalities held")]
    NeckFloorReached { floor: f64 },

    #[error("dilation floor {floor:e} reached before the dilation inequalities held")]
    DeltaFloorReached { floor: f64 },

    #[error("measured inequality {slot} violated: {lhs:e} >= {bound:e}")]
    LedgerViolation { slot: String, lhs: f64, bound: f64 },

    #[error("stage {stage} failed: {source}")]
    StageFailed {
        stage: usize,
        #[source]
        source: Box<Error>,
        ledger: Box<VerificationLedger>,
    },

    #[error("bad config at {location}: {message}")]
    BadConfig { location: String, message: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BadConfig { .. } | Error::InvalidParameter(_) => 4,
            Error::StageFailed { source, .. } => source.exit_code(),
            Error::ProbeFailed { .. }
            | Error::NeckFloorReached { .. }
            | Error::DeltaFloorReached { .. }
            | Error::BridgeTooLong { .. }
            | Error::LedgerViolation { .. }
            | Error::DegreeCapExceeded { .. } => 2,
            _ => 3,
        }
    }
}
