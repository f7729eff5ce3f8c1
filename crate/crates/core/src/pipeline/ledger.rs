use serde::{Deserialize, Serialize};

/// One measured stage inequality `lhs < bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub stage: usize,
    pub slot: String,
    pub lhs: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Append-only record of every stage inequality.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationLedger {
    rows: Vec<LedgerRow>,
}

impl VerificationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `lhs < bound` and returns whether it held.
    pub fn record(&mut self, stage: usize, slot: &str, lhs: f64, bound: f64) -> bool {
        let pass = lhs < bound;
        self.rows.push(LedgerRow { stage, slot: slot.to_string(), lhs, bound, pass });
        pass
    }

    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn stage_rows(&self, stage: usize) -> impl Iterator<Item = &LedgerRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LedgerRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Rows whose slot name starts with `prefix` in the given stage.
    pub fn slots(&self, stage: usize, prefix: &str) -> Vec<&LedgerRow> {
        self.stage_rows(stage).filter(|r| r.slot.starts_with(prefix)).collect()
    }

    pub fn extend(&mut self, other: VerificationLedger) {
        self.rows.extend(other.rows);
    }
}
