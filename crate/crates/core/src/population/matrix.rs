use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CodeId, TestId};
use crate::belief::Outcome;

/// Why an execution produced its verdict. Only `OutputMatch` is a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionCause {
    OutputMatch,
    Mismatch,
    Timeout,
    RuntimeError,
    ResourceLimit,
}

impl ExecutionCause {
    pub fn is_pass(self) -> bool {
        self == ExecutionCause::OutputMatch
    }
}

/// Ordered pass/fail sequence for one row or one column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BehaviorVector(pub Vec<bool>);

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: Vec<CodeId>,
    cols: Vec<TestId>,
    causes: Vec<ExecutionCause>,
}

/// Dense N×M grid of execution outcomes between live code and tests.
///
/// Stored as per-entry causes in row-major order; the pass/fail bit is derived
/// from the cause so the two can never disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawMatrix", into = "RawMatrix")]
pub struct ObservationMatrix {
    rows: Vec<CodeId>,
    cols: Vec<TestId>,
    causes: Vec<ExecutionCause>,
    row_index: HashMap<CodeId, usize>,
    col_index: HashMap<TestId, usize>,
}

impl From<RawMatrix> for ObservationMatrix {
    fn from(raw: RawMatrix) -> Self {
        Self::from_causes(raw.rows, raw.cols, raw.causes)
    }
}

impl From<ObservationMatrix> for RawMatrix {
    fn from(m: ObservationMatrix) -> Self {
        RawMatrix { rows: m.rows, cols: m.cols, causes: m.causes }
    }
}

impl ObservationMatrix {
    /// # Panics
    /// If `causes.len() != rows.len() * cols.len()`.
    pub fn from_causes(rows: Vec<CodeId>, cols: Vec<TestId>, causes: Vec<ExecutionCause>) -> Self {
        assert_eq!(causes.len(), rows.len() * cols.len(), "observation matrix must be total");
        let row_index = rows.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let col_index = cols.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Self { rows, cols, causes, row_index, col_index }
    }

    /// Builds a matrix from plain pass bits; failures are recorded as mismatches.
    pub fn from_bits(rows: Vec<CodeId>, cols: Vec<TestId>, bits: &[bool]) -> Self {
        let causes =
            bits.iter().map(|&b| if b { ExecutionCause::OutputMatch } else { ExecutionCause::Mismatch }).collect();
        Self::from_causes(rows, cols, causes)
    }

    pub fn rows(&self) -> &[CodeId] {
        &self.rows
    }

    pub fn cols(&self) -> &[TestId] {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_index(&self, id: CodeId) -> Option<usize> {
        self.row_index.get(&id).copied()
    }

    pub fn col_index(&self, id: TestId) -> Option<usize> {
        self.col_index.get(&id).copied()
    }

    pub fn cause(&self, row: usize, col: usize) -> ExecutionCause {
        self.causes[row * self.cols.len() + col]
    }

    pub fn get(&self, row: usize, col: usize) -> Outcome {
        self.cause(row, col).is_pass().into()
    }

    pub fn outcome(&self, code: CodeId, test: TestId) -> Option<Outcome> {
        Some(self.get(self.row_index(code)?, self.col_index(test)?))
    }

    pub fn row_vector(&self, row: usize) -> BehaviorVector {
        BehaviorVector((0..self.cols.len()).map(|c| self.get(row, c).is_pass()).collect())
    }

    pub fn col_vector(&self, col: usize) -> BehaviorVector {
        BehaviorVector((0..self.rows.len()).map(|r| self.get(r, col).is_pass()).collect())
    }

    pub fn pass_count(&self, row: usize) -> usize {
        (0..self.cols.len()).filter(|&c| self.get(row, c).is_pass()).count()
    }

    /// SHA-256 over the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("matrix serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
