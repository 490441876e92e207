use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::Belief;
use crate::population::{CodeCandidate, CodeId, Lineage, ObservationMatrix, ParentId, TestCase, TestId, TestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    TestsEvolved,
    CodeEvolved,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Birth {
    pub individual: ParentId,
    /// Test kind; `None` for code.
    pub kind: Option<TestKind>,
    pub lineage: Lineage,
    pub belief: Belief,
    pub digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathCause {
    NotElite,
    Replaced,
    OverCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Death {
    pub individual: ParentId,
    pub cause: DeathCause,
}

/// One operator invocation during evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorCall {
    pub operator: String,
    pub children: usize,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub index: u32,
    pub phase: Phase,
    pub matrix: ObservationMatrix,
    pub matrix_digest: String,
    /// Beliefs after this generation's update, before evolution.
    pub code_beliefs: BTreeMap<CodeId, Belief>,
    pub test_beliefs: BTreeMap<TestId, Belief>,
    pub anchor_failures: Vec<CodeId>,
    /// Ledger size after the update.
    pub ledger_pairs: usize,
    pub code_cluster_sizes: Vec<usize>,
    pub test_cluster_sizes: Vec<usize>,
    /// Offspring quota for the evolved population; zero on terminal generations.
    pub n_target: usize,
    /// Offspring produced by rate-selected operators.
    pub offspring: usize,
    pub operator_calls: Vec<OperatorCall>,
    pub births: Vec<Birth>,
    pub deaths: Vec<Death>,
    pub warnings: Vec<String>,
}

impl GenerationRecord {
    /// Checks the stored matrix digest against the matrix content.
    pub fn verify(&self) -> bool {
        self.matrix.digest() == self.matrix_digest
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_code: CodeCandidate,
    pub best_passes_anchors: bool,
    pub final_code: Vec<CodeCandidate>,
    pub final_tests: Vec<TestCase>,
    pub generations: Vec<GenerationRecord>,
}

impl RunResult {
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("result serializes")))
    }
}

pub fn source_digest(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}
