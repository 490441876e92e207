//! Code and test populations, the observation matrix between them, and the
//! selection machinery that shapes each generation.

mod cluster;
mod elitism;
mod matrix;
mod selection;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;

pub use cluster::{column_clusters, row_clusters};
pub use elitism::{select_code_elites, select_test_elites};
pub use matrix::{BehaviorVector, ExecutionCause, ObservationMatrix};
pub use selection::{assign_offspring_belief, rank_sample, roulette_select};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestId(pub u32);

impl fmt::Display for CodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// A parent reference in a lineage record. Differential tests descend from code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentId {
    Code(CodeId),
    Test(TestId),
}

impl fmt::Display for ParentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParentId::Code(id) => id.fmt(f),
            ParentId::Test(id) => id.fmt(f),
        }
    }
}

/// How an individual came into existence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Anchor,
    Init,
    SemanticCrossover,
    Debug,
    Reimplement,
    Discriminate,
    ComplementaryCrossover,
    EdgeCaseGen,
    DivergenceDiscovery,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Anchor => "anchor",
            Origin::Init => "init",
            Origin::SemanticCrossover => "semantic_crossover",
            Origin::Debug => "debug",
            Origin::Reimplement => "reimplement",
            Origin::Discriminate => "discriminate",
            Origin::ComplementaryCrossover => "complementary_crossover",
            Origin::EdgeCaseGen => "edge_case_gen",
            Origin::DivergenceDiscovery => "divergence_discovery",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub operator: Origin,
    pub parents: Vec<ParentId>,
    /// First generation in which the individual is executed.
    pub generation: u32,
}

impl Lineage {
    pub fn root(operator: Origin) -> Self {
        Self { operator, parents: Vec::new(), generation: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeCandidate {
    pub id: CodeId,
    pub source: String,
    pub belief: Belief,
    pub lineage: Lineage,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Anchor,
    Unit,
    Diff,
}

/// How captured stdout is compared against an expected output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Exact,
    #[default]
    WhitespaceNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: TestId,
    pub kind: TestKind,
    pub input: String,
    pub expected_output: String,
    pub comparison: Comparison,
    pub belief: Belief,
    pub lineage: Lineage,
    pub alive: bool,
}

impl TestCase {
    pub fn is_anchor(&self) -> bool {
        self.kind == TestKind::Anchor
    }
}
