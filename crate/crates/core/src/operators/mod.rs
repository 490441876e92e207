//! LLM-driven variation operators.
//!
//! Every operator renders a prompt template, asks a [`TextProvider`] for a
//! completion, parses the answer, and validates it structurally before a child
//! is handed back. Parse or validation failures are retried up to the
//! context's retry bound. The engine turns drafts into individuals (ids,
//! lineage generation, beliefs).

mod code;
mod divergence;
mod mock;
pub mod prompts;
mod unit;

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, Outcome};
use crate::gateway::{CompletionTranscript, PromptRequest, ProviderConfig, ProviderError, TextProvider, Verdict};
use crate::harness::ProblemSpec;
use crate::population::{row_clusters, CodeId, ObservationMatrix, Origin, ParentId, TestId, TestKind};
use crate::sandbox::{ExecError, Executor};

pub use code::{debug, failing_context, initial_code, reimplement, semantic_crossover, FailingTest};
pub use divergence::{divergence_discovery, DivergenceReport};
pub use mock::{FnProvider, MockProvider, MockScript};
pub use unit::{complementary_crossover, discriminate, edge_case_gen, initial_tests, DiscriminateBranch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    SemanticCrossover,
    Debug,
    Reimplement,
    Discriminate,
    ComplementaryCrossover,
    EdgeCaseGen,
    DivergenceDiscovery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationKind {
    Code,
    UnitTest,
    DiffTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextNeeds {
    FailingTests,
    PassingTests,
    CodePair,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorSpec {
    pub name: OperatorName,
    /// Number of parents drawn from the population being evolved.
    pub arity: usize,
    pub population: PopulationKind,
    pub context: ContextNeeds,
}

pub const OPERATORS: [OperatorSpec; 7] = [
    OperatorSpec {
        name: OperatorName::SemanticCrossover,
        arity: 2,
        population: PopulationKind::Code,
        context: ContextNeeds::None,
    },
    OperatorSpec {
        name: OperatorName::Debug,
        arity: 1,
        population: PopulationKind::Code,
        context: ContextNeeds::FailingTests,
    },
    OperatorSpec {
        name: OperatorName::Reimplement,
        arity: 1,
        population: PopulationKind::Code,
        context: ContextNeeds::None,
    },
    OperatorSpec {
        name: OperatorName::Discriminate,
        arity: 1,
        population: PopulationKind::UnitTest,
        context: ContextNeeds::CodePair,
    },
    OperatorSpec {
        name: OperatorName::ComplementaryCrossover,
        arity: 2,
        population: PopulationKind::UnitTest,
        context: ContextNeeds::None,
    },
    OperatorSpec {
        name: OperatorName::EdgeCaseGen,
        arity: 1,
        population: PopulationKind::UnitTest,
        context: ContextNeeds::None,
    },
    OperatorSpec {
        name: OperatorName::DivergenceDiscovery,
        arity: 2,
        population: PopulationKind::DiffTest,
        context: ContextNeeds::PassingTests,
    },
];

impl OperatorName {
    pub fn spec(self) -> OperatorSpec {
        *OPERATORS.iter().find(|s| s.name == self).expect("every operator has a spec")
    }

    pub fn origin(self) -> Origin {
        match self {
            OperatorName::SemanticCrossover => Origin::SemanticCrossover,
            OperatorName::Debug => Origin::Debug,
            OperatorName::Reimplement => Origin::Reimplement,
            OperatorName::Discriminate => Origin::Discriminate,
            OperatorName::ComplementaryCrossover => Origin::ComplementaryCrossover,
            OperatorName::EdgeCaseGen => Origin::EdgeCaseGen,
            OperatorName::DivergenceDiscovery => Origin::DivergenceDiscovery,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.origin().as_str()
    }
}

/// Draws one operator with probability proportional to its rate.
pub fn select_operator<R: Rng + ?Sized>(rates: &[(OperatorName, f64)], rng: &mut R) -> OperatorName {
    let dist = WeightedIndex::new(rates.iter().map(|(_, r)| *r)).expect("operator rates must be positive");
    rates[dist.sample(rng)].0
}

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("operator not applicable: {0}")]
    Inapplicable(String),
    #[error("{operator} produced no valid child: {reason}")]
    Exhausted { operator: String, reason: String, transcripts: Vec<CompletionTranscript> },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl OperatorError {
    /// Provider and executor failures abort a run; the rest are retryable.
    pub fn is_fatal(&self) -> bool {
        matches!(self, OperatorError::Provider(_) | OperatorError::Exec(_))
    }

    pub fn take_transcripts(&mut self) -> Vec<CompletionTranscript> {
        match self {
            OperatorError::Exhausted { transcripts, .. } => std::mem::take(transcripts),
            _ => Vec::new(),
        }
    }
}

/// Everything an operator call may consult.
pub struct OperatorContext<'a> {
    pub problem: &'a ProblemSpec,
    pub provider: &'a dyn TextProvider,
    pub executor: &'a dyn Executor,
    pub provider_config: &'a ProviderConfig,
    /// Provider calls allowed per invocation before giving up.
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeDraft {
    pub source: String,
    pub origin: Origin,
    pub parents: Vec<CodeId>,
}

/// How the engine should initialize a new test's belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DraftBelief {
    MinOfParents,
    Prior,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestDraft {
    pub input: String,
    pub expected_output: String,
    pub kind: TestKind,
    pub origin: Origin,
    pub parents: Vec<ParentId>,
    /// A repaired test takes over its parent's slot.
    pub replaces: Option<TestId>,
    pub belief: DraftBelief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorResult<T> {
    pub children: Vec<T>,
    pub transcripts: Vec<CompletionTranscript>,
    pub audit: Option<Verdict>,
}

impl<T> OperatorResult<T> {
    fn new(children: Vec<T>, transcripts: Vec<CompletionTranscript>) -> Self {
        Self { children, transcripts, audit: None }
    }
}

impl<'a> OperatorContext<'a> {
    fn base_vars(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("statement".to_string(), self.problem.statement.clone())])
    }

    /// Renders `template`, calls the provider, and parses the reply, retrying
    /// parse failures up to `self.retries` calls.
    fn invoke<T>(
        &self,
        task: &str,
        template: &str,
        vars: BTreeMap<String, String>,
        transcripts: &mut Vec<CompletionTranscript>,
        mut parse: impl FnMut(&str) -> Result<T, String>,
    ) -> Result<T, OperatorError> {
        let prompt = prompts::render(template, &vars).expect("operator supplies every template variable");
        let request = PromptRequest {
            task: task.to_string(),
            template: template.to_string(),
            prompt,
            vars,
            temperature: self.provider_config.temperature_for(task),
        };
        let mut last = String::from("no attempts");
        for _ in 0..self.retries.max(1) {
            let completion = self.provider.complete(&request)?;
            transcripts.push(completion.transcript);
            match parse(&completion.text) {
                Ok(v) => return Ok(v),
                Err(reason) => {
                    log::debug!("{task}: rejected completion: {reason}");
                    last = reason;
                }
            }
        }
        Err(OperatorError::Exhausted {
            operator: task.to_string(),
            reason: last,
            transcripts: std::mem::take(transcripts),
        })
    }

    /// Operators insist on a fenced block; bare prose is a parse failure.
    fn validated_code(&self, text: &str) -> Result<String, String> {
        let source = crate::gateway::extract_code_blocks(text)
            .into_iter()
            .next()
            .ok_or_else(|| "no fenced code block in completion".to_string())?;
        self.executor.validate(&source)?;
        Ok(source)
    }
}

fn strongest<Id: Copy + Ord>(ids: &[Id], beliefs: &BTreeMap<Id, Belief>) -> Vec<Id> {
    let mut v: Vec<Id> = ids.iter().copied().filter(|id| beliefs.contains_key(id)).collect();
    v.sort_by(|a, b| beliefs[b].cmp_strength(&beliefs[a]).then_with(|| a.cmp(b)));
    v
}

/// The two strongest representatives of distinct functional-equivalence
/// blocks, strongest first.
pub fn discriminating_pair(beliefs: &BTreeMap<CodeId, Belief>, matrix: &ObservationMatrix) -> Option<(CodeId, CodeId)> {
    let reps: Vec<CodeId> =
        row_clusters(matrix).iter().filter_map(|block| strongest(block, beliefs).first().copied()).collect();
    let reps = strongest(&reps, beliefs);
    match reps.as_slice() {
        [a, b, ..] => Some((*a, *b)),
        _ => None,
    }
}

/// For each block of two or more equivalent candidates, its two strongest
/// members. Blocks are ordered by their strongest member; at most `max_blocks`.
pub fn equivalent_pairs(
    beliefs: &BTreeMap<CodeId, Belief>,
    matrix: &ObservationMatrix,
    max_blocks: usize,
) -> Vec<(CodeId, CodeId)> {
    let mut pairs: Vec<(CodeId, CodeId)> = row_clusters(matrix)
        .iter()
        .filter_map(|block| match strongest(block, beliefs).as_slice() {
            [a, b, ..] => Some((*a, *b)),
            _ => None,
        })
        .collect();
    pairs.sort_by(|x, y| beliefs[&y.0].cmp_strength(&beliefs[&x.0]).then_with(|| x.0.cmp(&y.0)));
    pairs.truncate(max_blocks);
    pairs
}

/// Tests (anchors included) that both candidates pass.
pub fn shared_passes(matrix: &ObservationMatrix, a: CodeId, b: CodeId) -> BTreeSet<TestId> {
    matrix
        .cols()
        .iter()
        .copied()
        .filter(|&t| matrix.outcome(a, t) == Some(Outcome::Pass) && matrix.outcome(b, t) == Some(Outcome::Pass))
        .collect()
}
