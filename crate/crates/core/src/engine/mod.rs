//! The co-evolution loop: execute, update beliefs, evolve, select.
//!
//! Generation `g` (0-based) runs every live candidate against anchors and
//! tests, applies the reciprocal belief update, then evolves tests when `g`
//! is even and code when `g` is odd. The last generation only executes and
//! updates. The result is the candidate with the highest final belief.

mod config;
mod evolve;
mod record;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use config::{CodeOpRates, ConfigError, RunConfig, TestOpRates};
pub use evolve::offspring_target;
pub use record::{source_digest, Birth, Death, DeathCause, GenerationRecord, OperatorCall, Phase, RunResult};

use crate::belief::{generation_update, Belief, BeliefError, InteractionLedger};
use crate::gateway::{CompletionTranscript, ProviderError, TextProvider};
use crate::harness::{extract_anchors, init_populations, ProblemError, ProblemSpec};
use crate::operators::{OperatorContext, OperatorError};
use crate::population::{
    column_clusters, row_clusters, CodeCandidate, CodeId, ObservationMatrix, Origin, TestCase, TestId,
};
use crate::sandbox::{ExecError, Executor};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("initialization failed: {0}")]
    Init(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

impl RunError {
    pub(crate) fn from_operator(e: OperatorError) -> Self {
        match e {
            OperatorError::Provider(p) => RunError::Provider(p),
            OperatorError::Exec(x) => RunError::Exec(x),
            other => RunError::Init(other.to_string()),
        }
    }
}

/// Receives run events as they happen, e.g. to stream a log.
pub trait RunObserver {
    fn initialized(&mut self, _code: &[CodeCandidate], _tests: &[TestCase]) {}
    fn transcript(&mut self, _transcript: &CompletionTranscript) {}
    fn generation(&mut self, _record: &GenerationRecord) {}
}

impl RunObserver for () {}

/// Live populations and id counters.
pub struct State {
    pub code: BTreeMap<CodeId, CodeCandidate>,
    pub tests: BTreeMap<TestId, TestCase>,
    /// Tests treated as anchors by the update; empty when anchoring is off.
    pub anchors: BTreeSet<TestId>,
    pub ledger: InteractionLedger,
    next_code: u32,
    next_test: u32,
}

impl State {
    pub fn new(code: Vec<CodeCandidate>, tests: Vec<TestCase>) -> Self {
        let next_code = code.iter().map(|c| c.id.0 + 1).max().unwrap_or(0);
        let next_test = tests.iter().map(|t| t.id.0 + 1).max().unwrap_or(0);
        let anchors = tests.iter().filter(|t| t.is_anchor()).map(|t| t.id).collect();
        Self {
            code: code.into_iter().map(|c| (c.id, c)).collect(),
            tests: tests.into_iter().map(|t| (t.id, t)).collect(),
            anchors,
            ledger: InteractionLedger::new(),
            next_code,
            next_test,
        }
    }

    fn next_code_id(&mut self) -> CodeId {
        self.next_code += 1;
        CodeId(self.next_code - 1)
    }

    fn next_test_id(&mut self) -> TestId {
        self.next_test += 1;
        TestId(self.next_test - 1)
    }
}

/// The strongest candidate; ties go to the older (smaller) id.
pub fn map_select(beliefs: &BTreeMap<CodeId, Belief>) -> Option<CodeId> {
    beliefs.iter().min_by(|(ia, a), (ib, b)| b.cmp_strength(a).then_with(|| ia.cmp(ib))).map(|(id, _)| *id)
}

fn passes_anchor_tests(matrix: &ObservationMatrix, code: CodeId, tests: &BTreeMap<TestId, TestCase>) -> bool {
    tests
        .values()
        .filter(|t| t.lineage.operator == Origin::Anchor)
        .all(|t| matrix.outcome(code, t.id).is_some_and(|o| o.is_pass()))
}

/// Runs the full loop on `problem`.
pub fn run(
    problem: &ProblemSpec,
    config: &RunConfig,
    provider: &dyn TextProvider,
    executor: &dyn Executor,
    observer: &mut dyn RunObserver,
) -> Result<RunResult, RunError> {
    config.validate()?;
    problem.validate(config.anchoring_enabled)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ctx = OperatorContext {
        problem,
        provider,
        executor,
        provider_config: &config.provider,
        retries: config.operator_retries,
    };

    let anchors = extract_anchors(problem, config)?;
    let init = init_populations(&ctx, config, anchors.len() as u32)?;
    for t in &init.transcripts {
        observer.transcript(t);
    }
    let mut tests = anchors;
    tests.extend(init.tests);
    observer.initialized(&init.code, &tests);
    let mut state = State::new(init.code, tests);
    for w in init.warnings {
        log::warn!("{w}");
    }

    let params = config.update_params();
    let mut records = Vec::new();
    let mut last_matrix = None;
    for g in 0..config.generations {
        let code: Vec<&CodeCandidate> = state.code.values().collect();
        let tests: Vec<&TestCase> = state.tests.values().collect();
        let matrix = executor.run_matrix(&code, &tests)?;
        let code_beliefs: BTreeMap<CodeId, Belief> = state.code.iter().map(|(id, c)| (*id, c.belief)).collect();
        let test_beliefs: BTreeMap<TestId, Belief> = state.tests.iter().map(|(id, t)| (*id, t.belief)).collect();
        let update =
            generation_update(&matrix, &code_beliefs, &test_beliefs, &state.anchors, &params, &mut state.ledger)?;
        for (id, b) in &update.code {
            state.code.get_mut(id).expect("updated code is live").belief = *b;
        }
        for (id, b) in &update.tests {
            state.tests.get_mut(id).expect("updated test is live").belief = *b;
        }

        let converged = config.early_stop
            && update
                .code
                .iter()
                .any(|(id, b)| b.probability() > 1.0 - 1e-6 && passes_anchor_tests(&matrix, *id, &state.tests));
        let terminal = g + 1 >= config.generations || converged;
        let mut record = GenerationRecord {
            index: g,
            phase: Phase::Terminal,
            matrix_digest: matrix.digest(),
            matrix: matrix.clone(),
            code_beliefs: update.code.clone(),
            test_beliefs: update.tests.clone(),
            anchor_failures: update.anchor_failures.iter().copied().collect(),
            ledger_pairs: state.ledger.len(),
            code_cluster_sizes: row_clusters(&matrix).iter().map(Vec::len).collect(),
            test_cluster_sizes: column_clusters(&matrix).iter().map(Vec::len).collect(),
            n_target: 0,
            offspring: 0,
            operator_calls: Vec::new(),
            births: Vec::new(),
            deaths: Vec::new(),
            warnings: Vec::new(),
        };

        if !terminal {
            let mut step = evolve::Step {
                ctx: &ctx,
                config,
                matrix: &matrix,
                rng: &mut rng,
                observer: &mut *observer,
                record: &mut record,
            };
            if g % 2 == 0 {
                step.record.phase = Phase::TestsEvolved;
                evolve::evolve_tests(&mut state, &mut step)?;
            } else {
                step.record.phase = Phase::CodeEvolved;
                evolve::evolve_code(&mut state, &mut step)?;
            }
        }
        for w in &record.warnings {
            log::warn!("generation {g}: {w}");
        }
        observer.generation(&record);
        records.push(record);
        last_matrix = Some(matrix);
        if terminal {
            break;
        }
    }

    let beliefs: BTreeMap<CodeId, Belief> = state.code.iter().map(|(id, c)| (*id, c.belief)).collect();
    let best = map_select(&beliefs).ok_or_else(|| RunError::Init("empty code population".into()))?;
    let best_passes_anchors = last_matrix.as_ref().is_some_and(|m| passes_anchor_tests(m, best, &state.tests));
    Ok(RunResult {
        best_code: state.code[&best].clone(),
        best_passes_anchors,
        final_code: state.code.into_values().collect(),
        final_tests: state.tests.into_values().collect(),
        generations: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::LogOddsLimit;

    #[test]
    fn map_select_ties_to_older() {
        let lim = LogOddsLimit::default();
        let b = |p| Belief::from_probability(p, lim);
        let beliefs = BTreeMap::from([(CodeId(0), b(0.9)), (CodeId(1), b(0.3))]);
        assert_eq!(map_select(&beliefs), Some(CodeId(0)));
        let beliefs = BTreeMap::from([(CodeId(3), b(0.5)), (CodeId(2), b(0.5))]);
        assert_eq!(map_select(&beliefs), Some(CodeId(2)));
        assert_eq!(map_select(&BTreeMap::new()), None);
    }
}
