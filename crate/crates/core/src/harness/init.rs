use std::collections::BTreeSet;

use crate::belief::Belief;
use crate::engine::{RunConfig, RunError};
use crate::gateway::CompletionTranscript;
use crate::operators::{initial_code, initial_tests, OperatorContext, OperatorError, OperatorResult};
use crate::population::{CodeCandidate, CodeId, Lineage, Origin, TestCase, TestId};

#[derive(Debug, Clone, Default)]
pub struct InitialPopulation {
    pub code: Vec<CodeCandidate>,
    pub tests: Vec<TestCase>,
    pub transcripts: Vec<CompletionTranscript>,
    pub warnings: Vec<String>,
}

fn collect<T>(
    result: Result<OperatorResult<T>, OperatorError>,
    out: &mut InitialPopulation,
) -> Result<Vec<T>, RunError> {
    match result {
        Ok(r) => {
            out.transcripts.extend(r.transcripts);
            Ok(r.children)
        }
        Err(e) if e.is_fatal() => Err(RunError::from_operator(e)),
        Err(mut e) => {
            out.transcripts.extend(e.take_transcripts());
            out.warnings.push(e.to_string());
            Ok(Vec::new())
        }
    }
}

/// Builds the initial code and unit-test populations at the prior `b_init`.
///
/// Sends `n_samples` prompts each asking for `n_approaches` solutions, then
/// one prompt asking for `m_init` tests. Test ids start at `first_test_id`
/// so anchors can take the low ids. Duplicate tests are dropped.
pub fn init_populations(
    ctx: &OperatorContext,
    config: &RunConfig,
    first_test_id: u32,
) -> Result<InitialPopulation, RunError> {
    let prior = Belief::from_probability(config.b_init, config.limit());
    let mut out = InitialPopulation::default();

    for _ in 0..config.n_samples {
        for draft in collect(initial_code(ctx, config.n_approaches), &mut out)? {
            if out.code.len() >= config.n_init {
                break;
            }
            out.code.push(CodeCandidate {
                id: CodeId(out.code.len() as u32),
                source: draft.source,
                belief: prior,
                lineage: Lineage::root(Origin::Init),
                alive: true,
            });
        }
    }
    if out.code.is_empty() {
        return Err(RunError::Init("the provider produced no parsable candidate".into()));
    }

    let mut seen: BTreeSet<(String, String)> =
        ctx.problem.public_examples.iter().map(|e| (e.input.clone(), e.output.clone())).collect();
    for draft in collect(initial_tests(ctx, config.m_init), &mut out)? {
        if !seen.insert((draft.input.clone(), draft.expected_output.clone())) {
            continue;
        }
        out.tests.push(TestCase {
            id: TestId(first_test_id + out.tests.len() as u32),
            kind: draft.kind,
            input: draft.input,
            expected_output: draft.expected_output,
            comparison: ctx.problem.comparison,
            belief: prior,
            lineage: Lineage::root(Origin::Init),
            alive: true,
        });
    }
    if out.tests.is_empty() {
        out.warnings.push("no initial unit tests; evolution starts from anchors only".into());
    }
    Ok(out)
}
