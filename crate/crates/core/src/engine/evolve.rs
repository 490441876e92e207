use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::record::{source_digest, Birth, Death, DeathCause, GenerationRecord, OperatorCall};
use super::{RunConfig, RunError, RunObserver, State};
use crate::belief::Belief;
use crate::operators::{
    self, discriminating_pair, divergence_discovery, equivalent_pairs, failing_context, select_operator, shared_passes,
    CodeDraft, DraftBelief, FailingTest, OperatorContext, OperatorError, OperatorName, OperatorResult, TestDraft,
};
use crate::population::{
    assign_offspring_belief, roulette_select, select_code_elites, select_test_elites, CodeCandidate, CodeId, Lineage,
    ObservationMatrix, ParentId, TestCase, TestId,
};

/// `ceil(n * rate)`, guarded against float noise just above an integer.
pub fn offspring_target(n: usize, rate: f64) -> usize {
    let x = n as f64 * rate;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Generation-local bookkeeping shared by both evolution branches.
pub(super) struct Step<'a, 'b, R: Rng> {
    pub ctx: &'a OperatorContext<'a>,
    pub config: &'a RunConfig,
    pub matrix: &'a ObservationMatrix,
    pub rng: &'a mut R,
    pub observer: &'b mut dyn RunObserver,
    pub record: &'a mut GenerationRecord,
}

impl<R: Rng> Step<'_, '_, R> {
    /// Forwards transcripts and records the call; fatal errors abort the run.
    fn absorb<T>(
        &mut self,
        op: OperatorName,
        result: Result<OperatorResult<T>, OperatorError>,
    ) -> Result<Vec<T>, RunError> {
        match result {
            Ok(r) => {
                for t in &r.transcripts {
                    self.observer.transcript(t);
                }
                self.record.operator_calls.push(OperatorCall {
                    operator: op.as_str().into(),
                    children: r.children.len(),
                    detail: r.audit.map(|v| format!("verdict: {v:?}").to_lowercase()),
                });
                Ok(r.children)
            }
            Err(e) if e.is_fatal() => Err(RunError::from_operator(e)),
            Err(mut e) => {
                for t in &e.take_transcripts() {
                    self.observer.transcript(t);
                }
                self.record.operator_calls.push(OperatorCall {
                    operator: op.as_str().into(),
                    children: 0,
                    detail: Some(e.to_string()),
                });
                Ok(Vec::new())
            }
        }
    }
}

/// One round of code evolution: elites plus `ceil(|C| * offspring_rate)` children.
pub(super) fn evolve_code<R: Rng>(state: &mut State, step: &mut Step<'_, '_, R>) -> Result<(), RunError> {
    let config = step.config;
    let beliefs: BTreeMap<CodeId, Belief> = state.code.iter().map(|(id, c)| (*id, c.belief)).collect();
    let test_beliefs: BTreeMap<TestId, Belief> = state.tests.iter().map(|(id, t)| (*id, t.belief)).collect();
    let n_target = offspring_target(beliefs.len(), config.offspring_rate);
    let capacity = config.n_max.saturating_sub(n_target).max(1);
    let elites = select_code_elites(&beliefs, step.matrix, config.elitism_rate, capacity);
    step.record.n_target = n_target;

    let pool: Vec<(CodeId, f64)> = beliefs.iter().map(|(id, b)| (*id, b.probability())).collect();
    let rates = config.code_op_rates.table();
    let mut children: Vec<CodeDraft> = Vec::new();
    let mut attempts = 0;
    while children.len() < n_target && attempts < 5 * n_target {
        attempts += 1;
        let op = select_operator(&rates, step.rng);
        let parents = roulette_select(&pool, op.spec().arity, step.rng);
        let result = match op {
            OperatorName::Debug => {
                let parent = &state.code[&parents[0]];
                let context = failing_context(parent.id, step.matrix, &test_beliefs, config.debug_context, step.rng);
                let failing: Vec<FailingTest> =
                    context.into_iter().map(|(t, cause)| FailingTest { test: &state.tests[&t], cause }).collect();
                operators::debug(step.ctx, parent, &failing)
            }
            OperatorName::Reimplement => operators::reimplement(step.ctx, &state.code[&parents[0]]),
            OperatorName::SemanticCrossover => {
                operators::semantic_crossover(step.ctx, &state.code[&parents[0]], &state.code[&parents[1]])
            }
            other => unreachable!("{other:?} is not a code operator"),
        };
        let drafts = step.absorb(op, result)?;
        children.extend(drafts.into_iter().take(n_target - children.len()));
    }
    if children.len() < n_target {
        step.record.warnings.push(format!("code evolution produced {} of {n_target} offspring", children.len()));
    }
    step.record.offspring = children.len();

    for id in beliefs.keys().filter(|id| !elites.contains(id)) {
        state.code.remove(id);
        step.record.deaths.push(Death { individual: ParentId::Code(*id), cause: DeathCause::NotElite });
    }
    for draft in children {
        let parent_beliefs: Vec<Belief> = draft.parents.iter().map(|p| beliefs[p]).collect();
        let id = state.next_code_id();
        let candidate = CodeCandidate {
            id,
            belief: assign_offspring_belief(&parent_beliefs),
            lineage: Lineage {
                operator: draft.origin,
                parents: draft.parents.iter().map(|p| ParentId::Code(*p)).collect(),
                generation: step.record.index + 1,
            },
            source: draft.source,
            alive: true,
        };
        step.record.births.push(Birth {
            individual: ParentId::Code(id),
            kind: None,
            lineage: candidate.lineage.clone(),
            belief: candidate.belief,
            digest: source_digest(&candidate.source),
        });
        state.code.insert(id, candidate);
    }
    Ok(())
}

/// One round of test evolution: representative elites, rate-selected unit
/// operators, then divergence probing of equivalent candidate pairs.
pub(super) fn evolve_tests<R: Rng>(state: &mut State, step: &mut Step<'_, '_, R>) -> Result<(), RunError> {
    let config = step.config;
    let code_beliefs: BTreeMap<CodeId, Belief> = state.code.iter().map(|(id, c)| (*id, c.belief)).collect();
    let beliefs: BTreeMap<TestId, Belief> = state.tests.iter().map(|(id, t)| (*id, t.belief)).collect();
    let pool: Vec<(TestId, f64)> =
        beliefs.iter().filter(|(id, _)| !state.anchors.contains(id)).map(|(id, b)| (*id, b.probability())).collect();
    let n_target = offspring_target(pool.len(), config.offspring_rate);
    step.record.n_target = n_target;

    let mut elites = select_test_elites(&beliefs, step.matrix, &state.anchors);
    let mut evolved: Vec<TestId> = elites.iter().copied().filter(|id| !state.anchors.contains(id)).collect();
    if evolved.len() > config.test_soft_cap {
        evolved.sort_by(|a, b| beliefs[b].cmp_strength(&beliefs[a]).then_with(|| a.cmp(b)));
        for id in evolved.split_off(config.test_soft_cap) {
            elites.remove(&id);
            state.tests.remove(&id);
            step.record.deaths.push(Death { individual: ParentId::Test(id), cause: DeathCause::OverCap });
        }
    }

    let rates = config.test_op_rates.table();
    let mut children: Vec<TestDraft> = Vec::new();
    let mut attempts = 0;
    while !pool.is_empty() && children.len() < n_target && attempts < 5 * n_target {
        attempts += 1;
        let op = select_operator(&rates, step.rng);
        let parents = roulette_select(&pool, op.spec().arity, step.rng);
        let result = match op {
            OperatorName::Discriminate => match discriminating_pair(&code_beliefs, step.matrix) {
                Some((a, b)) => operators::discriminate(
                    step.ctx,
                    &state.tests[&parents[0]],
                    &state.code[&a],
                    &state.code[&b],
                    step.matrix,
                )
                .map(|(r, _)| r),
                None => Err(OperatorError::Inapplicable("no two distinct behaviour blocks".into())),
            },
            OperatorName::EdgeCaseGen => operators::edge_case_gen(step.ctx, &state.tests[&parents[0]]),
            OperatorName::ComplementaryCrossover => {
                operators::complementary_crossover(step.ctx, &state.tests[&parents[0]], &state.tests[&parents[1]])
            }
            other => unreachable!("{other:?} is not a unit-test operator"),
        };
        let drafts = step.absorb(op, result)?;
        children.extend(drafts.into_iter().take(n_target - children.len()));
    }
    if children.len() < n_target {
        step.record.warnings.push(format!("test evolution produced {} of {n_target} offspring", children.len()));
    }
    step.record.offspring = children.len();

    for (a, b) in equivalent_pairs(&code_beliefs, step.matrix, config.diff_blocks_per_generation) {
        let passing: Vec<&TestCase> = shared_passes(step.matrix, a, b).iter().map(|t| &state.tests[t]).collect();
        let seed: u64 = step.rng.gen();
        let result = divergence_discovery(
            step.ctx,
            &state.code[&a],
            &state.code[&b],
            &passing,
            config.diff_inputs_per_pair,
            config.diff_samples,
            seed,
        );
        let result = result.map(|(r, report)| {
            step.record
                .warnings
                .extend(report.generator_failure.map(|f| format!("divergence {a}/{b}: generator failed: {f}")));
            r
        });
        let drafts = step.absorb(OperatorName::DivergenceDiscovery, result)?;
        children.extend(drafts);
    }

    let replaced: BTreeSet<TestId> = children.iter().filter_map(|c| c.replaces).collect();
    for id in beliefs.keys() {
        let cause = if replaced.contains(id) {
            DeathCause::Replaced
        } else if !elites.contains(id) {
            DeathCause::NotElite
        } else {
            continue;
        };
        if state.tests.remove(id).is_some() {
            step.record.deaths.push(Death { individual: ParentId::Test(*id), cause });
        }
    }
    let limit = config.limit();
    for draft in children {
        let parent_beliefs: Vec<Belief> = draft
            .parents
            .iter()
            .filter_map(|p| match p {
                ParentId::Test(t) => beliefs.get(t).copied(),
                ParentId::Code(_) => None,
            })
            .collect();
        let belief = match draft.belief {
            DraftBelief::MinOfParents if !parent_beliefs.is_empty() => assign_offspring_belief(&parent_beliefs),
            _ => Belief::from_probability(config.b_init, limit),
        };
        let id = state.next_test_id();
        let test = TestCase {
            id,
            kind: draft.kind,
            input: draft.input,
            expected_output: draft.expected_output,
            comparison: step.ctx.problem.comparison,
            belief,
            lineage: Lineage { operator: draft.origin, parents: draft.parents, generation: step.record.index + 1 },
            alive: true,
        };
        step.record.births.push(Birth {
            individual: ParentId::Test(id),
            kind: Some(test.kind),
            lineage: test.lineage.clone(),
            belief,
            digest: source_digest(&format!("{}\0{}", test.input, test.expected_output)),
        });
        state.tests.insert(id, test);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offspring_ceiling() {
        assert_eq!(offspring_target(10, 0.3), 3);
        assert_eq!(offspring_target(20, 0.3), 6);
        assert_eq!(offspring_target(11, 0.3), 4);
        assert_eq!(offspring_target(1, 0.3), 1);
        assert_eq!(offspring_target(0, 0.3), 0);
    }
}
