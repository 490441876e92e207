use std::collections::BTreeMap;

use rand::Rng;

use super::{CodeDraft, OperatorContext, OperatorError, OperatorResult};
use crate::belief::{Belief, Outcome};
use crate::gateway::extract_code_blocks;
use crate::population::{
    rank_sample, CodeCandidate, CodeId, ExecutionCause, ObservationMatrix, Origin, TestCase, TestId,
};

/// One entry of a repair prompt's context.
#[derive(Debug, Clone)]
pub struct FailingTest<'a> {
    pub test: &'a TestCase,
    pub cause: ExecutionCause,
}

/// Up to `k` tests that `code` fails, drawn by belief rank so that trusted
/// tests dominate the repair context.
pub fn failing_context<R: Rng + ?Sized>(
    code: CodeId,
    matrix: &ObservationMatrix,
    test_beliefs: &BTreeMap<TestId, Belief>,
    k: usize,
    rng: &mut R,
) -> Vec<(TestId, ExecutionCause)> {
    let Some(row) = matrix.row_index(code) else {
        return Vec::new();
    };
    let failing: Vec<(TestId, f64)> = matrix
        .cols()
        .iter()
        .enumerate()
        .filter(|(j, _)| matrix.get(row, *j) == Outcome::Fail)
        .filter_map(|(_, t)| test_beliefs.get(t).map(|b| (*t, b.probability())))
        .collect();
    rank_sample(&failing, k, rng)
        .into_iter()
        .map(|t| (t, matrix.cause(row, matrix.col_index(t).expect("sampled from matrix columns"))))
        .collect()
}

fn single(ctx: &OperatorContext, text: &str) -> Result<String, String> {
    ctx.validated_code(text)
}

pub fn semantic_crossover(
    ctx: &OperatorContext,
    a: &CodeCandidate,
    b: &CodeCandidate,
) -> Result<OperatorResult<CodeDraft>, OperatorError> {
    if a.id == b.id {
        return Err(OperatorError::Inapplicable("crossover needs two distinct parents".into()));
    }
    let mut vars = ctx.base_vars();
    vars.insert("parent_a".into(), a.source.clone());
    vars.insert("parent_b".into(), b.source.clone());
    let mut transcripts = Vec::new();
    let source = ctx.invoke("semantic_crossover", "semantic_crossover", vars, &mut transcripts, |t| single(ctx, t))?;
    let child = CodeDraft { source, origin: Origin::SemanticCrossover, parents: vec![a.id, b.id] };
    Ok(OperatorResult::new(vec![child], transcripts))
}

fn describe_failures(ctx: &OperatorContext, parent: &CodeCandidate, failing: &[FailingTest]) -> String {
    let mut out = String::new();
    for (i, f) in failing.iter().enumerate() {
        out.push_str(&format!(
            "Test {} (belief {:.3}, result: {:?})\nINPUT:\n{}OUTPUT:\n{}",
            i + 1,
            f.test.belief.probability(),
            f.cause,
            f.test.input,
            f.test.expected_output
        ));
        if let Some(trace) = ctx.executor.trace(&parent.source, f.test) {
            out.push_str("Trace:\n");
            out.push_str(&trace);
        }
        out.push('\n');
    }
    out
}

pub fn debug(
    ctx: &OperatorContext,
    parent: &CodeCandidate,
    failing: &[FailingTest],
) -> Result<OperatorResult<CodeDraft>, OperatorError> {
    if failing.is_empty() {
        return Err(OperatorError::Inapplicable(format!("{} fails no tests", parent.id)));
    }
    let mut vars = ctx.base_vars();
    vars.insert("parent".into(), parent.source.clone());
    vars.insert("failing_tests".into(), describe_failures(ctx, parent, failing));
    let mut transcripts = Vec::new();
    let source = ctx.invoke("debug", "debug", vars, &mut transcripts, |t| single(ctx, t))?;
    let child = CodeDraft { source, origin: Origin::Debug, parents: vec![parent.id] };
    Ok(OperatorResult::new(vec![child], transcripts))
}

pub fn reimplement(ctx: &OperatorContext, parent: &CodeCandidate) -> Result<OperatorResult<CodeDraft>, OperatorError> {
    let mut vars = ctx.base_vars();
    vars.insert("parent".into(), parent.source.clone());
    let mut transcripts = Vec::new();
    let source = ctx.invoke("reimplement", "reimplement", vars, &mut transcripts, |t| single(ctx, t))?;
    let child = CodeDraft { source, origin: Origin::Reimplement, parents: vec![parent.id] };
    Ok(OperatorResult::new(vec![child], transcripts))
}

/// Asks for `count` solutions in one completion. Blocks that fail validation
/// are dropped; a reply with no valid block is retried.
pub fn initial_code(ctx: &OperatorContext, count: usize) -> Result<OperatorResult<CodeDraft>, OperatorError> {
    let mut vars = ctx.base_vars();
    vars.insert("count".into(), count.to_string());
    let mut transcripts = Vec::new();
    let sources = ctx.invoke("init_code", "init_code", vars, &mut transcripts, |text| {
        let valid: Vec<String> =
            extract_code_blocks(text).into_iter().filter(|s| ctx.executor.validate(s).is_ok()).take(count).collect();
        if valid.is_empty() {
            Err("no valid program in reply".into())
        } else {
            Ok(valid)
        }
    })?;
    let children =
        sources.into_iter().map(|source| CodeDraft { source, origin: Origin::Init, parents: Vec::new() }).collect();
    Ok(OperatorResult::new(children, transcripts))
}
