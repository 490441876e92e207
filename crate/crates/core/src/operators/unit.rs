use super::{DraftBelief, OperatorContext, OperatorError, OperatorResult, TestDraft};
use crate::belief::Outcome;
use crate::gateway::{extract_tests, extract_verdict, TestPair, Verdict};
use crate::population::{CodeCandidate, ObservationMatrix, Origin, ParentId, TestCase, TestKind};

/// Prompt branch chosen from a test's outcomes on the code pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscriminateBranch {
    /// Both pass: look for a latent bug in the weaker candidate.
    Expose,
    /// One passes: sharpen the test around the failure.
    Refine,
    /// Both fail: separate the two failure modes.
    Separate,
}

impl DiscriminateBranch {
    pub fn from_outcomes(a: Outcome, b: Outcome) -> Self {
        match (a, b) {
            (Outcome::Pass, Outcome::Pass) => Self::Expose,
            (Outcome::Fail, Outcome::Fail) => Self::Separate,
            _ => Self::Refine,
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            Self::Expose => "discriminate_expose",
            Self::Refine => "discriminate_refine",
            Self::Separate => "discriminate_separate",
        }
    }
}

fn first_test(text: &str) -> Result<TestPair, String> {
    extract_tests(text)
        .map(|p| p.tests.into_iter().next().expect("extract_tests never returns an empty list"))
        .map_err(|e| e.to_string())
}

fn unit_child(pair: TestPair, origin: Origin, parents: Vec<ParentId>) -> TestDraft {
    TestDraft {
        input: pair.input,
        expected_output: pair.output,
        kind: TestKind::Unit,
        origin,
        parents,
        replaces: None,
        belief: DraftBelief::MinOfParents,
    }
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Pass => "passes",
        Outcome::Fail => "fails",
    }
}

/// `a` should be the stronger of the pair.
pub fn discriminate(
    ctx: &OperatorContext,
    test: &TestCase,
    a: &CodeCandidate,
    b: &CodeCandidate,
    matrix: &ObservationMatrix,
) -> Result<(OperatorResult<TestDraft>, DiscriminateBranch), OperatorError> {
    let (Some(oa), Some(ob)) = (matrix.outcome(a.id, test.id), matrix.outcome(b.id, test.id)) else {
        return Err(OperatorError::Inapplicable(format!("{} has not been run against the pair", test.id)));
    };
    let branch = DiscriminateBranch::from_outcomes(oa, ob);
    let mut vars = ctx.base_vars();
    vars.insert("test_input".into(), test.input.clone());
    vars.insert("test_output".into(), test.expected_output.clone());
    vars.insert("code_a".into(), a.source.clone());
    vars.insert("code_b".into(), b.source.clone());
    vars.insert("outcome_a".into(), outcome_word(oa).into());
    vars.insert("outcome_b".into(), outcome_word(ob).into());
    let mut transcripts = Vec::new();
    let pair = ctx.invoke("discriminate", branch.template(), vars, &mut transcripts, first_test)?;
    let child = unit_child(pair, Origin::Discriminate, vec![ParentId::Test(test.id)]);
    Ok((OperatorResult::new(vec![child], transcripts), branch))
}

pub fn complementary_crossover(
    ctx: &OperatorContext,
    a: &TestCase,
    b: &TestCase,
) -> Result<OperatorResult<TestDraft>, OperatorError> {
    if a.id == b.id {
        return Err(OperatorError::Inapplicable("crossover needs two distinct parents".into()));
    }
    let mut vars = ctx.base_vars();
    vars.insert("input_a".into(), a.input.clone());
    vars.insert("output_a".into(), a.expected_output.clone());
    vars.insert("input_b".into(), b.input.clone());
    vars.insert("output_b".into(), b.expected_output.clone());
    let mut transcripts = Vec::new();
    let pair = ctx.invoke("complementary_crossover", "complementary_crossover", vars, &mut transcripts, first_test)?;
    let child = unit_child(pair, Origin::ComplementaryCrossover, vec![ParentId::Test(a.id), ParentId::Test(b.id)]);
    Ok(OperatorResult::new(vec![child], transcripts))
}

/// Audits `parent`; a `repair` verdict yields a replacement for it, a `valid`
/// verdict a new boundary test alongside it.
pub fn edge_case_gen(ctx: &OperatorContext, parent: &TestCase) -> Result<OperatorResult<TestDraft>, OperatorError> {
    if parent.is_anchor() {
        return Err(OperatorError::Inapplicable("anchors are immutable".into()));
    }
    let mut vars = ctx.base_vars();
    vars.insert("test_input".into(), parent.input.clone());
    vars.insert("test_output".into(), parent.expected_output.clone());
    let mut transcripts = Vec::new();
    let (verdict, pair) = ctx.invoke("edge_case_gen", "edge_case_gen", vars, &mut transcripts, |text| {
        let verdict = extract_verdict(text).map_err(|e| e.to_string())?;
        Ok((verdict, first_test(text)?))
    })?;
    let mut child = unit_child(pair, Origin::EdgeCaseGen, vec![ParentId::Test(parent.id)]);
    if verdict == Verdict::Repair {
        child.replaces = Some(parent.id);
    }
    let mut result = OperatorResult::new(vec![child], transcripts);
    result.audit = Some(verdict);
    Ok(result)
}

/// Asks for `count` tests in one completion; malformed entries are dropped.
pub fn initial_tests(ctx: &OperatorContext, count: usize) -> Result<OperatorResult<TestDraft>, OperatorError> {
    let mut vars = ctx.base_vars();
    vars.insert("count".into(), count.to_string());
    let mut transcripts = Vec::new();
    let pairs = ctx.invoke("init_tests", "init_tests", vars, &mut transcripts, |text| {
        extract_tests(text).map(|p| p.tests).map_err(|e| e.to_string())
    })?;
    let children = pairs
        .into_iter()
        .take(count)
        .map(|p| {
            let mut draft = unit_child(p, Origin::Init, Vec::new());
            draft.belief = DraftBelief::Prior;
            draft
        })
        .collect();
    Ok(OperatorResult::new(children, transcripts))
}
