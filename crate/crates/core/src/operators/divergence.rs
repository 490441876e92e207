use std::collections::BTreeSet;

use super::{DraftBelief, OperatorContext, OperatorError, OperatorResult, TestDraft};
use crate::population::{CodeCandidate, Origin, ParentId, TestCase, TestKind};
use crate::sandbox::{compare_outputs, Capture};

/// What happened while hunting for diverging inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DivergenceReport {
    pub sampled_inputs: usize,
    pub diverging_inputs: usize,
    /// Inputs on which either twin crashed or timed out.
    pub skipped_inputs: usize,
    pub generator_failure: Option<String>,
}

/// Splits generator output on `---` lines into newline-terminated inputs.
pub fn split_generated_inputs(stdout: &str) -> Vec<String> {
    let mut inputs = Vec::new();
    let mut seen = BTreeSet::new();
    for chunk in stdout.split('\n').collect::<Vec<_>>().split(|l| l.trim() == "---") {
        let start = chunk.iter().position(|l| !l.trim().is_empty());
        let end = chunk.iter().rposition(|l| !l.trim().is_empty());
        if let (Some(s), Some(e)) = (start, end) {
            let mut input = chunk[s..=e].join("\n");
            input.push('\n');
            if seen.insert(input.clone()) {
                inputs.push(input);
            }
        }
    }
    inputs
}

fn format_passing(tests: &[&TestCase]) -> String {
    let mut out = String::new();
    for t in tests {
        out.push_str(&format!("INPUT:\n{}OUTPUT:\n{}---\n", t.input, t.expected_output));
    }
    out
}

/// Asks for an input generator, runs it with `seed` on stdin, and emits two
/// competing diff tests for each of the first `k_inputs` inputs on which the
/// twins disagree.
pub fn divergence_discovery(
    ctx: &OperatorContext,
    a: &CodeCandidate,
    b: &CodeCandidate,
    passing: &[&TestCase],
    k_inputs: usize,
    samples: usize,
    seed: u64,
) -> Result<(OperatorResult<TestDraft>, DivergenceReport), OperatorError> {
    if a.id == b.id {
        return Err(OperatorError::Inapplicable("divergence needs two distinct candidates".into()));
    }
    let mut vars = ctx.base_vars();
    vars.insert("code_a".into(), a.source.clone());
    vars.insert("code_b".into(), b.source.clone());
    vars.insert("passing_tests".into(), format_passing(passing));
    vars.insert("samples".into(), samples.to_string());
    let mut transcripts = Vec::new();
    let generator =
        ctx.invoke("divergence_discovery", "divergence_discovery", vars, &mut transcripts, |t| ctx.validated_code(t))?;

    let mut report = DivergenceReport::default();
    let mut children = Vec::new();
    let stdout = match ctx.executor.run_capture(&generator, &format!("{seed}\n"))? {
        Capture::Output(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
        Capture::Failed { cause, stderr } => {
            report.generator_failure = Some(format!("{cause:?}: {}", String::from_utf8_lossy(&stderr).trim()));
            return Ok((OperatorResult::new(children, transcripts), report));
        }
    };

    let comparison = ctx.problem.comparison;
    for input in split_generated_inputs(&stdout) {
        if report.diverging_inputs >= k_inputs {
            break;
        }
        report.sampled_inputs += 1;
        let (Capture::Output(out_a), Capture::Output(out_b)) =
            (ctx.executor.run_capture(&a.source, &input)?, ctx.executor.run_capture(&b.source, &input)?)
        else {
            report.skipped_inputs += 1;
            continue;
        };
        if compare_outputs(&out_a, &out_b, comparison) {
            continue;
        }
        report.diverging_inputs += 1;
        for out in [out_a, out_b] {
            children.push(TestDraft {
                input: input.clone(),
                expected_output: String::from_utf8_lossy(&out).into_owned(),
                kind: TestKind::Diff,
                origin: Origin::DivergenceDiscovery,
                parents: vec![ParentId::Code(a.id), ParentId::Code(b.id)],
                replaces: None,
                belief: DraftBelief::Prior,
            });
        }
    }
    Ok((OperatorResult::new(children, transcripts), report))
}
