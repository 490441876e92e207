use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::belief::{Belief, EPSILON};
use crate::engine::RunConfig;
use crate::population::{Comparison, Lineage, Origin, TestCase, TestId, TestKind};
use crate::sandbox::Runtime;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse problem: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub input: String,
    pub output: String,
}

/// One programming problem: statement, public examples and how to run a
/// candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub id: String,
    pub statement: String,
    #[serde(default)]
    pub public_examples: Vec<Example>,
    #[serde(default = "Runtime::python3")]
    pub candidate_runtime: Runtime,
    #[serde(default)]
    pub comparison: Comparison,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
}

fn ensure_newline(s: &str) -> String {
    if s.is_empty() || s.ends_with('\n') {
        s.to_string()
    } else {
        format!("{s}\n")
    }
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProblemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProblemError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self, anchoring: bool) -> Result<(), ProblemError> {
        if self.statement.trim().is_empty() {
            return Err(ProblemError::Invalid("empty statement".into()));
        }
        if anchoring && self.public_examples.is_empty() {
            return Err(ProblemError::Invalid(format!(
                "problem {} has no public examples; anchoring needs at least one",
                self.id
            )));
        }
        if !self.candidate_runtime.command.contains(crate::sandbox::SOURCE_PLACEHOLDER) {
            return Err(ProblemError::Invalid("runtime command must contain {source_path}".into()));
        }
        Ok(())
    }

    /// Maps a LiveCodeBench-style record (`question_id`, `question_content`,
    /// `public_test_cases` as a JSON string or array, `difficulty`).
    pub fn from_livecodebench(record: &Value, runtime: Runtime) -> Result<Self, ProblemError> {
        let field = |name: &str| record.get(name).and_then(Value::as_str);
        let id = field("question_id")
            .map(str::to_string)
            .or_else(|| record.get("question_id").map(|v| v.to_string()))
            .ok_or_else(|| ProblemError::Invalid("missing question_id".into()))?;
        let statement = field("question_content")
            .ok_or_else(|| ProblemError::Invalid("missing question_content".into()))?
            .to_string();
        let cases: Value = match record.get("public_test_cases") {
            Some(Value::String(s)) => serde_json::from_str(s)?,
            Some(v) => v.clone(),
            None => Value::Array(Vec::new()),
        };
        let mut public_examples = Vec::new();
        for case in cases.as_array().into_iter().flatten() {
            if case.get("testtype").and_then(Value::as_str).is_some_and(|t| t != "stdin") {
                continue;
            }
            let (Some(input), Some(output)) =
                (case.get("input").and_then(Value::as_str), case.get("output").and_then(Value::as_str))
            else {
                return Err(ProblemError::Invalid("public test case without input/output".into()));
            };
            public_examples.push(Example { input: ensure_newline(input), output: ensure_newline(output) });
        }
        Ok(Self {
            id,
            statement,
            public_examples,
            candidate_runtime: runtime,
            comparison: Comparison::WhitespaceNormalized,
            difficulty: field("difficulty").map(str::to_string),
        })
    }
}

/// One test per public example. With anchoring on they are anchors held at
/// `1 - EPSILON`; otherwise ordinary unit tests at the prior.
pub fn extract_anchors(problem: &ProblemSpec, config: &RunConfig) -> Result<Vec<TestCase>, ProblemError> {
    if config.anchoring_enabled && problem.public_examples.is_empty() {
        return Err(ProblemError::Invalid("anchoring enabled but the problem has no public examples".into()));
    }
    let limit = config.limit();
    let (kind, belief) = if config.anchoring_enabled {
        (TestKind::Anchor, Belief::from_probability(1.0 - EPSILON, limit))
    } else {
        (TestKind::Unit, Belief::from_probability(config.b_init, limit))
    };
    Ok(problem
        .public_examples
        .iter()
        .enumerate()
        .map(|(i, ex)| TestCase {
            id: TestId(i as u32),
            kind,
            input: ex.input.clone(),
            expected_output: ex.output.clone(),
            comparison: problem.comparison,
            belief,
            lineage: Lineage::root(Origin::Anchor),
            alive: true,
        })
        .collect())
}
