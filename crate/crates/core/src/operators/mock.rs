use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::gateway::{Completion, CompletionTranscript, PromptRequest, ProviderError, TextProvider};

/// Canned responses for the offline provider.
///
/// Responses are looked up by template name, then by task name, then fall
/// back to `default`; each list is cycled in call order. `${name}` inside a
/// response is replaced with the request variable of that name, which lets a
/// script echo a parent back (`"```\n${parent}\n# tweak\n```"`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub responses: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub default: Option<String>,
}

/// Deterministic, offline [`TextProvider`] driven by a [`MockScript`].
#[derive(Debug)]
pub struct MockProvider {
    script: MockScript,
    counters: Mutex<BTreeMap<String, usize>>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        Self { script, counters: Mutex::new(BTreeMap::new()), calls: AtomicUsize::new(0) }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ProviderError::Setup(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text).map_err(|e| ProviderError::Setup(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn pick(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let list = self
            .script
            .responses
            .get(&request.template)
            .map(|l| (request.template.as_str(), l))
            .or_else(|| self.script.responses.get(&request.task).map(|l| (request.task.as_str(), l)))
            .filter(|(_, l)| !l.is_empty());
        match list {
            Some((key, responses)) => {
                let mut counters = self.counters.lock().expect("mock counters");
                let n = counters.entry(key.to_string()).or_insert(0);
                let text = responses[*n % responses.len()].clone();
                *n += 1;
                Ok(text)
            }
            None => self.script.default.clone().ok_or_else(|| ProviderError::NoMockResponse(request.template.clone())),
        }
    }
}

fn substitute(text: &str, vars: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find("${") {
        out.push_str(&rest[..i]);
        let after = &rest[i + 2..];
        match after.find('}').map(|j| (&after[..j], j)) {
            Some((key, j)) if vars.contains_key(key) => {
                out.push_str(&vars[key]);
                rest = &after[j + 1..];
            }
            _ => {
                out.push_str("${");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

impl TextProvider for MockProvider {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = substitute(&self.pick(request)?, &request.vars);
        Ok(Completion {
            transcript: CompletionTranscript {
                task: request.task.clone(),
                template: request.template.clone(),
                request_digest: request.digest(),
                prompt: request.prompt.clone(),
                response: text.clone(),
                latency_ms: 0,
                retry_count: 0,
            },
            text,
        })
    }
}

/// Provider backed by a closure; handy in tests.
pub struct FnProvider<F>(pub F);

impl<F> TextProvider for FnProvider<F>
where
    F: Fn(&PromptRequest) -> String + Send + Sync,
{
    fn complete(&self, request: &PromptRequest) -> Result<Completion, ProviderError> {
        let text = (self.0)(request);
        Ok(Completion {
            transcript: CompletionTranscript {
                task: request.task.clone(),
                template: request.template.clone(),
                request_digest: request.digest(),
                prompt: request.prompt.clone(),
                response: text.clone(),
                latency_ms: 0,
                retry_count: 0,
            },
            text,
        })
    }
}
