//! Prompt templates. Assets are plain text with `{name}` placeholders and are
//! compiled into the binary so a given release always renders identical
//! prompts.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub const TEMPLATE_VERSION: &str = "1";

pub const TEMPLATES: &[(&str, &str)] = &[
    ("init_code", include_str!("../../assets/prompts/init_code.txt")),
    ("init_tests", include_str!("../../assets/prompts/init_tests.txt")),
    ("semantic_crossover", include_str!("../../assets/prompts/semantic_crossover.txt")),
    ("debug", include_str!("../../assets/prompts/debug.txt")),
    ("reimplement", include_str!("../../assets/prompts/reimplement.txt")),
    ("discriminate_expose", include_str!("../../assets/prompts/discriminate_expose.txt")),
    ("discriminate_refine", include_str!("../../assets/prompts/discriminate_refine.txt")),
    ("discriminate_separate", include_str!("../../assets/prompts/discriminate_separate.txt")),
    ("complementary_crossover", include_str!("../../assets/prompts/complementary_crossover.txt")),
    ("edge_case_gen", include_str!("../../assets/prompts/edge_case_gen.txt")),
    ("divergence_discovery", include_str!("../../assets/prompts/divergence_discovery.txt")),
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    Unknown(String),
    #[error("template `{template}` needs a value for `{name}`")]
    MissingVar { template: String, name: String },
}

pub fn template(name: &str) -> Result<&'static str, TemplateError> {
    TEMPLATES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| TemplateError::Unknown(name.to_string()))
}

/// Digest over every template, recorded in run logs.
pub fn templates_digest() -> String {
    let mut h = Sha256::new();
    h.update(TEMPLATE_VERSION.as_bytes());
    for (name, body) in TEMPLATES {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(body.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Replaces `{name}` placeholders (lowercase ASCII and `_`) with values.
/// Substituted values are not rescanned.
pub fn render_str(name: &str, text: &str, vars: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let key = close.map(|c| &after[..c]);
        match key {
            Some(k) if !k.is_empty() && k.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') => {
                let value = vars
                    .get(k)
                    .ok_or_else(|| TemplateError::MissingVar { template: name.to_string(), name: k.to_string() })?;
                out.push_str(value);
                rest = &after[k.len() + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

pub fn render(name: &str, vars: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    render_str(name, template(name)?, vars)
}
