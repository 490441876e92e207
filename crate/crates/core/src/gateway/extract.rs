//! Pulling structured payloads out of free-form completions.
//!
//! Generated tests use a fenced block of sentinel lines:
//!
//! ~~~text
//! ```tests
//! INPUT:
//! 1 2
//! OUTPUT:
//! 3
//! ---
//! INPUT:
//! -4 4
//! OUTPUT:
//! 0
//! ```
//! ~~~
//!
//! An entry is an `INPUT:` section followed by an `OUTPUT:` section; entries
//! end at `---`, at the next `INPUT:`, or at the end of the block. Content may
//! also follow the sentinel on the same line (`INPUT: 5`).

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("completion contained no usable payload")]
    Empty,
    #[error("completion contained no well-formed test entries ({0} malformed)")]
    NoTests(usize),
    #[error("missing audit verdict")]
    NoVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestPair {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTests {
    pub tests: Vec<TestPair>,
    pub warnings: Vec<String>,
}

struct Fence {
    info: String,
    body: String,
}

fn fences(text: &str) -> Vec<Fence> {
    let mut out = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match current.take() {
                Some((info, lines)) => out.push(Fence { info, body: lines.join("\n") }),
                None => current = Some((rest.trim().to_string(), Vec::new())),
            }
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        }
    }
    // An unterminated fence runs to the end of the text.
    if let Some((info, lines)) = current {
        out.push(Fence { info, body: lines.join("\n") });
    }
    out
}

/// Content of the first fenced block, or the whole trimmed text when there
/// is none.
pub fn extract_code_block(text: &str) -> Result<String, ParseError> {
    let body = match fences(text).into_iter().next() {
        Some(f) => f.body,
        None => text.trim().to_string(),
    };
    if body.trim().is_empty() {
        Err(ParseError::Empty)
    } else {
        Ok(body)
    }
}

/// Contents of every non-empty fenced block, in order. Used for batched
/// responses that carry several programs.
pub fn extract_code_blocks(text: &str) -> Vec<String> {
    fences(text).into_iter().filter(|f| f.info != "tests" && !f.body.trim().is_empty()).map(|f| f.body).collect()
}

fn payload(lines: &[&str]) -> Option<String> {
    let start = lines.iter().position(|l| !l.trim().is_empty())?;
    let end = lines.iter().rposition(|l| !l.trim().is_empty())? + 1;
    let mut s = lines[start..end].join("\n");
    s.push('\n');
    Some(s)
}

#[derive(PartialEq)]
enum Section {
    Idle,
    Input,
    Output,
    Skipping,
}

/// Parses every test entry in `text`. Malformed entries are skipped with a
/// warning; zero well-formed entries is an error.
pub fn extract_tests(text: &str) -> Result<ParsedTests, ParseError> {
    let blocks: Vec<String> = fences(text)
        .into_iter()
        .filter(|f| f.info == "tests" || f.body.lines().any(|l| l.trim_start().starts_with("INPUT:")))
        .map(|f| f.body)
        .collect();
    let regions = if blocks.is_empty() { vec![text.to_string()] } else { blocks };

    let mut tests = Vec::new();
    let mut warnings = Vec::new();
    let mut malformed = 0usize;

    for region in &regions {
        let mut section = Section::Idle;
        let mut input: Vec<&str> = Vec::new();
        let mut output: Vec<&str> = Vec::new();
        let mut entry_no = 0usize;

        let mut finish = |section: &Section, input: &mut Vec<&str>, output: &mut Vec<&str>, entry_no: usize| {
            match section {
                Section::Idle => {}
                Section::Skipping => {
                    malformed += 1;
                    warnings.push(format!("entry {entry_no}: OUTPUT without INPUT"));
                }
                Section::Input => {
                    malformed += 1;
                    warnings.push(format!("entry {entry_no}: INPUT without OUTPUT"));
                }
                Section::Output => match (payload(input), payload(output)) {
                    (Some(i), Some(o)) => tests.push(TestPair { input: i, output: o }),
                    _ => {
                        malformed += 1;
                        warnings.push(format!("entry {entry_no}: empty INPUT or OUTPUT"));
                    }
                },
            }
            input.clear();
            output.clear();
        };

        for line in region.lines() {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix("INPUT:") {
                finish(&section, &mut input, &mut output, entry_no);
                entry_no += 1;
                section = Section::Input;
                if !rest.trim().is_empty() {
                    input.push(rest.trim_start());
                }
            } else if let Some(rest) = t.strip_prefix("OUTPUT:") {
                match section {
                    Section::Input => {
                        section = Section::Output;
                        if !rest.trim().is_empty() {
                            output.push(rest.trim_start());
                        }
                    }
                    Section::Output | Section::Idle => {
                        finish(&section, &mut input, &mut output, entry_no);
                        entry_no += 1;
                        section = Section::Skipping;
                    }
                    Section::Skipping => {}
                }
            } else if t == "---" {
                finish(&section, &mut input, &mut output, entry_no);
                section = Section::Idle;
            } else {
                match section {
                    Section::Input => input.push(line),
                    Section::Output => output.push(line),
                    Section::Idle | Section::Skipping => {}
                }
            }
        }
        finish(&section, &mut input, &mut output, entry_no);
    }

    if tests.is_empty() {
        return Err(ParseError::NoTests(malformed));
    }
    Ok(ParsedTests { tests, warnings })
}

/// Audit verdict for the edge-case operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Repair,
}

/// Reads the first `VERDICT: valid|repair` line.
pub fn extract_verdict(text: &str) -> Result<Verdict, ParseError> {
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix("VERDICT:") {
            match rest.trim().to_ascii_lowercase().as_str() {
                "valid" => return Ok(Verdict::Valid),
                "repair" | "repaired" | "invalid" => return Ok(Verdict::Repair),
                _ => {}
            }
        }
    }
    Err(ParseError::NoVerdict)
}
