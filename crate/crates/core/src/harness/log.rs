//! JSONL run log. One event per line; the last line carries the SHA-256 of
//! every preceding line (including their newlines).

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ProblemSpec;
use crate::engine::{GenerationRecord, RunConfig, RunObserver, RunResult};
use crate::gateway::CompletionTranscript;
use crate::operators::prompts;
use crate::population::{CodeCandidate, CodeId, TestCase, TestId};

pub const LOG_FORMAT: &str = "bace-runlog";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub best_code: CodeCandidate,
    pub best_passes_anchors: bool,
    pub final_code: Vec<CodeId>,
    pub final_tests: Vec<TestId>,
}

impl From<&RunResult> for ResultSummary {
    fn from(r: &RunResult) -> Self {
        Self {
            best_code: r.best_code.clone(),
            best_passes_anchors: r.best_passes_anchors,
            final_code: r.final_code.iter().map(|c| c.id).collect(),
            final_tests: r.final_tests.iter().map(|t| t.id).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEvent {
    Header { format: String, version: u32, template_version: String, templates_digest: String },
    Config { config: Box<RunConfig> },
    Problem { problem: Box<ProblemSpec> },
    Init { code: Vec<CodeCandidate>, tests: Vec<TestCase> },
    Transcript { transcript: Box<CompletionTranscript> },
    Generation { record: Box<GenerationRecord> },
    Result { result: Box<ResultSummary> },
    Digest { sha256: String },
}

/// Streams events to a writer while hashing them.
pub struct RunLogWriter<W: Write> {
    out: W,
    hasher: Sha256,
    error: Option<io::Error>,
}

impl RunLogWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, hasher: Sha256::new(), error: None }
    }

    pub fn write_event(&mut self, event: &LogEvent) {
        if self.error.is_some() {
            return;
        }
        let mut line = serde_json::to_string(event).expect("log events serialize");
        line.push('\n');
        self.hasher.update(line.as_bytes());
        if let Err(e) = self.out.write_all(line.as_bytes()) {
            self.error = Some(e);
        }
    }

    /// Writes the header, config and problem events.
    pub fn begin(&mut self, config: &RunConfig, problem: &ProblemSpec) {
        self.write_event(&LogEvent::Header {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            template_version: prompts::TEMPLATE_VERSION.into(),
            templates_digest: prompts::templates_digest(),
        });
        self.write_event(&LogEvent::Config { config: Box::new(config.clone()) });
        self.write_event(&LogEvent::Problem { problem: Box::new(problem.clone()) });
    }

    /// Writes the result and digest lines; returns the digest.
    pub fn finish(mut self, result: &RunResult) -> io::Result<String> {
        self.write_event(&LogEvent::Result { result: Box::new(result.into()) });
        self.close()
    }

    /// Seals a log without a result, e.g. after an aborted run.
    pub fn close(mut self) -> io::Result<String> {
        let digest = hex::encode(self.hasher.clone().finalize());
        let line = serde_json::to_string(&LogEvent::Digest { sha256: digest.clone() }).expect("digest serializes");
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(digest)
    }
}

impl<W: Write> RunObserver for RunLogWriter<W> {
    fn initialized(&mut self, code: &[CodeCandidate], tests: &[TestCase]) {
        self.write_event(&LogEvent::Init { code: code.to_vec(), tests: tests.to_vec() });
    }

    fn transcript(&mut self, transcript: &CompletionTranscript) {
        self.write_event(&LogEvent::Transcript { transcript: Box::new(transcript.clone()) });
    }

    fn generation(&mut self, record: &GenerationRecord) {
        self.write_event(&LogEvent::Generation { record: Box::new(record.clone()) });
    }
}

/// A parsed, digest-checked run log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub config: RunConfig,
    pub problem: ProblemSpec,
    pub init_code: Vec<CodeCandidate>,
    pub init_tests: Vec<TestCase>,
    pub transcripts: Vec<CompletionTranscript>,
    pub generations: Vec<GenerationRecord>,
    pub result: Option<ResultSummary>,
    pub digest: String,
}

impl RunLog {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, LogError> {
        let mut hasher = Sha256::new();
        let mut config = None;
        let mut problem = None;
        let mut init = None;
        let mut transcripts = Vec::new();
        let mut generations = Vec::new();
        let mut result = None;
        let mut digest = None;
        let mut header = false;

        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let corrupt = |message: String| LogError::Corrupt { line: lineno, message };
            if digest.is_some() {
                return Err(corrupt("content after digest line".into()));
            }
            let event: LogEvent = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            if !header && !matches!(event, LogEvent::Header { .. }) {
                return Err(corrupt("missing header".into()));
            }
            match event {
                LogEvent::Header { format, version, .. } => {
                    if header || format != LOG_FORMAT || version != LOG_VERSION {
                        return Err(corrupt(format!("unexpected header {format} v{version}")));
                    }
                    header = true;
                }
                LogEvent::Config { config: c } => config = Some(*c),
                LogEvent::Problem { problem: p } => problem = Some(*p),
                LogEvent::Init { code, tests } => init = Some((code, tests)),
                LogEvent::Transcript { transcript } => transcripts.push(*transcript),
                LogEvent::Generation { record } => {
                    if !record.verify() {
                        return Err(corrupt(format!("matrix digest mismatch in generation {}", record.index)));
                    }
                    if record.index as usize != generations.len() {
                        return Err(corrupt(format!("generation {} out of order", record.index)));
                    }
                    generations.push(*record);
                }
                LogEvent::Result { result: r } => result = Some(*r),
                LogEvent::Digest { sha256 } => {
                    let actual = hex::encode(hasher.clone().finalize());
                    if actual != sha256 {
                        return Err(corrupt(format!("digest mismatch: recorded {sha256}, computed {actual}")));
                    }
                    digest = Some(sha256);
                    continue;
                }
            }
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }

        let missing = |what: &str| LogError::Corrupt { line: 0, message: format!("log has no {what}") };
        // Runs that abort during initialization have no init event.
        let (init_code, init_tests) = init.unwrap_or_default();
        Ok(Self {
            config: config.ok_or_else(|| missing("config"))?,
            problem: problem.ok_or_else(|| missing("problem"))?,
            init_code,
            init_tests,
            transcripts,
            generations,
            result,
            digest: digest.ok_or_else(|| missing("digest line"))?,
        })
    }
}
