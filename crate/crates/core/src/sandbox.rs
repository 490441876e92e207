//! Subprocess execution of candidate programs under resource limits.
//!
//! Each execution gets a fresh temporary working directory holding only the
//! candidate source, a cleared environment, its own process group, an
//! address-space cap, a wall-clock deadline and a cap on captured output. Tests
//! are stdin/stdout pairs. Container-grade isolation is left to the runtime
//! template, which may wrap the interpreter in an external sandbox command.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::belief::Outcome;
use crate::population::{CodeCandidate, Comparison, ExecutionCause, ObservationMatrix, TestCase};

/// Placeholder substituted with the absolute path of the written source file.
pub const SOURCE_PLACEHOLDER: &str = "{source_path}";

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("failed to launch `{command}`: {source}")]
    Launch { command: String, source: io::Error },
    #[error("invalid runtime template `{0}`")]
    Template(String),
    #[error("sandbox i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutionLimits {
    pub wall_timeout_secs: f64,
    pub memory_cap_bytes: u64,
    pub output_cap_bytes: usize,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        Self { wall_timeout_secs: 6.0, memory_cap_bytes: 512 << 20, output_cap_bytes: 1 << 20 }
    }
}

impl ExecutionLimits {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.wall_timeout_secs.is_finite() && self.wall_timeout_secs > 0.0) {
            return Err(format!("wall_timeout_secs must be positive, got {}", self.wall_timeout_secs));
        }
        if self.memory_cap_bytes == 0 || self.output_cap_bytes == 0 {
            return Err("memory and output caps must be positive".into());
        }
        Ok(())
    }
}

/// How to run a candidate: an interpreter command template and the file name
/// the source is written to, plus an optional syntax-check template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Runtime {
    pub command: String,
    #[serde(default = "default_source_file")]
    pub source_file: String,
    #[serde(default)]
    pub check: Option<String>,
}

fn default_source_file() -> String {
    "main.py".into()
}

impl Runtime {
    pub fn python3() -> Self {
        Self {
            command: "python3 {source_path}".into(),
            source_file: default_source_file(),
            check: Some("python3 -m py_compile {source_path}".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub verdict: Outcome,
    pub cause: ExecutionCause,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub duration_secs: f64,
}

/// Raw output of a run whose stdout is wanted verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Capture {
    Output(Vec<u8>),
    Failed { cause: ExecutionCause, stderr: Vec<u8> },
}

/// `exact` is byte equality; `whitespace_normalized` ignores surrounding
/// whitespace on each line and trailing blank lines.
pub fn compare_outputs(actual: &[u8], expected: &[u8], mode: Comparison) -> bool {
    match mode {
        Comparison::Exact => actual == expected,
        Comparison::WhitespaceNormalized => normalize(actual) == normalize(expected),
    }
}

fn normalize(bytes: &[u8]) -> Vec<&[u8]> {
    let mut lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').map(|line| line.trim_ascii()).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

/// What the evolution engine needs from an execution backend.
pub trait Executor: Sync {
    /// Runs every candidate against every test and returns the total matrix.
    fn run_matrix(&self, code: &[&CodeCandidate], tests: &[&TestCase]) -> Result<ObservationMatrix, ExecError>;

    /// Runs `source` on `input` and returns its raw stdout.
    fn run_capture(&self, source: &str, input: &str) -> Result<Capture, ExecError>;

    /// Structural check applied before a generated program is admitted.
    fn validate(&self, source: &str) -> Result<(), String>;

    /// Human-readable trace of a previous execution, for repair prompts.
    fn trace(&self, _source: &str, _test: &TestCase) -> Option<String> {
        None
    }
}

type CacheKey = (String, String);

enum Exit {
    Status(ExitStatus),
    TimedOut,
    Overflow,
}

struct RawRun {
    exit: Exit,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    duration: Duration,
}

#[derive(Serialize, Deserialize)]
struct DiskRecord {
    verdict: Outcome,
    cause: ExecutionCause,
    stdout: String,
    stderr: String,
    duration_secs: f64,
}

/// Process-based executor with a content-addressed outcome cache.
pub struct SandboxExecutor {
    runtime: Runtime,
    limits: ExecutionLimits,
    workers: usize,
    cache: Mutex<HashMap<CacheKey, ExecutionOutcome>>,
    cache_dir: Option<PathBuf>,
    launches: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl SandboxExecutor {
    pub fn new(runtime: Runtime, limits: ExecutionLimits) -> Self {
        let workers = thread::available_parallelism().map_or(4, |n| n.get()).min(8);
        Self {
            runtime,
            limits,
            workers,
            cache: Mutex::new(HashMap::new()),
            cache_dir: None,
            launches: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Persists outcome records as `<source digest>-<test digest>.json` under `dir`.
    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        self.cache_dir = Some(dir);
        Ok(self)
    }

    pub fn limits(&self) -> &ExecutionLimits {
        &self.limits
    }

    /// Candidate process launches so far (syntax checks excluded).
    pub fn launches(&self) -> usize {
        self.launches.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    fn source_digest(&self, source: &str) -> String {
        let mut h = Sha256::new();
        for part in [self.runtime.command.as_str(), self.runtime.source_file.as_str(), source] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }

    fn test_digest(test: &TestCase) -> String {
        let mut h = Sha256::new();
        h.update(test.input.as_bytes());
        h.update([0]);
        h.update(test.expected_output.as_bytes());
        h.update([0]);
        h.update(format!("{:?}", test.comparison).as_bytes());
        hex::encode(h.finalize())
    }

    fn lookup(&self, key: &CacheKey) -> Option<ExecutionOutcome> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let path = self.cache_dir.as_ref()?.join(format!("{}-{}.json", key.0, key.1));
        let record: DiskRecord = serde_json::from_slice(&fs::read(path).ok()?).ok()?;
        let outcome = ExecutionOutcome {
            verdict: record.verdict,
            cause: record.cause,
            stdout: record.stdout.into_bytes(),
            stderr: record.stderr.into_bytes(),
            duration_secs: record.duration_secs,
        };
        self.cache.lock().expect("cache lock").insert(key.clone(), outcome.clone());
        Some(outcome)
    }

    fn store(&self, key: CacheKey, outcome: &ExecutionOutcome) -> Result<(), ExecError> {
        if let Some(dir) = &self.cache_dir {
            let record = DiskRecord {
                verdict: outcome.verdict,
                cause: outcome.cause,
                stdout: String::from_utf8_lossy(&outcome.stdout).into_owned(),
                stderr: String::from_utf8_lossy(&outcome.stderr).into_owned(),
                duration_secs: outcome.duration_secs,
            };
            let bytes = serde_json::to_vec(&record).expect("record serializes");
            fs::write(dir.join(format!("{}-{}.json", key.0, key.1)), bytes)?;
        }
        self.cache.lock().expect("cache lock").insert(key, outcome.clone());
        Ok(())
    }

    /// Runs one candidate against one test, bypassing the cache.
    pub fn run_one(&self, source: &str, test: &TestCase) -> Result<ExecutionOutcome, ExecError> {
        self.launches.fetch_add(1, Ordering::SeqCst);
        let raw = self.launch(&self.runtime.command, source, test.input.as_bytes())?;
        let cause = match raw.exit {
            Exit::TimedOut => ExecutionCause::Timeout,
            Exit::Overflow => ExecutionCause::ResourceLimit,
            Exit::Status(status) if !status.success() => ExecutionCause::RuntimeError,
            Exit::Status(_) => {
                if compare_outputs(&raw.stdout, test.expected_output.as_bytes(), test.comparison) {
                    ExecutionCause::OutputMatch
                } else {
                    ExecutionCause::Mismatch
                }
            }
        };
        Ok(ExecutionOutcome {
            verdict: cause.is_pass().into(),
            cause,
            stdout: raw.stdout,
            stderr: raw.stderr,
            duration_secs: raw.duration.as_secs_f64(),
        })
    }

    fn launch(&self, template: &str, source: &str, stdin: &[u8]) -> Result<RawRun, ExecError> {
        let dir = tempfile::Builder::new().prefix("bace-run-").tempdir()?;
        let path = dir.path().join(&self.runtime.source_file);
        fs::write(&path, source)?;
        let argv = render_command(template, &path)?;

        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .current_dir(dir.path())
            .env_clear()
            .env("HOME", dir.path())
            .env("LANG", "C.UTF-8")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(path) = std::env::var_os("PATH") {
            cmd.env("PATH", path);
        }
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
            let cap = self.limits.memory_cap_bytes as libc::rlim_t;
            // SAFETY: setrlimit is async-signal-safe and touches no shared state.
            unsafe {
                cmd.pre_exec(move || {
                    let limit = libc::rlimit { rlim_cur: cap, rlim_max: cap };
                    libc::setrlimit(libc::RLIMIT_AS, &limit);
                    Ok(())
                });
            }
        }

        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|source| ExecError::Launch { command: argv.join(" "), source })?;

        let overflow = Arc::new(AtomicBool::new(false));
        let cap = self.limits.output_cap_bytes;
        let stdout = spawn_reader(child.stdout.take().expect("piped"), cap, Some(overflow.clone()));
        let stderr = spawn_reader(child.stderr.take().expect("piped"), cap, None);
        let mut pipe = child.stdin.take().expect("piped");
        let input = stdin.to_vec();
        let writer = thread::spawn(move || {
            let _ = pipe.write_all(&input);
        });

        let deadline = start + Duration::from_secs_f64(self.limits.wall_timeout_secs);
        let exit = loop {
            if let Some(status) = child.try_wait()? {
                break Exit::Status(status);
            }
            if overflow.load(Ordering::SeqCst) {
                kill_group(&mut child);
                break Exit::Overflow;
            }
            if Instant::now() >= deadline {
                kill_group(&mut child);
                break Exit::TimedOut;
            }
            thread::sleep(Duration::from_millis(2));
        };
        let duration = start.elapsed();
        // Reap anything the candidate left behind in its group.
        kill_group(&mut child);
        let _ = writer.join();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();
        let exit = match exit {
            Exit::Status(_) if overflow.load(Ordering::SeqCst) => Exit::Overflow,
            other => other,
        };
        Ok(RawRun { exit, stdout, stderr, duration })
    }
}

fn render_command(template: &str, path: &Path) -> Result<Vec<String>, ExecError> {
    let parts = shlex::split(template).ok_or_else(|| ExecError::Template(template.to_string()))?;
    if parts.is_empty() {
        return Err(ExecError::Template(template.to_string()));
    }
    let path = path.to_string_lossy();
    Ok(parts.into_iter().map(|p| p.replace(SOURCE_PLACEHOLDER, &path)).collect())
}

fn spawn_reader<R: Read + Send + 'static>(
    mut reader: R,
    cap: usize,
    overflow: Option<Arc<AtomicBool>>,
) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut out = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(out.len());
                    out.extend_from_slice(&buf[..n.min(room)]);
                    if n > room {
                        if let Some(flag) = &overflow {
                            flag.store(true, Ordering::SeqCst);
                        }
                    }
                }
            }
        }
        out
    })
}

fn kill_group(child: &mut Child) {
    #[cfg(unix)]
    {
        // SAFETY: plain syscall; the pid is our own child's process group.
        unsafe {
            libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
        }
    }
    #[cfg(not(unix))]
    {
        let _ = child.kill();
    }
    let _ = child.wait();
}

impl Executor for SandboxExecutor {
    fn run_matrix(&self, code: &[&CodeCandidate], tests: &[&TestCase]) -> Result<ObservationMatrix, ExecError> {
        let src_keys: Vec<String> = code.iter().map(|c| self.source_digest(&c.source)).collect();
        let test_keys: Vec<String> = tests.iter().map(|t| Self::test_digest(t)).collect();

        let mut pending: Vec<(usize, usize)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, sk) in src_keys.iter().enumerate() {
            for (j, tk) in test_keys.iter().enumerate() {
                let key = (sk.clone(), tk.clone());
                if self.lookup(&key).is_some() {
                    self.cache_hits.fetch_add(1, Ordering::SeqCst);
                } else if seen.insert(key) {
                    pending.push((i, j));
                }
            }
        }

        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Result<(), ExecError>>> = Mutex::new(Vec::new());
        thread::scope(|scope| {
            for _ in 0..self.workers.min(pending.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&(i, j)) = pending.get(k) else { break };
                    let res = self
                        .run_one(&code[i].source, tests[j])
                        .and_then(|outcome| self.store((src_keys[i].clone(), test_keys[j].clone()), &outcome));
                    if res.is_err() {
                        results.lock().expect("results lock").push(res);
                        break;
                    }
                });
            }
        });
        if let Some(Err(e)) = results.into_inner().expect("results lock").into_iter().next() {
            return Err(e);
        }

        let mut causes = Vec::with_capacity(code.len() * tests.len());
        for sk in &src_keys {
            for tk in &test_keys {
                let outcome = self.lookup(&(sk.clone(), tk.clone())).expect("every pair executed");
                causes.push(outcome.cause);
            }
        }
        Ok(ObservationMatrix::from_causes(
            code.iter().map(|c| c.id).collect(),
            tests.iter().map(|t| t.id).collect(),
            causes,
        ))
    }

    fn run_capture(&self, source: &str, input: &str) -> Result<Capture, ExecError> {
        self.launches.fetch_add(1, Ordering::SeqCst);
        let raw = self.launch(&self.runtime.command, source, input.as_bytes())?;
        Ok(match raw.exit {
            Exit::Status(status) if status.success() => Capture::Output(raw.stdout),
            Exit::Status(_) => Capture::Failed { cause: ExecutionCause::RuntimeError, stderr: raw.stderr },
            Exit::TimedOut => Capture::Failed { cause: ExecutionCause::Timeout, stderr: raw.stderr },
            Exit::Overflow => Capture::Failed { cause: ExecutionCause::ResourceLimit, stderr: raw.stdout },
        })
    }

    fn validate(&self, source: &str) -> Result<(), String> {
        if source.trim().is_empty() {
            return Err("empty program".into());
        }
        let Some(check) = &self.runtime.check else {
            return Ok(());
        };
        match self.launch(check, source, b"") {
            Ok(RawRun { exit: Exit::Status(s), .. }) if s.success() => Ok(()),
            Ok(raw) => Err(String::from_utf8_lossy(&raw.stderr).trim().to_string()),
            Err(e) => Err(e.to_string()),
        }
    }

    fn trace(&self, source: &str, test: &TestCase) -> Option<String> {
        let outcome = self.lookup(&(self.source_digest(source), Self::test_digest(test)))?;
        let mut trace = format!("cause: {:?}\n", outcome.cause);
        let stdout = String::from_utf8_lossy(&outcome.stdout);
        let stderr = String::from_utf8_lossy(&outcome.stderr);
        if !stdout.is_empty() {
            trace.push_str(&format!("stdout:\n{}\n", truncate(&stdout, 2000)));
        }
        if !stderr.is_empty() {
            trace.push_str(&format!("stderr:\n{}\n", truncate(&stderr, 2000)));
        }
        Some(trace)
    }
}

fn truncate(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_modes() {
        assert!(compare_outputs(b"a\n", b"a\n", Comparison::Exact));
        assert!(compare_outputs(b"a \n", b"a", Comparison::WhitespaceNormalized));
        assert!(!compare_outputs(b"a", b"b", Comparison::WhitespaceNormalized));
        assert!(!compare_outputs(b"a \n", b"a", Comparison::Exact));
        assert!(compare_outputs(b"  7 \n", b"7", Comparison::WhitespaceNormalized));
        assert!(compare_outputs(b"7 \r\n\n\n", b"7", Comparison::WhitespaceNormalized));
        assert!(!compare_outputs(b"1\n\n2", b"1\n2", Comparison::WhitespaceNormalized));
    }

    #[test]
    fn command_rendering() {
        let argv = render_command("python3 -u '{source_path}'", Path::new("/tmp/x y/main.py")).unwrap();
        assert_eq!(argv, vec!["python3", "-u", "/tmp/x y/main.py"]);
        assert!(render_command("   ", Path::new("/a")).is_err());
    }
}
