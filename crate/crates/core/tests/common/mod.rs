#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use bace::harness::{Example, ProblemSpec};
use bace::operators::MockScript;
use bace::population::{CodeCandidate, Comparison, ExecutionCause, ObservationMatrix, TestCase};
use bace::sandbox::{compare_outputs, Capture, ExecError, Executor, Runtime};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data")
}

pub fn python_available() -> bool {
    std::process::Command::new("python3").arg("-c").arg("pass").status().is_ok_and(|s| s.success())
}

/// The shipped two-integer sum problem (python runtime).
pub fn toy_problem() -> ProblemSpec {
    ProblemSpec::from_file(data_dir().join("sum_two.json")).unwrap()
}

/// Same problem, but for [`MiniExecutor`] programs.
pub fn mini_problem() -> ProblemSpec {
    ProblemSpec {
        id: "mini-sum".into(),
        statement: "Print the sum of two integers a and b.".into(),
        public_examples: vec![
            Example { input: "1 2\n".into(), output: "3\n".into() },
            Example { input: "10 -4\n".into(), output: "6\n".into() },
        ],
        candidate_runtime: Runtime { command: "mini {source_path}".into(), source_file: "p".into(), check: None },
        comparison: Comparison::WhitespaceNormalized,
        difficulty: None,
    }
}

fn parse_pair(input: &str) -> Option<(i64, i64)> {
    let mut it = input.split_whitespace().map(|t| t.parse::<i64>());
    match (it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b))) => Some((a, b)),
        _ => None,
    }
}

/// Interprets a toy program language: the first word of the source names the
/// behaviour. `gen` is an input generator that reads a seed.
pub fn mini_eval(source: &str, input: &str) -> Option<String> {
    let word = source.split_whitespace().next()?;
    if word == "gen" {
        let seed: u64 = input.trim().parse().ok()?;
        let mut parts = Vec::new();
        for k in 0..20u64 {
            let a = (seed.wrapping_mul(6364136223846793005).wrapping_add(k.wrapping_mul(1442695040888963407)) >> 33)
                % 100_000;
            parts.push(format!("{} {}", a as i64 - 50_000, k as i64 * 7 - 60));
        }
        return Some(parts.join("\n---\n") + "\n");
    }
    if word == "gen_crash" {
        return None;
    }
    let (a, b) = parse_pair(input)?;
    let out = match word {
        "sum" => a + b,
        "diff" => a - b,
        "prod" => a * b,
        "sum_small" => {
            if a.abs() < 1000 {
                a + b
            } else {
                a
            }
        }
        "abs_sum" => (a + b).abs(),
        "plus_one" => a + 1,
        "plus_two" => a + 2,
        _ => return None,
    };
    Some(format!("{out}\n"))
}

/// In-process executor for the toy language; no processes are spawned.
pub struct MiniExecutor {
    pub runs: AtomicUsize,
}

impl MiniExecutor {
    pub fn new() -> Self {
        Self { runs: AtomicUsize::new(0) }
    }
}

impl Executor for MiniExecutor {
    fn run_matrix(&self, code: &[&CodeCandidate], tests: &[&TestCase]) -> Result<ObservationMatrix, ExecError> {
        let mut causes = Vec::new();
        for c in code {
            for t in tests {
                self.runs.fetch_add(1, Ordering::SeqCst);
                causes.push(match mini_eval(&c.source, &t.input) {
                    None => ExecutionCause::RuntimeError,
                    Some(out) if compare_outputs(out.as_bytes(), t.expected_output.as_bytes(), t.comparison) => {
                        ExecutionCause::OutputMatch
                    }
                    Some(_) => ExecutionCause::Mismatch,
                });
            }
        }
        Ok(ObservationMatrix::from_causes(
            code.iter().map(|c| c.id).collect(),
            tests.iter().map(|t| t.id).collect(),
            causes,
        ))
    }

    fn run_capture(&self, source: &str, input: &str) -> Result<Capture, ExecError> {
        self.runs.fetch_add(1, Ordering::SeqCst);
        Ok(match mini_eval(source, input) {
            Some(out) => Capture::Output(out.into_bytes()),
            None => Capture::Failed { cause: ExecutionCause::RuntimeError, stderr: Vec::new() },
        })
    }

    fn validate(&self, source: &str) -> Result<(), String> {
        if source.trim().is_empty() {
            Err("empty".into())
        } else {
            Ok(())
        }
    }
}

fn fenced(src: &str) -> String {
    format!("```\n{src}\n```")
}

fn tests_block(pairs: &[(&str, &str)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(i, o)| format!("INPUT:\n{i}\nOUTPUT:\n{o}")).collect();
    format!("```tests\n{}\n```", body.join("\n---\n"))
}

/// Mock script for [`MiniExecutor`] runs. `sum_small` is indistinguishable
/// from `sum` on every scripted test, so only divergence probing separates them.
pub fn mini_script() -> MockScript {
    let init_code = |progs: &[&str]| progs.iter().map(|p| fenced(p)).collect::<Vec<_>>().join("\n");
    let responses = BTreeMap::from([
        (
            "init_code".to_string(),
            vec![
                init_code(&["sum", "diff", "prod", "sum_small", "abs_sum"]),
                init_code(&["diff\n# v2", "sum\n# v2", "crash", "prod\n# v2", "sum_small\n# v2"]),
            ],
        ),
        (
            "init_tests".to_string(),
            vec![tests_block(&[
                ("0 0", "0"),
                ("5 7", "12"),
                ("-3 3", "0"),
                ("100 200", "300"),
                ("-5 -6", "-11"),
                ("7 7", "14"),
                ("1 1", "3"),
                ("9 0", "9"),
                ("-1 0", "-1"),
                ("2 3", "6"),
                ("50 50", "100"),
                ("12 -20", "-8"),
                ("0 1", "1"),
                ("4 4", "8"),
                ("999 1", "1000"),
                ("-7 2", "-5"),
                ("3 3", "6"),
                ("8 -8", "0"),
                ("6 5", "11"),
                ("20 30", "50"),
            ])],
        ),
        ("debug".to_string(), vec![fenced("sum\n# repaired")]),
        ("reimplement".to_string(), vec!["```\n${parent}\n# again\n```".to_string()]),
        ("semantic_crossover".to_string(), vec!["```\n${parent_a}\n# merged\n```".to_string()]),
        (
            "discriminate".to_string(),
            vec![tests_block(&[("11 -11", "0")]), tests_block(&[("-20 -30", "-50")]), tests_block(&[("13 14", "27")])],
        ),
        (
            "complementary_crossover".to_string(),
            vec![tests_block(&[("-100 1", "-99")]), tests_block(&[("31 -1", "30")])],
        ),
        (
            "edge_case_gen".to_string(),
            vec![
                format!("VERDICT: valid\n{}", tests_block(&[("0 -9", "-9")])),
                format!("VERDICT: repair\n{}", tests_block(&[("7 8", "15")])),
            ],
        ),
        ("divergence_discovery".to_string(), vec![fenced("gen")]),
    ]);
    MockScript { responses, default: None }
}

/// Minimal HTTP/1.1 server for OpenAI-style endpoints. The handler gets the
/// request body and returns (status, body).
pub struct StubServer {
    pub addr: SocketAddr,
    pub hits: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(usize, &str) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let handler = Arc::new(handler);
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let handler = handler.clone();
                let counter = counter.clone();
                thread::spawn(move || serve(stream, &*handler, &counter));
            }
        });
        Self { addr, hits }
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, handler: &dyn Fn(usize, &str) -> (u16, String), counter: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut length = 0usize;
        let mut first = true;
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) | Err(_) => return,
                Ok(_) => {}
            }
            if line == "\r\n" {
                break;
            }
            if first {
                first = false;
                continue;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let n = counter.fetch_add(1, Ordering::SeqCst);
        let (status, text) = handler(n, &String::from_utf8_lossy(&body));
        let reason = match status {
            200 => "OK",
            401 => "Unauthorized",
            429 => "Too Many Requests",
            _ => "Status",
        };
        let response = format!(
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{text}",
            text.len()
        );
        if out.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}

/// Wraps assistant text in a chat-completion response body.
pub fn chat_body(text: &str) -> String {
    serde_json::json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
    })
    .to_string()
}

/// Extracts the user prompt from a chat-completion request body.
pub fn prompt_of(body: &str) -> String {
    let v: serde_json::Value = serde_json::from_str(body).unwrap_or_default();
    v["messages"][0]["content"].as_str().unwrap_or_default().to_string()
}

const ROUTES: [(&str, &str); 11] = [
    ("complete solutions to this problem", "init_code"),
    ("test cases for this problem", "init_tests"),
    ("fails some tests", "debug"),
    ("Current solution:", "reimplement"),
    ("Here are two candidate solutions.", "semantic_crossover"),
    ("both pass this test", "discriminate"),
    ("This test separates", "discriminate"),
    ("Both candidate solutions fail", "discriminate"),
    ("Two existing tests", "complementary_crossover"),
    ("Audit this test", "edge_case_gen"),
    ("behave identically on every test", "divergence_discovery"),
];

/// Serves a [`MockScript`] over HTTP, routing each prompt to a script key by
/// a phrase from its template. `${parent}`-style echoes are filled from the
/// first fenced block of the prompt; `${test_input}` becomes "6 6\n".
pub fn scripted_stub(script: MockScript) -> StubServer {
    let counters = std::sync::Mutex::new(BTreeMap::<String, usize>::new());
    StubServer::start(move |_, body| {
        let prompt = prompt_of(body);
        let Some((_, key)) = ROUTES.iter().find(|(phrase, _)| prompt.contains(phrase)) else {
            return (400, format!("{{\"error\":\"unrouted prompt: {}\"}}", prompt.lines().last().unwrap_or("")));
        };
        let Some(list) = script.responses.get(*key).filter(|l| !l.is_empty()) else {
            return (400, "{\"error\":\"no scripted response\"}".into());
        };
        let mut counters = counters.lock().unwrap();
        let n = counters.entry(key.to_string()).or_insert(0);
        let mut text = list[*n % list.len()].clone();
        *n += 1;
        if text.contains("${parent") {
            let parent = bace::gateway::extract_code_blocks(&prompt).into_iter().next().unwrap_or_default();
            text = text.replace("${parent_a}", &parent).replace("${parent}", &parent);
        }
        text = text.replace("${test_input}", "6 6");
        (200, chat_body(&text))
    })
}
