//! A run against a real OpenAI-compatible endpoint.
//!
//! ```text
//! OPENAI_API_KEY=... cargo run --example live_provider -- <base url> <model> [problem.json]
//! ```
//!
//! The problem defaults to the bundled sum-of-two task. Nothing is sent
//! unless a base URL is given.

use std::path::Path;

use bace::engine::{run, RunConfig};
use bace::gateway::{network_requests, ChatClient};
use bace::harness::{ProblemSpec, RunLogWriter};
use bace::sandbox::SandboxExecutor;

fn main() {
    let mut args = std::env::args().skip(1);
    let (Some(base_url), Some(model)) = (args.next(), args.next()) else {
        eprintln!("usage: live_provider <base url> <model> [problem.json]");
        std::process::exit(2);
    };
    let problem_path = args
        .next()
        .map(Into::into)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/sum_two.json"));
    let problem = ProblemSpec::from_file(&problem_path).expect("problem file");

    let mut config = RunConfig { generations: 2, ..RunConfig::default() };
    config.provider.base_url = base_url;
    config.provider.model = model;
    let client = ChatClient::new(config.provider.clone()).expect("client");
    let executor = SandboxExecutor::new(problem.candidate_runtime.clone(), config.limits);

    let log_path = std::env::temp_dir().join(format!("{}.live.jsonl", problem.id));
    let mut writer = RunLogWriter::create(&log_path).expect("log file");
    writer.begin(&config, &problem);
    match run(&problem, &config, &client, &executor, &mut writer) {
        Ok(result) => {
            let digest = writer.finish(&result).expect("log written");
            println!("{}", result.best_code.source.trim_end());
            println!("passes anchors: {}", result.best_passes_anchors);
            println!("requests: {}; log {} ({digest})", network_requests(), log_path.display());
        }
        Err(e) => {
            let _ = writer.close();
            eprintln!("run failed after {} requests: {e}", network_requests());
            std::process::exit(1);
        }
    }
}
