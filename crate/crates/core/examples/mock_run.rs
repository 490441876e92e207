//! A complete offline run on the bundled problem with a scripted provider.
//! Writes a run log and prints the report. Needs `python3` on PATH.
//!
//! ```text
//! cargo run --example mock_run -- [generations] [log path]
//! ```

use std::path::{Path, PathBuf};

use bace::engine::{run, RunConfig};
use bace::harness::{render_report, ProblemSpec, RunLog, RunLogWriter};
use bace::operators::MockProvider;
use bace::sandbox::SandboxExecutor;

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let mut args = std::env::args().skip(1);
    let generations = args.next().and_then(|g| g.parse().ok()).unwrap_or(4);
    let log_path = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sum-two.runlog.jsonl"));

    let problem = ProblemSpec::from_file(data.join("sum_two.json")).expect("bundled problem");
    let provider = MockProvider::from_file(data.join("sum_two_mock.json")).expect("bundled script");
    let config = RunConfig { generations, seed: 1, ..RunConfig::default() };
    let executor = SandboxExecutor::new(problem.candidate_runtime.clone(), config.limits);

    let mut writer = RunLogWriter::create(&log_path).expect("log file");
    writer.begin(&config, &problem);
    let result = match run(&problem, &config, &provider, &executor, &mut writer) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed: {e}");
            std::process::exit(1);
        }
    };
    let digest = writer.finish(&result).expect("log written");

    println!("best candidate {} (belief {:.6}):", result.best_code.id, result.best_code.belief.probability());
    println!("{}", result.best_code.source.trim_end());
    println!("passes anchors: {}", result.best_passes_anchors);
    println!("log {} sha256 {digest}\n", log_path.display());

    let log = RunLog::read(&log_path).expect("log reads back");
    print!("{}", render_report(&log));
}
