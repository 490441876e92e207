//! Runs a few python programs against tests and prints the outcome matrix.
//! Needs `python3` on PATH.
//!
//! ```text
//! cargo run --example sandbox_run
//! ```

use bace::belief::{Belief, LogOddsLimit};
use bace::population::{CodeCandidate, CodeId, Comparison, Lineage, Origin, TestCase, TestId, TestKind};
use bace::sandbox::{ExecutionLimits, Executor, Runtime, SandboxExecutor};

fn main() {
    let b = Belief::from_probability(0.2, LogOddsLimit::default());
    let programs = [
        "a, b = map(int, input().split())\nprint(a + b)\n",
        "a, b = map(int, input().split())\nprint(a - b)\n",
        "import time\ntime.sleep(10)\n",
        "print(undefined_name)\n",
    ];
    let code: Vec<CodeCandidate> = programs
        .iter()
        .enumerate()
        .map(|(i, s)| CodeCandidate {
            id: CodeId(i as u32),
            source: s.to_string(),
            belief: b,
            lineage: Lineage::root(Origin::Init),
            alive: true,
        })
        .collect();
    let tests: Vec<TestCase> = [("1 2\n", "3\n"), ("5 5\n", "10\n"), ("7 0\n", "7\n")]
        .iter()
        .enumerate()
        .map(|(j, (i, o))| TestCase {
            id: TestId(j as u32),
            kind: TestKind::Unit,
            input: i.to_string(),
            expected_output: o.to_string(),
            comparison: Comparison::WhitespaceNormalized,
            belief: b,
            lineage: Lineage::root(Origin::Init),
            alive: true,
        })
        .collect();

    let limits = ExecutionLimits { wall_timeout_secs: 1.0, ..ExecutionLimits::default() };
    let executor = SandboxExecutor::new(Runtime::python3(), limits);
    let code_refs: Vec<&CodeCandidate> = code.iter().collect();
    let test_refs: Vec<&TestCase> = tests.iter().collect();
    let matrix = match executor.run_matrix(&code_refs, &test_refs) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("cannot run python3: {e}");
            std::process::exit(1);
        }
    };
    for (r, id) in matrix.rows().iter().enumerate() {
        let causes: Vec<String> = (0..matrix.n_cols()).map(|c| format!("{:?}", matrix.cause(r, c))).collect();
        println!("{id}\t{}", causes.join("\t"));
    }
    println!("launches {}, cache hits {}", executor.launches(), executor.cache_hits());
    executor.run_matrix(&code_refs, &test_refs).unwrap();
    println!("after rerun: launches {}, cache hits {}", executor.launches(), executor.cache_hits());
}
