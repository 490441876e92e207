mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use bace::belief::{Belief, LogOddsLimit};
use bace::gateway::{PromptRequest, ProviderConfig, Verdict};
use bace::harness::ProblemSpec;
use bace::operators::{
    complementary_crossover, debug, discriminate, divergence_discovery, edge_case_gen, reimplement, select_operator,
    semantic_crossover, DiscriminateBranch, DraftBelief, FailingTest, FnProvider, MockProvider, OperatorContext,
    OperatorError, OperatorName,
};
use bace::population::{
    CodeCandidate, CodeId, Comparison, ExecutionCause, Lineage, ObservationMatrix, Origin, ParentId, TestCase, TestId,
    TestKind,
};
use bace::sandbox::Executor;
use common::{mini_problem, mini_script, MiniExecutor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn belief(p: f64) -> Belief {
    Belief::from_probability(p, LogOddsLimit::default())
}

fn code(id: u32, source: &str) -> CodeCandidate {
    CodeCandidate {
        id: CodeId(id),
        source: source.into(),
        belief: belief(0.5),
        lineage: Lineage::root(Origin::Init),
        alive: true,
    }
}

fn test(id: u32, input: &str, output: &str, kind: TestKind) -> TestCase {
    TestCase {
        id: TestId(id),
        kind,
        input: input.into(),
        expected_output: output.into(),
        comparison: Comparison::WhitespaceNormalized,
        belief: belief(0.4),
        lineage: Lineage::root(Origin::Init),
        alive: true,
    }
}

struct Fixture {
    problem: ProblemSpec,
    config: ProviderConfig,
    executor: MiniExecutor,
}

impl Fixture {
    fn new() -> Self {
        Self { problem: mini_problem(), config: ProviderConfig::default(), executor: MiniExecutor::new() }
    }

    fn ctx<'a>(&'a self, provider: &'a dyn bace::gateway::TextProvider) -> OperatorContext<'a> {
        OperatorContext {
            problem: &self.problem,
            provider,
            executor: &self.executor,
            provider_config: &self.config,
            retries: 3,
        }
    }
}

#[test]
fn mock_responses_pass_through() {
    let fx = Fixture::new();
    let provider = MockProvider::new(mini_script());
    let out = reimplement(&fx.ctx(&provider), &code(3, "sum")).unwrap();
    assert_eq!(out.children[0].source, "sum\n# again");
    assert_eq!(out.children[0].parents, vec![CodeId(3)]);
    assert_eq!(out.transcripts.len(), 1);

    let out = semantic_crossover(&fx.ctx(&provider), &code(1, "diff"), &code(2, "sum")).unwrap();
    assert_eq!(out.children[0].source, "diff\n# merged");
    assert_eq!(out.children[0].parents, vec![CodeId(1), CodeId(2)]);
    assert!(semantic_crossover(&fx.ctx(&provider), &code(1, "a"), &code(1, "a")).is_err());
}

#[test]
fn prompts_carry_statement_and_context() {
    let fx = Fixture::new();
    let seen = std::sync::Mutex::new(Vec::<PromptRequest>::new());
    let provider = FnProvider(|r: &PromptRequest| {
        seen.lock().unwrap().push(r.clone());
        "```\nsum\n```".to_string()
    });
    let parent = code(0, "diff");
    let t = test(5, "3 4\n", "7\n", TestKind::Unit);
    let failing = [FailingTest { test: &t, cause: ExecutionCause::Mismatch }];
    let out = debug(&fx.ctx(&provider), &parent, &failing).unwrap();
    assert_eq!(out.children[0].origin, Origin::Debug);
    let req = seen.lock().unwrap()[0].clone();
    assert_eq!(req.template, "debug");
    assert!(req.prompt.contains("Print the sum of two integers"));
    assert!(req.prompt.contains("3 4"));
    assert!(req.prompt.contains("diff"));
    assert!((req.temperature - 0.2).abs() < 1e-12);
    assert!(matches!(debug(&fx.ctx(&provider), &parent, &[]), Err(OperatorError::Inapplicable(_))));
}

#[test]
fn discriminate_branches_follow_outcomes() {
    let fx = Fixture::new();
    let provider = MockProvider::new(mini_script());
    let a = code(0, "sum");
    let b = code(1, "diff");
    let c = code(2, "prod");
    // "2 0": sum=2, diff=2, prod=0. Expected 2.
    let tests = [
        test(10, "2 0\n", "2\n", TestKind::Unit),
        test(11, "2 3\n", "5\n", TestKind::Unit),
        test(12, "2 3\n", "9\n", TestKind::Unit),
    ];
    let refs: Vec<&TestCase> = tests.iter().collect();
    let matrix: ObservationMatrix = fx.executor.run_matrix(&[&a, &b, &c], &refs).unwrap();
    let cases = [
        (&tests[0], &a, &b, DiscriminateBranch::Expose, "discriminate_expose"),
        (&tests[1], &a, &b, DiscriminateBranch::Refine, "discriminate_refine"),
        (&tests[2], &b, &c, DiscriminateBranch::Separate, "discriminate_separate"),
    ];
    for (t, x, y, want, template) in cases {
        let (out, branch) = discriminate(&fx.ctx(&provider), t, x, y, &matrix).unwrap();
        assert_eq!(branch, want);
        assert_eq!(out.transcripts[0].template, template);
        assert_eq!(out.children[0].parents, vec![ParentId::Test(t.id)]);
        assert_eq!(out.children[0].belief, DraftBelief::MinOfParents);
    }
}

#[test]
fn complementary_crossover_has_two_parents() {
    let fx = Fixture::new();
    let provider = MockProvider::new(mini_script());
    let a = test(1, "1 1\n", "2\n", TestKind::Unit);
    let b = test(2, "5 5\n", "10\n", TestKind::Unit);
    let out = complementary_crossover(&fx.ctx(&provider), &a, &b).unwrap();
    assert_eq!(out.children[0].parents, vec![ParentId::Test(TestId(1)), ParentId::Test(TestId(2))]);
    assert_eq!(out.children[0].input, "-100 1\n");
}

#[test]
fn edge_case_verdicts() {
    let fx = Fixture::new();
    let provider = MockProvider::new(mini_script());
    let parent = test(7, "1 1\n", "3\n", TestKind::Unit);
    let valid = edge_case_gen(&fx.ctx(&provider), &parent).unwrap();
    assert_eq!(valid.audit, Some(Verdict::Valid));
    assert_eq!(valid.children[0].replaces, None);
    let repair = edge_case_gen(&fx.ctx(&provider), &parent).unwrap();
    assert_eq!(repair.audit, Some(Verdict::Repair));
    assert_eq!(repair.children[0].replaces, Some(TestId(7)));
    assert_eq!(repair.children[0].input, "7 8\n");

    let anchor = test(0, "1 2\n", "3\n", TestKind::Anchor);
    assert!(matches!(edge_case_gen(&fx.ctx(&provider), &anchor), Err(OperatorError::Inapplicable(_))));
}

#[test]
fn unparseable_answers_exhaust_retries() {
    let fx = Fixture::new();
    let calls = AtomicUsize::new(0);
    let provider = FnProvider(|_: &PromptRequest| {
        calls.fetch_add(1, Ordering::SeqCst);
        "I cannot help with that.".to_string()
    });
    let mut err = reimplement(&fx.ctx(&provider), &code(0, "sum")).unwrap_err();
    assert!(matches!(err, OperatorError::Exhausted { .. }));
    assert!(!err.is_fatal());
    assert_eq!(calls.load(Ordering::SeqCst), 3);
    assert_eq!(err.take_transcripts().len(), 3);
}

#[test]
fn divergence_emits_twin_tests_per_input() {
    let fx = Fixture::new();
    let provider = MockProvider::new(mini_script());
    let a = code(0, "plus_one");
    let b = code(1, "plus_two");
    let (out, report) = divergence_discovery(&fx.ctx(&provider), &a, &b, &[], 5, 20, 42).unwrap();
    assert_eq!(report.diverging_inputs, 5);
    assert_eq!(out.children.len(), 10);
    for pair in out.children.chunks(2) {
        assert_eq!(pair[0].input, pair[1].input);
        assert_ne!(pair[0].expected_output, pair[1].expected_output);
        for child in pair {
            assert_eq!(child.kind, TestKind::Diff);
            assert_eq!(child.belief, DraftBelief::Prior);
            assert_eq!(child.parents, vec![ParentId::Code(CodeId(0)), ParentId::Code(CodeId(1))]);
        }
    }

    let (one, report) = divergence_discovery(&fx.ctx(&provider), &a, &b, &[], 1, 20, 42).unwrap();
    assert_eq!((one.children.len(), report.diverging_inputs), (2, 1));

    let twin = code(2, "plus_one\n# copy");
    let (none, report) = divergence_discovery(&fx.ctx(&provider), &a, &twin, &[], 5, 20, 42).unwrap();
    assert!(none.children.is_empty());
    assert_eq!(report.diverging_inputs, 0);
    assert!(report.sampled_inputs > 0);
}

#[test]
fn failing_generator_yields_no_children() {
    let fx = Fixture::new();
    let mut script = mini_script();
    script.responses.insert("divergence_discovery".into(), vec!["```\ngen_crash\n```".into()]);
    let provider = MockProvider::new(script);
    let (out, report) =
        divergence_discovery(&fx.ctx(&provider), &code(0, "plus_one"), &code(1, "plus_two"), &[], 5, 20, 1).unwrap();
    assert!(out.children.is_empty());
    assert!(report.generator_failure.is_some());
}

#[test]
fn dispatch_matches_rates() {
    let rates = [(OperatorName::Debug, 0.6), (OperatorName::Reimplement, 0.2), (OperatorName::SemanticCrossover, 0.2)];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 30_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let op = select_operator(&rates, &mut rng);
        counts[rates.iter().position(|(o, _)| *o == op).unwrap()] += 1;
    }
    // Chi-square goodness of fit, 2 degrees of freedom; 13.82 is the 0.001 critical value.
    let chi2: f64 = rates
        .iter()
        .zip(counts)
        .map(|((_, p), c)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < 13.82, "chi2 = {chi2}, counts = {counts:?}");
}
