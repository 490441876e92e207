use std::collections::{BTreeMap, BTreeSet};

use bace::belief::{
    credibility_threshold, generation_update, sigmoid, woe_code, woe_test, Belief, InteractionLedger, LogOddsLimit,
    NoiseModel, Outcome, UpdateParams, UpdateTarget,
};
use bace::population::{CodeId, ObservationMatrix, TestId};
use proptest::prelude::*;

fn lim() -> LogOddsLimit {
    LogOddsLimit::default()
}

// Likelihoods written out by hand from the sensor table, independent of the
// library's log-ratio helper.
fn oracle_pass_code(b: f64, a: f64, be: f64, g: f64) -> f64 {
    let p_correct = b * 1.0 + (1.0 - b) * a;
    let p_incorrect = b * be + (1.0 - b) * g;
    (p_correct / p_incorrect).ln()
}

fn oracle_fail_code(b: f64, a: f64, be: f64, g: f64) -> f64 {
    let p_correct = (1.0 - b) * (1.0 - a);
    let p_incorrect = b * (1.0 - be) + (1.0 - b) * (1.0 - g);
    (p_correct / p_incorrect).ln()
}

fn noise_strategy() -> impl Strategy<Value = NoiseModel> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
        .prop_filter("positive denominator", |(a, b, g)| 1.0 - a - b + g > 1e-3)
        .prop_map(|(a, b, g)| NoiseModel::new(a, b, g).unwrap())
}

fn matrix(rows: usize, cols: usize, bits: &[bool]) -> ObservationMatrix {
    ObservationMatrix::from_bits((0..rows as u32).map(CodeId).collect(), (0..cols as u32).map(TestId).collect(), bits)
}

#[test]
fn closed_form_values() {
    let anchor = NoiseModel::anchor_default();
    let evolved = NoiseModel::evolved_default();
    let eps = 1e-9;
    assert!((woe_code(Outcome::Pass, 1.0, &anchor, lim()) - 5f64.ln()).abs() < eps);
    assert!((woe_code(Outcome::Pass, 0.2, &evolved, lim()) - oracle_pass_code(0.2, 0.1, 0.2, 0.25)).abs() < eps);
    assert!((woe_code(Outcome::Fail, 0.2, &evolved, lim()) - oracle_fail_code(0.2, 0.1, 0.2, 0.25)).abs() < eps);
    assert!((woe_test(Outcome::Pass, 0.9, &evolved, lim()) - oracle_pass_code(0.9, 0.2, 0.1, 0.25)).abs() < eps);
}

#[test]
fn anchor_fail_is_clamped_to_minus_limit() {
    let anchor = NoiseModel::anchor_default();
    assert_eq!(woe_code(Outcome::Fail, 1.0, &anchor, lim()), -30.0);
}

#[test]
fn equal_noise_never_inverts() {
    let n = NoiseModel::new(0.3, 0.3, 0.3).unwrap();
    assert_eq!(credibility_threshold(&n, UpdateTarget::TestUpdate), 0.0);
    assert_eq!(credibility_threshold(&n, UpdateTarget::CodeUpdate), 0.0);
    for b in [0.01, 0.3, 0.99] {
        assert!(woe_code(Outcome::Pass, b, &n, lim()) > 0.0);
    }
}

#[test]
fn evolved_test_threshold_is_one_nineteenth() {
    let n = NoiseModel::evolved_default();
    let t = credibility_threshold(&n, UpdateTarget::TestUpdate);
    assert!((t - 1.0 / 19.0).abs() < 1e-15);
    assert!(woe_test(Outcome::Pass, 1.0 / 19.0, &n, lim()).abs() <= 1e-9);
}

proptest! {
    #[test]
    fn pass_sign_follows_threshold(noise in noise_strategy(), b in 0.001..0.999f64) {
        let d = noise.credibility_denominator();
        for (target, raw, delta) in [
            (UpdateTarget::CodeUpdate, (noise.gamma - noise.alpha) / d, woe_code(Outcome::Pass, b, &noise, lim())),
            (UpdateTarget::TestUpdate, (noise.gamma - noise.beta) / d, woe_test(Outcome::Pass, b, &noise, lim())),
        ] {
            prop_assert_eq!(credibility_threshold(&noise, target), raw.max(0.0));
            if (b - raw).abs() > 1e-9 {
                prop_assert_eq!(delta > 0.0, b > raw, "b={} raw={} delta={}", b, raw, delta);
            }
        }
    }

    #[test]
    fn pass_and_fail_pull_in_opposite_directions(noise in noise_strategy(), b in 0.001..0.999f64) {
        let pass = woe_code(Outcome::Pass, b, &noise, lim());
        let fail = woe_code(Outcome::Fail, b, &noise, lim());
        prop_assert!(pass * fail <= 1e-12, "pass={} fail={}", pass, fail);
    }

    #[test]
    fn beliefs_stay_within_clamp(x in -1e6..1e6f64, limit in 1.0..60.0f64) {
        let l = LogOddsLimit::new(limit).unwrap();
        let b = Belief::from_log_odds(x, l);
        prop_assert!(b.log_odds().abs() <= limit);
        prop_assert!((b.probability() - sigmoid(b.log_odds())).abs() < 1e-15);
    }

    #[test]
    fn update_is_idempotent_on_unchanged_matrix(
        (rows, cols, bits) in (1usize..6, 2usize..7).prop_flat_map(|(r, c)| (Just(r), Just(c), proptest::collection::vec(any::<bool>(), r * c))),
        priors in proptest::collection::vec(0.01..0.99f64, 12),
    ) {
        let m = matrix(rows, cols, &bits);
        let code: BTreeMap<CodeId, Belief> =
            (0..rows).map(|i| (CodeId(i as u32), Belief::from_probability(priors[i], lim()))).collect();
        let anchors = BTreeSet::from([TestId(0)]);
        let tests: BTreeMap<TestId, Belief> = (0..cols)
            .map(|j| {
                let p = if j == 0 { 1.0 - 1e-12 } else { priors[6 + j % 6] };
                (TestId(j as u32), Belief::from_probability(p, lim()))
            })
            .collect();
        let params = UpdateParams::default();
        let mut ledger = InteractionLedger::new();
        let first = generation_update(&m, &code, &tests, &anchors, &params, &mut ledger).unwrap();
        prop_assert_eq!(first.consumed, rows * cols);
        let second = generation_update(&m, &first.code, &first.tests, &anchors, &params, &mut ledger).unwrap();
        prop_assert_eq!(second.consumed, 0);
        prop_assert_eq!(&second.code, &first.code);
        prop_assert_eq!(&second.tests, &first.tests);
    }

    #[test]
    fn anchor_failures_are_pinned_and_anchors_fixed(
        (rows, cols, bits) in (1usize..6, 2usize..7).prop_flat_map(|(r, c)| (Just(r), Just(c), proptest::collection::vec(any::<bool>(), r * c))),
    ) {
        let m = matrix(rows, cols, &bits);
        let code: BTreeMap<CodeId, Belief> =
            (0..rows).map(|i| (CodeId(i as u32), Belief::from_probability(0.2, lim()))).collect();
        let anchors = BTreeSet::from([TestId(0), TestId(1)]);
        let tests: BTreeMap<TestId, Belief> = (0..cols)
            .map(|j| (TestId(j as u32), Belief::from_probability(if j < 2 { 1.0 - 1e-12 } else { 0.2 }, lim())))
            .collect();
        let out = generation_update(&m, &code, &tests, &anchors, &UpdateParams::default(), &mut InteractionLedger::new()).unwrap();
        for r in 0..rows {
            let failed = (0..2).any(|c| !bits[r * cols + c]);
            prop_assert_eq!(out.anchor_failures.contains(&CodeId(r as u32)), failed);
            if failed {
                prop_assert!(out.code[&CodeId(r as u32)].probability() <= 1e-9);
            }
        }
        for a in &anchors {
            prop_assert_eq!(out.tests[a].log_odds().to_bits(), tests[a].log_odds().to_bits());
        }
    }
}

#[test]
fn phase_three_uses_start_of_generation_test_beliefs() {
    // One candidate, one evolved test, all passing. If phase 3 used the
    // updated test belief the code delta would differ.
    let m = matrix(1, 2, &[true, true]);
    let code = BTreeMap::from([(CodeId(0), Belief::from_probability(0.2, lim()))]);
    let tests = BTreeMap::from([
        (TestId(0), Belief::from_probability(1.0 - 1e-12, lim())),
        (TestId(1), Belief::from_probability(0.2, lim())),
    ]);
    let anchors = BTreeSet::from([TestId(0)]);
    let params = UpdateParams::default();
    let out = generation_update(&m, &code, &tests, &anchors, &params, &mut InteractionLedger::new()).unwrap();
    let expected = (0.2f64 / 0.8).ln()
        + woe_code(Outcome::Pass, 1.0, &params.anchor_noise, lim())
        + woe_code(Outcome::Pass, 0.2, &params.evolved_noise, lim());
    assert!((out.code[&CodeId(0)].log_odds() - expected).abs() < 1e-9);

    let code_mid =
        Belief::from_log_odds((0.2f64 / 0.8).ln() + woe_code(Outcome::Pass, 1.0, &params.anchor_noise, lim()), lim());
    let test_expected =
        (0.2f64 / 0.8).ln() + woe_test(Outcome::Pass, code_mid.probability(), &params.evolved_noise, lim());
    assert!((out.tests[&TestId(1)].log_odds() - test_expected).abs() < 1e-9);
}
