use std::collections::{BTreeMap, BTreeSet};

use bace::belief::{generation_update, Belief, InteractionLedger, LogOddsLimit, NoiseModel, UpdateParams};
use bace::engine::map_select;
use bace::lab::{
    exact_posterior, max_pass_baseline, recovery_experiment, run_trial, sample_matrix, LabParams, LatentWorld,
};
use bace::population::{CodeId, TestId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn incorrect_code_passes_valid_tests_at_beta() {
    let noise = NoiseModel::evolved_default();
    let world = LatentWorld::new(vec![false; 10], vec![true; 10], BTreeSet::new(), noise).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut passes = 0usize;
    let mut total = 0usize;
    while total < 100_000 {
        let m = sample_matrix(&world, &mut rng);
        passes += (0..m.n_rows()).map(|r| m.pass_count(r)).sum::<usize>();
        total += m.n_rows() * m.n_cols();
    }
    let rate = passes as f64 / total as f64;
    assert!((rate - 0.2).abs() <= 0.005, "rate {rate}");
}

#[test]
fn every_branch_matches_its_rate() {
    let noise = NoiseModel::evolved_default();
    let world = LatentWorld::new(vec![true, false], vec![true, false], BTreeSet::new(), noise).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 40_000;
    let mut counts = [[0usize; 2]; 2];
    for _ in 0..n {
        let m = sample_matrix(&world, &mut rng);
        for (r, row) in counts.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell += m.get(r, c).is_pass() as usize;
            }
        }
    }
    let expected = [[1.0, noise.alpha], [noise.beta, noise.gamma]];
    for r in 0..2 {
        for c in 0..2 {
            let p: f64 = expected[r][c];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let rate = counts[r][c] as f64 / n as f64;
            assert!((rate - p).abs() <= 3.0 * sigma + 1e-12, "cell ({r},{c}) rate {rate} vs {p}");
        }
    }
}

#[test]
fn anchors_must_be_valid() {
    let noise = NoiseModel::evolved_default();
    assert!(LatentWorld::new(vec![true], vec![false, true], BTreeSet::from([0]), noise).is_err());
}

#[test]
fn standard_world_recovers_the_correct_candidate() {
    let world = LatentWorld::standard(NoiseModel::evolved_default());
    let stats = recovery_experiment(&world, &LabParams::default(), 0..100).unwrap();
    assert!(stats.map_accuracy >= 0.95, "{stats:?}");
    assert_eq!(stats.anchor_violations, 0);
}

#[test]
fn correct_candidates_end_with_higher_mean_belief() {
    let world = LatentWorld::standard(NoiseModel::evolved_default());
    let params = LabParams::default();
    let mut diffs = Vec::new();
    for seed in 0..200 {
        let trial = run_trial(&world, &params, seed);
        let correct = trial.code_beliefs[&CodeId(9)].probability();
        let wrong: f64 = (0..9).map(|i| trial.code_beliefs[&CodeId(i)].probability()).sum::<f64>() / 9.0;
        diffs.push(correct - wrong);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // One-sided 99% bound.
    assert!(mean - 2.33 * sd / n.sqrt() > 0.0, "mean {mean}, sd {sd}");
}

#[test]
fn adversarial_world_defeats_the_pass_count_baseline() {
    let world = LatentWorld::adversarial(NoiseModel::evolved_default());
    let anchored = recovery_experiment(&world, &LabParams::default(), 0..100).unwrap();
    let ablated = recovery_experiment(&world, &LabParams { anchoring: false, ..LabParams::default() }, 0..100).unwrap();
    assert!(anchored.map_accuracy > anchored.baseline_accuracy, "{anchored:?}");
    assert!(ablated.map_accuracy < anchored.map_accuracy, "{ablated:?}");
}

#[test]
fn more_rounds_do_not_break_anchoring() {
    let world = LatentWorld::standard(NoiseModel::evolved_default());
    let params = LabParams { rounds: 3, ..LabParams::default() };
    let stats = recovery_experiment(&world, &params, 0..50).unwrap();
    assert_eq!(stats.anchor_violations, 0);
    assert!(stats.map_accuracy >= 0.95);
}

#[test]
fn baseline_breaks_ties_towards_the_smaller_index() {
    assert_eq!(max_pass_baseline(&[3, 5, 5, 1]), Some(1));
    assert_eq!(max_pass_baseline(&[]), None);
}

#[test]
fn exact_posterior_of_a_single_observation() {
    // One candidate, one non-anchor test, one pass. Hand enumeration over
    // (X, Y) with prior b on both.
    let b: f64 = 0.2;
    let n = NoiseModel::evolved_default();
    let w11 = b * b;
    let w10 = b * (1.0 - b) * n.alpha;
    let w01 = (1.0 - b) * b * n.beta;
    let w00 = (1.0 - b) * (1.0 - b) * n.gamma;
    let expected = (w11 + w10) / (w11 + w10 + w01 + w00);
    let m = bace::population::ObservationMatrix::from_bits(vec![CodeId(0)], vec![TestId(0)], &[true]);
    let got = exact_posterior(&m, &BTreeSet::new(), b, &n, &NoiseModel::anchor_default());
    assert!((got[0] - expected).abs() < 1e-12);
}

/// MAP under the reciprocal update should rank like the exact posterior on
/// worlds small enough to enumerate.
#[test]
fn map_agrees_with_exact_posterior_on_tiny_worlds() {
    let noise = NoiseModel::evolved_default();
    let anchor_noise = NoiseModel::anchor_default();
    let limit = LogOddsLimit::default();
    let params = UpdateParams { evolved_noise: noise, anchor_noise, eta: 1.0, limit };
    let b_init = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut agree, mut total) = (0, 0);
    for _ in 0..300 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=4);
        let mut x: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        x[rng.gen_range(0..n)] = true;
        let mut y: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.6)).collect();
        y[0] = true;
        let anchors = BTreeSet::from([0usize]);
        let world = LatentWorld::new(x, y, anchors, noise).unwrap();
        let matrix = sample_matrix(&world, &mut rng);

        let anchor_ids = BTreeSet::from([TestId(0)]);
        let code: BTreeMap<CodeId, Belief> =
            (0..n as u32).map(|i| (CodeId(i), Belief::from_probability(b_init, limit))).collect();
        let tests: BTreeMap<TestId, Belief> = (0..m as u32)
            .map(|j| {
                let p = if j == 0 { 1.0 - 1e-12 } else { b_init };
                (TestId(j), Belief::from_probability(p, limit))
            })
            .collect();
        let out =
            generation_update(&matrix, &code, &tests, &anchor_ids, &params, &mut InteractionLedger::new()).unwrap();
        let map = map_select(&out.code).unwrap();
        let exact = exact_posterior(&matrix, &anchor_ids, b_init, &noise, &anchor_noise);
        let best = exact.iter().cloned().fold(f64::MIN, f64::max);
        total += 1;
        if (exact[map.0 as usize] - best).abs() <= 1e-9 * best.max(1e-300) {
            agree += 1;
        }
    }
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.9, "agreement {rate}");
}
