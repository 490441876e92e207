//! Synthetic worlds with known ground truth.
//!
//! A [`LatentWorld`] fixes which candidates are correct and which tests are
//! valid; [`sample_matrix`] draws pass/fail outcomes from the noisy sensor
//! table, and the experiments below measure how well the belief update
//! recovers the truth.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::belief::{
    generation_update, woe_code, woe_test, Belief, InteractionLedger, LogOddsLimit, NoiseModel, Outcome, UpdateParams,
    UpdateTarget, EPSILON,
};
use crate::engine::map_select;
use crate::population::{CodeId, ObservationMatrix, TestId};

#[derive(Debug, Error, PartialEq)]
pub enum LabError {
    #[error("anchor {0} is not a valid test")]
    InvalidAnchor(usize),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("world has no correct candidate")]
    NoCorrectCandidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentWorld {
    /// `X_i`: candidate `i` is correct.
    pub code_correct: Vec<bool>,
    /// `Y_j`: test `j` is valid.
    pub test_valid: Vec<bool>,
    pub anchors: BTreeSet<usize>,
    pub noise: NoiseModel,
    /// Cells with a fixed outcome instead of a random draw.
    pub forced: BTreeMap<(usize, usize), bool>,
}

impl LatentWorld {
    pub fn new(
        code_correct: Vec<bool>,
        test_valid: Vec<bool>,
        anchors: BTreeSet<usize>,
        noise: NoiseModel,
    ) -> Result<Self, LabError> {
        for &a in &anchors {
            if !test_valid.get(a).copied().unwrap_or(false) {
                return Err(LabError::InvalidAnchor(a));
            }
        }
        Ok(Self { code_correct, test_valid, anchors, noise, forced: BTreeMap::new() })
    }

    pub fn force(mut self, code: usize, test: usize, pass: bool) -> Result<Self, LabError> {
        if code >= self.code_correct.len() || test >= self.test_valid.len() {
            return Err(LabError::OutOfRange(format!("({code}, {test})")));
        }
        self.forced.insert((code, test), pass);
        Ok(self)
    }

    /// 10 candidates with only the last one correct; 20 tests of which the
    /// first 14 are valid and tests 0 and 1 are anchors.
    pub fn standard(noise: NoiseModel) -> Self {
        let mut code = vec![false; 10];
        code[9] = true;
        let tests = (0..20).map(|j| j < 14).collect();
        Self::new(code, tests, BTreeSet::from([0, 1]), noise).expect("anchors are valid")
    }

    /// 10 candidates, the last one correct; 12 tests: anchors 0 and 1, valid
    /// tests 2..6, invalid tests 6..12. Candidate 0 passes every invalid test
    /// and every non-anchor valid test but fails both anchors, so it tops the
    /// raw pass count.
    pub fn adversarial(noise: NoiseModel) -> Self {
        let mut code = vec![false; 10];
        code[9] = true;
        let tests = (0..12).map(|j| j < 6).collect();
        let mut world = Self::new(code, tests, BTreeSet::from([0, 1]), noise).expect("anchors are valid");
        for j in 0..12 {
            world.forced.insert((0, j), j >= 2);
        }
        world
    }

    pub fn n_code(&self) -> usize {
        self.code_correct.len()
    }

    pub fn n_tests(&self) -> usize {
        self.test_valid.len()
    }

    /// `P(d_ij = 1 | X_i, Y_j)` under the world's noise, ignoring forced cells.
    pub fn pass_probability(&self, code: usize, test: usize) -> f64 {
        pass_probability(self.code_correct[code], self.test_valid[test], &self.noise)
    }
}

pub fn pass_probability(correct: bool, valid: bool, noise: &NoiseModel) -> f64 {
    match (correct, valid) {
        (true, true) => 1.0,
        (true, false) => noise.alpha,
        (false, true) => noise.beta,
        (false, false) => noise.gamma,
    }
}

/// Draws every cell independently; forced cells keep their outcome. Rows are
/// `CodeId(i)`, columns `TestId(j + test_offset)`.
pub fn sample_matrix_with_offset<R: Rng + ?Sized>(
    world: &LatentWorld,
    test_offset: u32,
    rng: &mut R,
) -> ObservationMatrix {
    let mut bits = Vec::with_capacity(world.n_code() * world.n_tests());
    for i in 0..world.n_code() {
        for j in 0..world.n_tests() {
            let p = world.pass_probability(i, j);
            let draw = rng.gen::<f64>() < p;
            bits.push(world.forced.get(&(i, j)).copied().unwrap_or(draw));
        }
    }
    ObservationMatrix::from_bits(
        (0..world.n_code() as u32).map(CodeId).collect(),
        (0..world.n_tests() as u32).map(|j| TestId(j + test_offset)).collect(),
        &bits,
    )
}

pub fn sample_matrix<R: Rng + ?Sized>(world: &LatentWorld, rng: &mut R) -> ObservationMatrix {
    sample_matrix_with_offset(world, 0, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabParams {
    pub update: UpdateParams,
    pub b_init: f64,
    pub anchoring: bool,
    /// Update rounds per seed. Each round observes a fresh draw of the
    /// non-anchor tests (same validity pattern, new ids); anchors are seen once.
    pub rounds: usize,
}

impl Default for LabParams {
    fn default() -> Self {
        Self {
            update: UpdateParams { evolved_noise: NoiseModel::evolved_default(), ..UpdateParams::default() },
            b_init: 0.2,
            anchoring: true,
            rounds: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryStats {
    pub seeds: usize,
    pub anchoring: bool,
    pub rounds: usize,
    pub map_accuracy: f64,
    pub baseline_accuracy: f64,
    pub mean_belief_correct: f64,
    pub mean_belief_incorrect: f64,
    /// Incorrect candidates that failed an anchor and still ended above 1e-9.
    pub anchor_violations: usize,
}

/// Final beliefs for one seeded trial, plus the summed pass counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub code_beliefs: BTreeMap<CodeId, Belief>,
    pub pass_counts: Vec<usize>,
    pub anchor_failures: BTreeSet<CodeId>,
}

pub fn run_trial(world: &LatentWorld, params: &LabParams, seed: u64) -> Trial {
    let limit = params.update.limit;
    let prior = Belief::from_probability(params.b_init, limit);
    let anchor_belief = Belief::from_probability(1.0 - EPSILON, limit);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut code: BTreeMap<CodeId, Belief> = (0..world.n_code() as u32).map(|i| (CodeId(i), prior)).collect();
    let mut pass_counts = vec![0; world.n_code()];
    let mut anchor_failures = BTreeSet::new();
    let mut ledger = InteractionLedger::new();
    let n_tests = world.n_tests() as u32;

    for round in 0..params.rounds.max(1) {
        let full = sample_matrix_with_offset(world, 0, &mut rng);
        // Anchors keep their ids (and are consumed once); other tests are renumbered per round.
        let cols: Vec<TestId> = (0..n_tests)
            .map(|j| if world.anchors.contains(&(j as usize)) { TestId(j) } else { TestId(j + round as u32 * n_tests) })
            .collect();
        let mut bits = Vec::with_capacity(full.n_rows() * full.n_cols());
        for r in 0..full.n_rows() {
            for c in 0..full.n_cols() {
                bits.push(full.get(r, c).is_pass());
            }
        }
        let matrix = ObservationMatrix::from_bits(full.rows().to_vec(), cols.clone(), &bits);
        if round == 0 {
            for (r, count) in pass_counts.iter_mut().enumerate() {
                *count = full.pass_count(r);
            }
        }

        let mut tests = BTreeMap::new();
        let mut anchors = BTreeSet::new();
        for (j, id) in cols.iter().enumerate() {
            if world.anchors.contains(&j) && params.anchoring {
                anchors.insert(*id);
                tests.insert(*id, anchor_belief);
            } else {
                tests.insert(*id, prior);
            }
        }
        let outcome = generation_update(&matrix, &code, &tests, &anchors, &params.update, &mut ledger)
            .expect("lab matrices are total");
        code = outcome.code;
        anchor_failures.extend(outcome.anchor_failures);
    }
    Trial { code_beliefs: code, pass_counts, anchor_failures }
}

/// Index of the largest pass count; ties go to the smaller index.
pub fn max_pass_baseline(pass_counts: &[usize]) -> Option<usize> {
    pass_counts.iter().enumerate().max_by(|(ia, a), (ib, b)| a.cmp(b).then_with(|| ib.cmp(ia))).map(|(i, _)| i)
}

pub fn recovery_experiment(
    world: &LatentWorld,
    params: &LabParams,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<RecoveryStats, LabError> {
    if !world.code_correct.iter().any(|&x| x) {
        return Err(LabError::NoCorrectCandidate);
    }
    let (mut n, mut map_hits, mut base_hits, mut violations) = (0usize, 0usize, 0usize, 0usize);
    let (mut sum_c, mut n_c, mut sum_i, mut n_i) = (0.0, 0usize, 0.0, 0usize);
    for seed in seeds {
        let trial = run_trial(world, params, seed);
        n += 1;
        let best = map_select(&trial.code_beliefs).expect("world has candidates");
        if world.code_correct[best.0 as usize] {
            map_hits += 1;
        }
        if max_pass_baseline(&trial.pass_counts).is_some_and(|i| world.code_correct[i]) {
            base_hits += 1;
        }
        for (id, b) in &trial.code_beliefs {
            if world.code_correct[id.0 as usize] {
                sum_c += b.probability();
                n_c += 1;
            } else {
                sum_i += b.probability();
                n_i += 1;
                if params.anchoring && trial.anchor_failures.contains(id) && b.probability() > 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    let mean = |s: f64, k: usize| if k == 0 { f64::NAN } else { s / k as f64 };
    Ok(RecoveryStats {
        seeds: n,
        anchoring: params.anchoring,
        rounds: params.rounds,
        map_accuracy: map_hits as f64 / n.max(1) as f64,
        baseline_accuracy: base_hits as f64 / n.max(1) as f64,
        mean_belief_correct: mean(sum_c, n_c),
        mean_belief_incorrect: mean(sum_i, n_i),
        anchor_violations: violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub target: &'static str,
    pub belief: f64,
    pub threshold: f64,
    pub delta: f64,
    pub predicted: i8,
    pub observed: i8,
}

impl SweepRow {
    pub fn agrees(&self) -> bool {
        self.predicted == self.observed
    }
}

fn sign(x: f64, tol: f64) -> i8 {
    if x > tol {
        1
    } else if x < -tol {
        -1
    } else {
        0
    }
}

/// For every noise point, belief and update direction, compares the sign of
/// the pass-outcome weight of evidence with the credibility-threshold rule:
/// a pass rewards the updated individual iff the interactor's belief exceeds
/// `(gamma - beta) / d` for test updates and `(gamma - alpha) / d` for code
/// updates, `d = 1 - alpha - beta + gamma`.
pub fn threshold_sweep(noises: &[NoiseModel], beliefs: &[f64], limit: LogOddsLimit) -> Vec<SweepRow> {
    const TOL: f64 = 1e-12;
    let mut rows = Vec::new();
    for noise in noises {
        let d = noise.credibility_denominator();
        for &b in beliefs {
            for target in [UpdateTarget::TestUpdate, UpdateTarget::CodeUpdate] {
                let (raw, delta, name) = match target {
                    UpdateTarget::TestUpdate => {
                        ((noise.gamma - noise.beta) / d, woe_test(Outcome::Pass, b, noise, limit), "test")
                    }
                    UpdateTarget::CodeUpdate => {
                        ((noise.gamma - noise.alpha) / d, woe_code(Outcome::Pass, b, noise, limit), "code")
                    }
                };
                // The threshold rule is stated for interior beliefs; the
                // weight of evidence is linear-fractional in b, so the sign of
                // Δ is the sign of d·(b - raw) wherever both ratios are finite.
                let predicted = sign(b - raw, TOL);
                rows.push(SweepRow {
                    alpha: noise.alpha,
                    beta: noise.beta,
                    gamma: noise.gamma,
                    target: name,
                    belief: b,
                    threshold: raw.max(0.0),
                    delta,
                    predicted,
                    observed: sign(delta, TOL),
                });
            }
        }
    }
    rows
}

/// Exact posterior marginals `P(X_i = 1 | D)` by enumerating every latent
/// configuration. Priors: `b_init` for candidates and non-anchor tests;
/// anchors are valid with certainty. Only practical for tiny worlds.
pub fn exact_posterior(
    matrix: &ObservationMatrix,
    anchors: &BTreeSet<TestId>,
    b_init: f64,
    noise: &NoiseModel,
    anchor_noise: &NoiseModel,
) -> Vec<f64> {
    let (n, m) = (matrix.n_rows(), matrix.n_cols());
    assert!(n <= 12 && m <= 12, "exact enumeration is limited to tiny worlds");
    let is_anchor: Vec<bool> = matrix.cols().iter().map(|t| anchors.contains(t)).collect();
    let mut marginal = vec![0.0; n];
    let mut total = 0.0;
    for x in 0u32..(1 << n) {
        let px: f64 = (0..n).map(|i| if x >> i & 1 == 1 { b_init } else { 1.0 - b_init }).product();
        for y in 0u32..(1 << m) {
            let mut w = px;
            for (j, &anchor) in is_anchor.iter().enumerate() {
                let valid = y >> j & 1 == 1;
                w *= match (anchor, valid) {
                    (true, true) => 1.0,
                    (true, false) => 0.0,
                    (false, true) => b_init,
                    (false, false) => 1.0 - b_init,
                };
            }
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                for (j, &anchor) in is_anchor.iter().enumerate() {
                    let model = if anchor { anchor_noise } else { noise };
                    let p = pass_probability(x >> i & 1 == 1, y >> j & 1 == 1, model);
                    w *= if matrix.get(i, j).is_pass() { p } else { 1.0 - p };
                }
            }
            total += w;
            for (i, mi) in marginal.iter_mut().enumerate() {
                if x >> i & 1 == 1 {
                    *mi += w;
                }
            }
        }
    }
    marginal.iter().map(|m| m / total).collect()
}
