//! Noisy-sensor belief calculus in log-odds space.
//!
//! Every code candidate and every test carries a [`Belief`], the posterior
//! probability that it is correct (code) or valid (test). An execution outcome
//! between a candidate and a test is a noisy observation whose likelihood is
//! parameterized by a [`NoiseModel`]:
//!
//! ```text
//!                     test valid    test broken
//!   code correct          1            alpha
//!   code incorrect       beta          gamma        P(pass | X, Y)
//! ```
//!
//! Evidence is folded in additively in log-odds space, scaled by a learning
//! rate `eta`, and every log-odds value is clamped to `[-L, +L]` so that the
//! "infinite" penalty of failing a ground-truth anchor stays finite.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::{CodeId, ObservationMatrix, TestId};

/// Default log-odds clamp. `sigmoid(-30) ≈ 9.4e-14`.
pub const DEFAULT_MAX_LOG_ODDS: f64 = 30.0;

/// Smallest credibility denominator treated as positive.
pub const DENOMINATOR_FLOOR: f64 = 1e-9;

/// Probabilities are pulled into `[EPSILON, 1 - EPSILON]` before taking a logit.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("noise parameter {name} = {value} outside [0, 1]")]
    NoiseOutOfRange { name: &'static str, value: f64 },
    #[error("noise model has non-positive credibility denominator 1 - alpha - beta + gamma = {0}")]
    NonPositiveDenominator(f64),
    #[error("log-odds clamp must be positive and finite, got {0}")]
    InvalidClamp(f64),
    #[error("code {0} has no row in the observation matrix")]
    MissingRow(CodeId),
    #[error("test {0} has no column in the observation matrix")]
    MissingColumn(TestId),
}

/// Symmetric clamp applied to every log-odds value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogOddsLimit(f64);

impl LogOddsLimit {
    pub fn new(limit: f64) -> Result<Self, BeliefError> {
        if limit.is_finite() && limit > 0.0 {
            Ok(Self(limit))
        } else {
            Err(BeliefError::InvalidClamp(limit))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Clamps `x` into `[-L, +L]`. NaN collapses to `-L`.
    pub fn clamp(self, x: f64) -> f64 {
        if x.is_nan() {
            -self.0
        } else {
            x.clamp(-self.0, self.0)
        }
    }
}

impl Default for LogOddsLimit {
    fn default() -> Self {
        Self(DEFAULT_MAX_LOG_ODDS)
    }
}

/// `ln(p / (1 - p))`, clamped to the limit. Callers are expected to have
/// pulled `p` into `[EPSILON, 1 - EPSILON]`; exact 0 and 1 still land on the clamp.
pub fn logit(p: f64, limit: LogOddsLimit) -> f64 {
    limit.clamp((p / (1.0 - p)).ln())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Posterior probability of correctness, stored alongside its clamped log-odds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    probability: f64,
    log_odds: f64,
}

impl Belief {
    pub fn from_probability(p: f64, limit: LogOddsLimit) -> Self {
        let p = if p.is_nan() { 0.5 } else { p.clamp(EPSILON, 1.0 - EPSILON) };
        Self::from_log_odds(logit(p, limit), limit)
    }

    pub fn from_log_odds(log_odds: f64, limit: LogOddsLimit) -> Self {
        let log_odds = limit.clamp(log_odds);
        Self { probability: sigmoid(log_odds), log_odds }
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn log_odds(&self) -> f64 {
        self.log_odds
    }

    /// Total order by log-odds, which keeps resolution near 0 and 1.
    pub fn cmp_strength(&self, other: &Self) -> std::cmp::Ordering {
        self.log_odds.total_cmp(&other.log_odds)
    }
}

/// The (alpha, beta, gamma) sensor parameters for one class of tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// P(pass | correct code, broken test).
    pub alpha: f64,
    /// P(pass | incorrect code, valid test).
    pub beta: f64,
    /// P(pass | incorrect code, broken test).
    pub gamma: f64,
}

impl NoiseModel {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, BeliefError> {
        let model = Self { alpha, beta, gamma };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(BeliefError::NoiseOutOfRange { name, value });
            }
        }
        // Grid points such as (0.1, 1.0, 0.1) give d = 1e-17 through rounding.
        let d = self.credibility_denominator();
        if d <= DENOMINATOR_FLOOR {
            return Err(BeliefError::NonPositiveDenominator(d));
        }
        Ok(())
    }

    /// `1 - alpha - beta + gamma`.
    pub fn credibility_denominator(&self) -> f64 {
        1.0 - self.alpha - self.beta + self.gamma
    }

    /// Parameters used for public-example anchors.
    pub fn anchor_default() -> Self {
        Self { alpha: 0.0, beta: 0.2, gamma: 0.0 }
    }

    /// Parameters used for generated unit and differential tests.
    pub fn evolved_default() -> Self {
        Self { alpha: 0.1, beta: 0.2, gamma: 0.25 }
    }

    fn swapped(&self) -> Self {
        Self { alpha: self.beta, beta: self.alpha, gamma: self.gamma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Fail,
    Pass,
}

impl Outcome {
    pub fn is_pass(self) -> bool {
        matches!(self, Outcome::Pass)
    }
}

impl From<bool> for Outcome {
    fn from(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// Which population an update is being applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateTarget {
    CodeUpdate,
    TestUpdate,
}

/// One weight-of-evidence contribution from a single (code, test) interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub code_id: CodeId,
    pub test_id: TestId,
    pub outcome: Outcome,
    pub delta: f64,
}

fn log_ratio(numerator: f64, denominator: f64, limit: LogOddsLimit) -> f64 {
    let l = limit.get();
    if numerator <= 0.0 {
        -l
    } else if denominator <= 0.0 {
        l
    } else {
        (numerator / denominator).clamp((-l).exp(), l.exp()).ln()
    }
}

/// Weight of evidence a single outcome contributes to a code candidate,
/// conditioned on the belief in the test that produced it.
pub fn woe_code(outcome: Outcome, b_test: f64, noise: &NoiseModel, limit: LogOddsLimit) -> f64 {
    let b = b_test.clamp(0.0, 1.0);
    let NoiseModel { alpha, beta, gamma } = *noise;
    match outcome {
        Outcome::Pass => log_ratio(b + alpha * (1.0 - b), beta * b + gamma * (1.0 - b), limit),
        Outcome::Fail => log_ratio((1.0 - alpha) * (1.0 - b), (1.0 - beta) * b + (1.0 - gamma) * (1.0 - b), limit),
    }
}

/// Weight of evidence a single outcome contributes to a test, conditioned on
/// the belief in the code it ran against. Same form as [`woe_code`] with the
/// roles of alpha and beta exchanged.
pub fn woe_test(outcome: Outcome, b_code: f64, noise: &NoiseModel, limit: LogOddsLimit) -> f64 {
    woe_code(outcome, b_code, &noise.swapped(), limit)
}

/// Interactor belief at which a pass contributes exactly zero evidence.
/// Above it a pass rewards and a fail penalizes; below it both invert.
pub fn credibility_threshold(noise: &NoiseModel, target: UpdateTarget) -> f64 {
    let d = noise.credibility_denominator();
    let numerator = match target {
        UpdateTarget::TestUpdate => noise.gamma - noise.beta,
        UpdateTarget::CodeUpdate => noise.gamma - noise.alpha,
    };
    (numerator / d).max(0.0)
}

/// Folds a batch of deltas into a prior: `logit(b') = logit(b) + eta * sum(deltas)`.
pub fn apply_evidence(prior: Belief, deltas: &[f64], eta: f64, limit: LogOddsLimit) -> Belief {
    let total: f64 = deltas.iter().sum();
    Belief::from_log_odds(prior.log_odds() + eta * total, limit)
}

/// Set of (code, test) pairs whose evidence has already been absorbed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionLedger {
    counted: BTreeSet<(CodeId, TestId)>,
}

impl InteractionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, code: CodeId, test: TestId) -> bool {
        self.counted.contains(&(code, test))
    }

    /// Returns false if the pair was already present.
    pub fn insert(&mut self, code: CodeId, test: TestId) -> bool {
        self.counted.insert((code, test))
    }

    pub fn len(&self) -> usize {
        self.counted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counted.is_empty()
    }
}

/// Sensor parameters and step settings for one generation update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub anchor_noise: NoiseModel,
    pub evolved_noise: NoiseModel,
    pub eta: f64,
    pub limit: LogOddsLimit,
}

impl Default for UpdateParams {
    fn default() -> Self {
        Self {
            anchor_noise: NoiseModel::anchor_default(),
            evolved_noise: NoiseModel::evolved_default(),
            eta: 1.0,
            limit: LogOddsLimit::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub code: BTreeMap<CodeId, Belief>,
    pub tests: BTreeMap<TestId, Belief>,
    /// Candidates that failed at least one anchor column of the matrix.
    pub anchor_failures: BTreeSet<CodeId>,
    /// Pairs newly added to the ledger by this update.
    pub consumed: usize,
}

/// One generation of reciprocal belief updates, in three strictly ordered phases:
///
/// 1. code beliefs absorb anchor columns only;
/// 2. non-anchor test beliefs absorb evidence from the phase-1 code beliefs;
/// 3. code beliefs absorb non-anchor columns, weighed by the test beliefs as
///    they stood at the start of the generation.
///
/// Anchors are treated as exactly valid and are never updated. A candidate
/// that fails any anchor is pinned to `-L` at the end of the update, since a
/// `-inf` penalty absorbs any finite evidence. Pairs already in the ledger
/// contribute nothing; every pair consumed here is added to it.
pub fn generation_update(
    matrix: &ObservationMatrix,
    code_beliefs: &BTreeMap<CodeId, Belief>,
    test_beliefs: &BTreeMap<TestId, Belief>,
    anchors: &BTreeSet<TestId>,
    params: &UpdateParams,
    ledger: &mut InteractionLedger,
) -> Result<UpdateOutcome, BeliefError> {
    let limit = params.limit;
    let mut rows = Vec::with_capacity(code_beliefs.len());
    for &id in code_beliefs.keys() {
        rows.push((id, matrix.row_index(id).ok_or(BeliefError::MissingRow(id))?));
    }
    let mut cols = Vec::with_capacity(test_beliefs.len());
    for &id in test_beliefs.keys() {
        cols.push((id, matrix.col_index(id).ok_or(BeliefError::MissingColumn(id))?));
    }
    for &id in anchors {
        if matrix.col_index(id).is_none() {
            return Err(BeliefError::MissingColumn(id));
        }
    }

    let fresh = |code: CodeId, test: TestId| !ledger.contains(code, test);

    let mut anchor_failures = BTreeSet::new();
    for &(code, r) in &rows {
        for &anchor in anchors {
            let c = matrix.col_index(anchor).expect("checked above");
            if !matrix.get(r, c).is_pass() {
                anchor_failures.insert(code);
            }
        }
    }

    // Phase 1: code on anchors.
    let mut code_after: BTreeMap<CodeId, Belief> = BTreeMap::new();
    for &(code, r) in &rows {
        let deltas: Vec<f64> = anchors
            .iter()
            .filter(|&&a| fresh(code, a))
            .map(|&a| {
                let c = matrix.col_index(a).expect("checked above");
                woe_code(matrix.get(r, c), 1.0, &params.anchor_noise, limit)
            })
            .collect();
        let mut belief = apply_evidence(code_beliefs[&code], &deltas, params.eta, limit);
        if anchor_failures.contains(&code) {
            belief = Belief::from_log_odds(-limit.get(), limit);
        }
        code_after.insert(code, belief);
    }

    // Phase 2: evolved tests audited by the anchored code population.
    let mut tests_after: BTreeMap<TestId, Belief> = BTreeMap::new();
    for &(test, c) in &cols {
        let prior = test_beliefs[&test];
        if anchors.contains(&test) {
            tests_after.insert(test, prior);
            continue;
        }
        let deltas: Vec<f64> = rows
            .iter()
            .filter(|&&(code, _)| fresh(code, test))
            .map(|&(code, r)| woe_test(matrix.get(r, c), code_after[&code].probability(), &params.evolved_noise, limit))
            .collect();
        tests_after.insert(test, apply_evidence(prior, &deltas, params.eta, limit));
    }

    // Phase 3: code on evolved tests, using start-of-generation test beliefs.
    for &(code, r) in &rows {
        let deltas: Vec<f64> = cols
            .iter()
            .filter(|&&(test, _)| !anchors.contains(&test) && fresh(code, test))
            .map(|&(test, c)| {
                woe_code(matrix.get(r, c), test_beliefs[&test].probability(), &params.evolved_noise, limit)
            })
            .collect();
        let entry = code_after.get_mut(&code).expect("filled in phase 1");
        *entry = apply_evidence(*entry, &deltas, params.eta, limit);
        if anchor_failures.contains(&code) {
            *entry = Belief::from_log_odds(-limit.get(), limit);
        }
    }

    let mut consumed = 0;
    for &(code, _) in &rows {
        for &(test, _) in &cols {
            if ledger.insert(code, test) {
                consumed += 1;
            }
        }
        for &anchor in anchors {
            if ledger.insert(code, anchor) {
                consumed += 1;
            }
        }
    }

    Ok(UpdateOutcome { code: code_after, tests: tests_after, anchor_failures, consumed })
}
