use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{LogOddsLimit, NoiseModel, UpdateParams};
use crate::gateway::ProviderConfig;
use crate::operators::OperatorName;
use crate::sandbox::ExecutionLimits;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodeOpRates {
    pub debug: f64,
    pub reimplement: f64,
    pub crossover: f64,
}

impl Default for CodeOpRates {
    fn default() -> Self {
        Self { debug: 0.6, reimplement: 0.2, crossover: 0.2 }
    }
}

impl CodeOpRates {
    pub fn table(&self) -> Vec<(OperatorName, f64)> {
        vec![
            (OperatorName::Debug, self.debug),
            (OperatorName::Reimplement, self.reimplement),
            (OperatorName::SemanticCrossover, self.crossover),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestOpRates {
    pub discriminate: f64,
    pub edge_case: f64,
    pub complementary: f64,
}

impl Default for TestOpRates {
    fn default() -> Self {
        Self { discriminate: 0.5, edge_case: 0.3, complementary: 0.2 }
    }
}

impl TestOpRates {
    pub fn table(&self) -> Vec<(OperatorName, f64)> {
        vec![
            (OperatorName::Discriminate, self.discriminate),
            (OperatorName::EdgeCaseGen, self.edge_case),
            (OperatorName::ComplementaryCrossover, self.complementary),
        ]
    }
}

/// Every tunable of a run. Missing TOML keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Number of generations (G_max).
    pub generations: u32,
    pub n_init: usize,
    /// Distinct approaches requested per initialization prompt.
    pub n_approaches: usize,
    /// Initialization prompts sent.
    pub n_samples: usize,
    /// Upper bound on the live code population.
    pub n_max: usize,
    pub m_init: usize,
    pub elitism_rate: f64,
    pub offspring_rate: f64,
    pub code_op_rates: CodeOpRates,
    pub test_op_rates: TestOpRates,
    /// Diverging inputs kept per equivalent pair; each yields two diff tests.
    pub diff_inputs_per_pair: usize,
    /// Inputs requested from each generator program.
    pub diff_samples: usize,
    /// Equivalence blocks probed for divergence per test-evolving generation.
    pub diff_blocks_per_generation: usize,
    pub anchor_noise: NoiseModel,
    pub evolved_noise: NoiseModel,
    pub eta: f64,
    pub b_init: f64,
    pub max_log_odds: f64,
    pub anchoring_enabled: bool,
    pub seed: u64,
    /// Cap on surviving non-anchor tests after elitism.
    pub test_soft_cap: usize,
    /// Failing tests shown to the repair operator.
    pub debug_context: usize,
    /// Provider calls per operator invocation.
    pub operator_retries: usize,
    /// Stop once a candidate passes every anchor with belief above 1 - 1e-6.
    pub early_stop: bool,
    pub limits: ExecutionLimits,
    pub provider: ProviderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            generations: 10,
            n_init: 10,
            n_approaches: 5,
            n_samples: 2,
            n_max: 15,
            m_init: 20,
            elitism_rate: 0.3,
            offspring_rate: 0.3,
            code_op_rates: CodeOpRates::default(),
            test_op_rates: TestOpRates::default(),
            diff_inputs_per_pair: 5,
            diff_samples: 20,
            diff_blocks_per_generation: 2,
            anchor_noise: NoiseModel::anchor_default(),
            evolved_noise: NoiseModel::evolved_default(),
            eta: 1.0,
            b_init: 0.2,
            max_log_odds: crate::belief::DEFAULT_MAX_LOG_ODDS,
            anchoring_enabled: true,
            seed: 0,
            test_soft_cap: 64,
            debug_context: 3,
            operator_retries: 3,
            early_stop: false,
            limits: ExecutionLimits::default(),
            provider: ProviderConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn check_rates(name: &str, rates: &[(OperatorName, f64)]) -> Result<(), ConfigError> {
    if rates.iter().any(|(_, r)| !(r.is_finite() && *r >= 0.0)) {
        return Err(invalid(format!("{name} must be non-negative")));
    }
    let sum: f64 = rates.iter().map(|(_, r)| r).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{name} must sum to 1, got {sum}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: display.clone(), source })?;
        let config = Self::from_toml_str(&text).map_err(|source| ConfigError::Parse { path: display, source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("generations", self.generations as usize),
            ("n_init", self.n_init),
            ("n_approaches", self.n_approaches),
            ("n_samples", self.n_samples),
            ("n_max", self.n_max),
            ("m_init", self.m_init),
            ("diff_inputs_per_pair", self.diff_inputs_per_pair),
            ("diff_samples", self.diff_samples),
            ("operator_retries", self.operator_retries),
            ("debug_context", self.debug_context),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if self.n_approaches * self.n_samples != self.n_init {
            return Err(invalid(format!(
                "n_approaches * n_samples must equal n_init ({} * {} != {})",
                self.n_approaches, self.n_samples, self.n_init
            )));
        }
        if self.n_init > self.n_max {
            return Err(invalid("n_init must not exceed n_max"));
        }
        for (name, f) in [("elitism_rate", self.elitism_rate), ("offspring_rate", self.offspring_rate)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(invalid(format!("{name} must be in (0, 1], got {f}")));
            }
        }
        if !(self.b_init > 0.0 && self.b_init < 1.0) {
            return Err(invalid(format!("b_init must be in (0, 1), got {}", self.b_init)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        check_rates("code_op_rates", &self.code_op_rates.table())?;
        check_rates("test_op_rates", &self.test_op_rates.table())?;
        self.anchor_noise.validate().map_err(|e| invalid(format!("anchor_noise: {e}")))?;
        self.evolved_noise.validate().map_err(|e| invalid(format!("evolved_noise: {e}")))?;
        LogOddsLimit::new(self.max_log_odds).map_err(|e| invalid(e.to_string()))?;
        self.limits.validate().map_err(invalid)?;
        self.provider.validate().map_err(invalid)?;
        Ok(())
    }

    pub fn limit(&self) -> LogOddsLimit {
        LogOddsLimit::new(self.max_log_odds).expect("validated config")
    }

    pub fn update_params(&self) -> UpdateParams {
        UpdateParams {
            anchor_noise: self.anchor_noise,
            evolved_noise: self.evolved_noise,
            eta: self.eta,
            limit: self.limit(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        c.code_op_rates.debug = 0.7;
        assert!(c.validate().is_err());
        assert!(RunConfig { b_init: 1.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { n_samples: 3, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn partial_toml() {
        let c = RunConfig::from_toml_str(
            "generations = 4\n[code_op_rates]\ndebug = 1.0\nreimplement = 0.0\ncrossover = 0.0\n",
        )
        .unwrap();
        assert_eq!(c.generations, 4);
        assert_eq!(c.code_op_rates.debug, 1.0);
        assert_eq!(c.test_op_rates, TestOpRates::default());
        c.validate().unwrap();
    }
}
