//! Pipeline configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::postproc::Thresholds;
use crate::sandbox::ResourceLimits;

/// The configuration file shipped with the crate. Parses to
/// [`PipelineConfig::default`].
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub backend: BackendKind,
    /// Writes problems and test utilities.
    pub generator_model: String,
    /// Samples candidate solutions.
    pub solver_model: String,
    /// Cache (and replay) directory, relative to the run directory.
    pub cache_dir: PathBuf,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retries: u32,
    pub max_in_flight: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Replay,
            generator_model: "gpt-4o".into(),
            solver_model: "qwq-32b".into(),
            cache_dir: PathBuf::from("llm-cache"),
            temperature: 0.6,
            max_tokens: 8192,
            retries: 3,
            max_in_flight: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workers: usize,
    pub rng_seed: u64,
    pub limits: ResourceLimits,
    pub generator_timeout_seconds: f64,
    pub e_default: u32,
    pub grid_cap: usize,
    pub copies_per_point: u32,
    pub max_regenerations: u32,
    pub min_inputs: usize,
    pub n_candidates: u32,
    pub samples_per_seed: u32,
    pub threshold_default: f64,
    pub threshold_hard: f64,
    pub hard_rating_cutoff: i64,
    pub cross_check_oracles: bool,
    pub ngram_n: usize,
    pub benchmark_path: Option<PathBuf>,
    pub llm: LlmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            workers: 4,
            rng_seed: 0,
            limits: ResourceLimits::default(),
            generator_timeout_seconds: 30.0,
            e_default: 5,
            grid_cap: 200,
            copies_per_point: 1,
            max_regenerations: 3,
            min_inputs: 50,
            n_candidates: 16,
            samples_per_seed: 1,
            threshold_default: 0.60,
            threshold_hard: 0.40,
            hard_rating_cutoff: 1600,
            cross_check_oracles: false,
            ngram_n: 16,
            benchmark_path: None,
            llm: LlmConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        for (name, t) in [("threshold_default", self.threshold_default), ("threshold_hard", self.threshold_hard)] {
            if !(t > 0.0 && t <= 1.0) {
                return bad(&format!("{name} must be in (0, 1], got {t}"));
            }
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.min_inputs == 0 {
            return bad("min_inputs must be at least 1");
        }
        if self.ngram_n == 0 || self.grid_cap == 0 || self.copies_per_point == 0 {
            return bad("ngram_n, grid_cap and copies_per_point must be positive");
        }
        if self.n_candidates == 0 || self.samples_per_seed == 0 {
            return bad("n_candidates and samples_per_seed must be positive");
        }
        if !(self.generator_timeout_seconds > 0.0) {
            return bad("generator_timeout_seconds must be positive");
        }
        self.limits.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            default: self.threshold_default,
            hard: self.threshold_hard,
            hard_rating_cutoff: self.hard_rating_cutoff,
        }
    }

    pub fn generator_limits(&self) -> ResourceLimits {
        self.limits.with_timeout(self.generator_timeout_seconds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_defaults() {
        assert_eq!(PipelineConfig::from_toml(DEFAULT_CONFIG_TOML).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = PipelineConfig::from_toml("workers = 2\n[llm]\nbackend = \"live\"\n").unwrap();
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.llm.backend, BackendKind::Live);
        assert_eq!(cfg.min_inputs, 50);
        assert_eq!(cfg.llm.temperature, 0.6);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml("threshold_default = 0.0").is_err());
        assert!(PipelineConfig::from_toml("threshold_hard = 1.5").is_err());
        assert!(PipelineConfig::from_toml("min_inputs = 0").is_err());
        assert!(PipelineConfig::from_toml("no_such_key = 1").is_err());
    }

    #[test]
    fn round_trips() {
        let cfg = PipelineConfig {
            benchmark_path: Some("bench.jsonl".into()),
            ..Default::default()
        };
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
