//! Run configuration: one TOML document with a section per subsystem.
//!
//! Unknown keys are rejected. Every key has a default, so an empty file is
//! a valid configuration. Precedence when a command runs is
//! command-line flag > config file > `ROTORFALL_SEED` (seed only) > default.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::QuadParams;
use crate::env::{EpisodeConfig, RewardConfig};
use crate::sac::SacConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Environment steps; 300k at desk scale, 15M for a paper-scale run.
    pub total_steps: u64,
    pub log_interval: u64,
    pub eval_interval: u64,
    pub checkpoint_interval: u64,
    /// Resolved at startup when absent; see module docs.
    pub seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 300_000,
            log_interval: 1000,
            eval_interval: 10_000,
            checkpoint_interval: 50_000,
            seed: None,
        }
    }
}

/// Evaluation maneuvers and disturbance settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Evaluation episode length, s.
    pub duration: f64,
    /// Goal held at the origin this long before a maneuver starts, s.
    pub stabilize_time: f64,
    /// Stabilization time used when wind is present, s.
    pub wind_stabilize_time: f64,
    pub descent_rate: f64,
    /// Landing floor below the origin, m; motors are cut on reaching it.
    pub land_floor: f64,
    pub circle_radius: f64,
    pub circle_period: f64,
    pub saddle_radius: f64,
    pub saddle_amplitude: f64,
    pub saddle_period: f64,
    /// Linear wind drag constant, N/(m/s).
    pub wind_drag_coeff: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            duration: 40.0,
            stabilize_time: 5.0,
            wind_stabilize_time: 10.0,
            descent_rate: 0.1,
            land_floor: 1.5,
            circle_radius: 1.0,
            circle_period: 20.0,
            saddle_radius: 1.0,
            saddle_amplitude: 0.5,
            saddle_period: 20.0,
            wind_drag_coeff: 0.3,
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<(), String> {
        let positive = [
            ("duration", self.duration),
            ("descent_rate", self.descent_rate),
            ("land_floor", self.land_floor),
            ("circle_radius", self.circle_radius),
            ("circle_period", self.circle_period),
            ("saddle_radius", self.saddle_radius),
            ("saddle_period", self.saddle_period),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{k} must be positive"));
            }
        }
        let non_negative = [
            ("stabilize_time", self.stabilize_time),
            ("wind_stabilize_time", self.wind_stabilize_time),
            ("saddle_amplitude", self.saddle_amplitude),
            ("wind_drag_coeff", self.wind_drag_coeff),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{k} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub quad: QuadParams,
    pub episode: EpisodeConfig,
    pub reward: RewardConfig,
    pub sac: SacConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

fn invalid(section: &str, reason: String) -> ConfigError {
    // validators lead with the offending field name
    let field = reason.split_whitespace().next().unwrap_or("").trim_end_matches(',');
    ConfigError::Invalid {
        key: format!("{section}.{field}"),
        reason,
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.quad.validate().map_err(|e| {
            let reason = e.to_string().trim_start_matches("invalid parameter: ").to_string();
            invalid("quad", reason)
        })?;
        self.episode.validate().map_err(|r| invalid("episode", r))?;
        self.reward.validate().map_err(|_| ConfigError::Invalid {
            key: "reward.c1/c2/c3".into(),
            reason: "reward constants must be positive".into(),
        })?;
        self.sac.validate().map_err(|r| invalid("sac", r))?;
        self.eval.validate().map_err(|r| invalid("eval", r))?;
        let t = &self.train;
        if t.log_interval == 0 {
            return Err(invalid("train", "log_interval must be positive".into()));
        }
        if t.eval_interval == 0 || !t.eval_interval.is_multiple_of(t.log_interval) {
            return Err(invalid("train", "eval_interval must be a positive multiple of log_interval".into()));
        }
        if t.checkpoint_interval == 0 || !t.checkpoint_interval.is_multiple_of(t.log_interval) {
            return Err(invalid(
                "train",
                "checkpoint_interval must be a positive multiple of log_interval".into(),
            ));
        }
        Ok(())
    }

    /// Seed actually used: configured value, else `env_seed`, else 0.
    pub fn resolve_seed(&mut self, env_seed: Option<u64>) -> u64 {
        let seed = self.train.seed.or(env_seed).unwrap_or(0);
        self.train.seed = Some(seed);
        seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = Config::default();
        cfg.train.seed = Some(7);
        cfg.episode.failed_rotor = 3;
        cfg.sac.target_entropy = Some(-3.5);
        let back = Config::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::from_toml_str("[sac]\ngamma = 0.9\nbogus_key = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        let err = Config::from_toml_str("[nope]\n").unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = Config::from_toml_str("[sac]\ngamma = 1.5\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "sac.gamma"), "{err}");
        let err = Config::from_toml_str("[quad]\nmass = -1.0\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "quad.mass"), "{err}");
        let err = Config::from_toml_str("[train]\nlog_interval = 300\neval_interval = 1000\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "train.eval_interval"), "{err}");
        let err = Config::from_toml_str("[episode]\nfailed_rotor = 5\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "episode.failed_rotor"), "{err}");
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = Config::default();
        assert_eq!(cfg.resolve_seed(Some(9)), 9);
        let mut cfg = Config::default();
        cfg.train.seed = Some(4);
        assert_eq!(cfg.resolve_seed(Some(9)), 4);
        let mut cfg = Config::default();
        assert_eq!(cfg.resolve_seed(None), 0);
    }
}
