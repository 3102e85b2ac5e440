//! Versioned JSON container for a training run.
//!
//! Layout (top-level object):
//!
//! | key           | content                                              |
//! |---------------|------------------------------------------------------|
//! | `format`      | always `"rotorfall-checkpoint"`                      |
//! | `version`     | layout version, currently 1                          |
//! | `step`        | environment steps taken                              |
//! | `episode`     | episodes started                                     |
//! | `seed`        | run seed                                             |
//! | `rng`         | full ChaCha8 generator state (seed, stream, position) |
//! | `best_return` | best deterministic-eval return so far, or null       |
//! | `config`      | effective run configuration                          |
//! | `agent`       | every network's flat parameters, optimizer moments and step counts, log-temperature |
//!
//! Floats are written in shortest round-trip form, so decode(encode(x))
//! is bit-exact. The replay buffer is not stored.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::nn::MlpParams;
use crate::sac::SacAgent;

pub const FORMAT_TAG: &str = "rotorfall-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: {0}")]
    Decode(String),
    #[error("unsupported checkpoint version {found} (this build reads {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint is inconsistent: {0}")]
    Inconsistent(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub step: u64,
    pub episode: u64,
    pub seed: u64,
    pub rng: ChaCha8Rng,
    pub best_return: Option<f64>,
    pub config: Config,
    pub agent: SacAgent,
}

#[derive(Deserialize)]
struct Probe {
    format: Option<String>,
    version: Option<u32>,
}

impl Checkpoint {
    pub fn new(step: u64, episode: u64, seed: u64, rng: ChaCha8Rng, best_return: Option<f64>, config: Config, agent: SacAgent) -> Self {
        Self {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            step,
            episode,
            seed,
            rng,
            best_return,
            config,
            agent,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint values are finite")
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let probe: Probe = serde_json::from_slice(bytes).map_err(|e| CheckpointError::Decode(e.to_string()))?;
        if probe.format.as_deref() != Some(FORMAT_TAG) {
            return Err(CheckpointError::Decode(format!("missing `format: \"{FORMAT_TAG}\"`")));
        }
        match probe.version {
            Some(FORMAT_VERSION) => {}
            Some(found) => return Err(CheckpointError::Version { found }),
            None => return Err(CheckpointError::Decode("missing `version`".into())),
        }
        let ck: Checkpoint = serde_json::from_slice(bytes).map_err(|e| CheckpointError::Decode(e.to_string()))?;
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<(), CheckpointError> {
        let bad = |m: String| Err(CheckpointError::Inconsistent(m));
        let a = &self.agent;
        for (name, net) in [
            ("actor", &a.actor),
            ("critic1", &a.critic1),
            ("critic2", &a.critic2),
            ("target1", &a.target1),
            ("target2", &a.target2),
        ] {
            MlpParams::from_flat(net.layer_sizes(), net.params().to_vec())
                .map_err(|e| CheckpointError::Inconsistent(format!("{name}: {e}")))?;
        }
        if a.input_scale.len() != a.obs_dim {
            return bad("input_scale length differs from obs_dim".into());
        }
        if a.actor.input_dim() != a.obs_dim || a.actor.output_dim() != a.head.input_dim() || a.head.action_dim != a.act_dim {
            return bad("actor shape does not match observation/action sizes".into());
        }
        for (name, net) in [("critic1", &a.critic1), ("critic2", &a.critic2), ("target1", &a.target1), ("target2", &a.target2)] {
            if net.input_dim() != a.obs_dim + a.act_dim || net.output_dim() != 1 {
                return bad(format!("{name} shape does not match observation/action sizes"));
            }
        }
        if a.target1.layer_sizes() != a.critic1.layer_sizes() || a.target2.layer_sizes() != a.critic2.layer_sizes() {
            return bad("target networks differ in shape from their critics".into());
        }
        for (name, opt, n) in [
            ("actor_opt", &a.actor_opt, a.actor.num_params()),
            ("critic1_opt", &a.critic1_opt, a.critic1.num_params()),
            ("critic2_opt", &a.critic2_opt, a.critic2.num_params()),
            ("alpha_opt", &a.alpha_opt, 1),
        ] {
            if opt.num_params() != n {
                return bad(format!("{name} holds {} moments for {n} parameters", opt.num_params()));
            }
        }
        if !a.log_alpha.is_finite() || !a.input_scale.iter().all(|v| v.is_finite()) {
            return bad("non-finite temperature or input scale".into());
        }
        self.config.validate().map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        // write-then-rename so a crash never leaves a truncated checkpoint
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_slice(&std::fs::read(path)?)
    }
}
