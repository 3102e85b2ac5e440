//! Training loop, evaluation rollouts and the maneuver suite.
//!
//! Run directory written by [`train`]:
//!
//! ```text
//! <out>/metrics.csv              one row per logging interval
//! <out>/evals.csv                step,return,steps,crashed per periodic evaluation
//! <out>/eval_latest.csv          trajectory of the most recent evaluation episode
//! <out>/checkpoints/initial.json weights before any update (fresh runs only)
//! <out>/checkpoints/latest.json  refreshed every checkpoint interval and at the end
//! <out>/checkpoints/best.json    highest deterministic-eval return so far
//! ```

mod eval;
mod train;

pub use eval::{
    evaluate, maneuver_suite, random_baseline, run_episode, write_summary_csv, write_summary_text, BaselineStats,
    Controller, EpisodeSpec, EvalOptions, EvalReport, HoldController, Maneuver, PolicyController, RandomController,
    Rollout, UnknownManeuver,
};
pub use train::{train, IterationInfo, TrainOutcome, Trainer};

use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::dynamics::QuadParams;
use crate::env::{EnvError, OBS_DIM};
use crate::logs::LogError;
use crate::sac::SacError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Incompatible(String),
}

/// Per-component observation scale fed to the networks, chosen so each
/// block is O(1) over the states training visits: position error and
/// velocity ×0.2 (errors are bounded by the 10 m divergence bound), body
/// rates ×0.1 (a failed rotor leaves a yaw spin near 20 rad/s), rotor
/// speeds divided by the maximum speed. The rotation matrix is already
/// bounded.
pub fn observation_scale(params: &QuadParams) -> Vec<f64> {
    let mut s = vec![1.0; OBS_DIM];
    s[0..3].fill(0.2);
    s[12..15].fill(0.2);
    s[15..18].fill(0.1);
    for v in &mut s[OBS_DIM - 4..] {
        *v = 1.0 / params.omega_max;
    }
    s
}
