//! Episodic control task over the simulator.
//!
//! Each episode starts level at the origin with every rotor at hover
//! speed, after which the configured rotor is disabled. The agent emits
//! per-rotor PWM increments in `[-1, 1]`, scaled to ±0.15.

mod goal;
mod observation;
mod reward;

pub use goal::{GoalPath, GoalTrajectory};
pub use observation::{Observation, OBS_DIM};
pub use reward::RewardConfig;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, FaultMask, QuadParams, RigidBodyState, Vec3, WindModel, NUM_ROTORS};

pub const ACTION_DIM: usize = NUM_ROTORS;
/// Largest PWM change per control step.
pub const MAX_PWM_DELTA: f64 = 0.15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("episode already finished; call reset")]
    EpisodeOver,
    #[error("action must have {ACTION_DIM} components, got {0}")]
    ActionShape(usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub horizon_steps: usize,
    pub dt: f64,
    /// One-based index of the failed rotor; 0 keeps all rotors healthy.
    pub failed_rotor: usize,
    /// Episode ends as a crash once the position error exceeds this, m.
    pub divergence_bound: f64,
    /// On a crash, also charge the saturated position cost
    /// `c1·tanh(c2·divergence_bound)` for every step left to the horizon, so
    /// ending early is never cheaper than staying out of bounds.
    pub charge_remaining_on_crash: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 1000,
            dt: 0.01,
            failed_rotor: 1,
            divergence_bound: 10.0,
            charge_remaining_on_crash: true,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.horizon_steps == 0 {
            return Err("horizon_steps must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err("dt must be positive".into());
        }
        if self.failed_rotor > NUM_ROTORS {
            return Err(format!("failed_rotor must be in 0..={NUM_ROTORS}"));
        }
        if self.divergence_bound.is_nan() || self.divergence_bound <= 0.0 {
            return Err("divergence_bound must be positive".into());
        }
        Ok(())
    }

    pub fn fault_mask(&self) -> FaultMask {
        match self.failed_rotor {
            0 => FaultMask::healthy(),
            k => FaultMask::single(k - 1),
        }
    }

    pub fn duration(&self) -> f64 {
        self.horizon_steps as f64 * self.dt
    }
}

/// `clamp(pwm + 0.15·clamp(action, −1, 1), 0, 1)` per rotor.
pub fn apply_action(action: &[f64; ACTION_DIM], pwm: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
    let mut out = [0.0; ACTION_DIM];
    for i in 0..ACTION_DIM {
        out[i] = (pwm[i] + MAX_PWM_DELTA * action[i].clamp(-1.0, 1.0)).clamp(0.0, 1.0);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Horizon reached; the state is not terminal for bootstrapping.
    TimeLimit,
    /// Diverged or left the allowed region.
    Crash,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub termination: Option<Termination>,
    /// Goal the reward was measured against.
    pub goal: Vec3,
}

impl StepResult {
    /// Bootstrap flag stored with the transition.
    pub fn terminal(&self) -> bool {
        self.termination == Some(Termination::Crash)
    }
}

#[derive(Clone, Debug)]
pub struct QuadEnv {
    params: QuadParams,
    reward: RewardConfig,
    episode: EpisodeConfig,
    goal: GoalTrajectory,
    wind: WindModel,
    fault: FaultMask,
    state: RigidBodyState,
    pwm: [f64; NUM_ROTORS],
    steps: usize,
    done: bool,
    motors_cut: bool,
    warned_clamp: bool,
}

impl QuadEnv {
    pub fn new(params: QuadParams, reward: RewardConfig, episode: EpisodeConfig) -> Self {
        let fault = episode.fault_mask();
        let mut env = Self {
            state: RigidBodyState::at_rest([0.0; 3], params.hover_speed()),
            pwm: [0.0; NUM_ROTORS],
            params,
            reward,
            episode,
            goal: GoalTrajectory::hover(),
            wind: WindModel::calm(),
            fault,
            steps: 0,
            done: true,
            motors_cut: false,
            warned_clamp: false,
        };
        env.reset();
        env
    }

    pub fn set_goal(&mut self, goal: GoalTrajectory) {
        self.goal = goal;
    }

    pub fn set_wind(&mut self, wind: WindModel) {
        self.wind = wind;
    }

    pub fn params(&self) -> &QuadParams {
        &self.params
    }

    pub fn episode(&self) -> &EpisodeConfig {
        &self.episode
    }

    pub fn state(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn pwm(&self) -> &[f64; NUM_ROTORS] {
        &self.pwm
    }

    pub fn fault(&self) -> &FaultMask {
        &self.fault
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.episode.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn goal_now(&self) -> Vec3 {
        self.goal.goal_at(self.time())
    }

    /// Level hover at the origin, then the configured rotor stops.
    pub fn reset(&mut self) -> Observation {
        let hover = self.params.hover_speed();
        self.state = RigidBodyState::at_rest([0.0; 3], hover);
        self.pwm = [hover / self.params.omega_max; NUM_ROTORS];
        for (i, off) in self.fault.disabled.iter().enumerate() {
            if *off {
                self.state.rotor_speeds[i] = 0.0;
            }
        }
        self.steps = 0;
        self.done = false;
        self.motors_cut = false;
        self.warned_clamp = false;
        Observation::build(&self.state, &self.goal_now())
    }

    /// Zeroes every PWM command for the rest of the episode.
    pub fn cut_motors(&mut self) {
        self.motors_cut = true;
        self.pwm = [0.0; NUM_ROTORS];
    }

    pub fn motors_cut(&self) -> bool {
        self.motors_cut
    }

    /// Extra reward on a crash at the current step; zero when disabled.
    pub fn crash_charge(&self) -> f64 {
        if !self.episode.charge_remaining_on_crash {
            return 0.0;
        }
        let remaining = self.episode.horizon_steps.saturating_sub(self.steps) as f64;
        remaining * self.reward.position_term(&[self.episode.divergence_bound, 0.0, 0.0])
    }

    pub fn observation(&self) -> Observation {
        Observation::build(&self.state, &self.goal_now())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let action: [f64; ACTION_DIM] = action.try_into().map_err(|_| EnvError::ActionShape(action.len()))?;
        if !self.warned_clamp && action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            log::warn!("action {action:?} outside [-1, 1]; clamping");
            self.warned_clamp = true;
        }
        if !self.motors_cut {
            self.pwm = apply_action(&action, &self.pwm);
        }
        let prev_speeds = self.state.rotor_speeds;
        self.steps += 1;
        let goal = self.goal_now();
        let next = dynamics::step(&self.state, &self.pwm, &self.params, &self.fault, &self.wind, self.episode.dt);

        let (reward, termination) = match next {
            Ok(s) => {
                self.state = s;
                let obs = Observation::build(&s, &goal);
                let r = self.reward.reward(&prev_speeds, &s.rotor_speeds, &obs.pos_error);
                if obs.error_norm() > self.episode.divergence_bound {
                    (r, Some(Termination::Crash))
                } else if self.steps >= self.episode.horizon_steps {
                    (r, Some(Termination::TimeLimit))
                } else {
                    (r, None)
                }
            }
            Err(DynamicsError::Diverged) => (-self.reward.c1, Some(Termination::Crash)),
            Err(e) => return Err(e.into()),
        };
        let reward = if termination == Some(Termination::Crash) {
            reward + self.crash_charge()
        } else {
            reward
        };
        self.done = termination.is_some();
        Ok(StepResult {
            observation: Observation::build(&self.state, &goal),
            reward,
            done: self.done,
            termination,
            goal,
        })
    }
}
