//! Deterministic evaluation rollouts, maneuvers and summary tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::UnitSphere;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::dynamics::{QuadParams, WindModel, NUM_ROTORS};
use crate::env::{EpisodeConfig, GoalPath, GoalTrajectory, Observation, QuadEnv, RewardConfig, Termination, ACTION_DIM, OBS_DIM};
use crate::logs::TrajectoryRow;
use crate::sac::{uniform_action, ActMode, SacAgent};

use super::HarnessError;

/// Time simulated after a landing cut-off so the rotors visibly spin down.
const SPIN_DOWN_TIME: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Maneuver {
    Hover,
    Land,
    CircleXy,
    CircleYz,
    Saddle,
}

#[derive(Debug, Error)]
#[error("unknown maneuver `{0}`; valid names: hover, land, circle-xy, circle-yz, saddle")]
pub struct UnknownManeuver(pub String);

impl Maneuver {
    pub const ALL: [Maneuver; 5] = [Maneuver::Hover, Maneuver::Land, Maneuver::CircleXy, Maneuver::CircleYz, Maneuver::Saddle];

    pub fn name(self) -> &'static str {
        match self {
            Maneuver::Hover => "hover",
            Maneuver::Land => "land",
            Maneuver::CircleXy => "circle-xy",
            Maneuver::CircleYz => "circle-yz",
            Maneuver::Saddle => "saddle",
        }
    }

    pub fn goal(self, cfg: &crate::config::EvalConfig, stabilize_time: f64) -> GoalTrajectory {
        let path = match self {
            Maneuver::Hover => GoalPath::Stationary { point: [0.0; 3] },
            Maneuver::Land => GoalPath::Descent {
                rate: cfg.descent_rate,
                floor: cfg.land_floor,
            },
            Maneuver::CircleXy => GoalPath::CircleXY {
                radius: cfg.circle_radius,
                period: cfg.circle_period,
            },
            Maneuver::CircleYz => GoalPath::CircleYZ {
                radius: cfg.circle_radius,
                period: cfg.circle_period,
            },
            Maneuver::Saddle => GoalPath::Saddle {
                radius: cfg.saddle_radius,
                amplitude: cfg.saddle_amplitude,
                period: cfg.saddle_period,
            },
        };
        GoalTrajectory { path, stabilize_time }
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Maneuver {
    type Err = UnknownManeuver;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Maneuver::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| UnknownManeuver(s.to_string()))
    }
}

/// Maps an observation to an action in `[-1, 1]^4`.
pub trait Controller {
    fn action(&mut self, obs: &Observation) -> Vec<f64>;
}

/// Deterministic policy mean, `tanh(μ)`.
pub struct PolicyController<'a> {
    agent: &'a SacAgent,
    rng: ChaCha8Rng,
}

impl<'a> PolicyController<'a> {
    pub fn new(agent: &'a SacAgent) -> Result<Self, HarnessError> {
        if agent.obs_dim != OBS_DIM || agent.act_dim != ACTION_DIM {
            return Err(HarnessError::Incompatible(format!(
                "policy expects {} observations and {} actions; the task has {OBS_DIM} and {ACTION_DIM}",
                agent.obs_dim, agent.act_dim
            )));
        }
        Ok(Self {
            agent,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }
}

impl Controller for PolicyController<'_> {
    fn action(&mut self, obs: &Observation) -> Vec<f64> {
        self.agent
            .act(&obs.to_array(), ActMode::Deterministic, 0.0, &mut self.rng)
            .expect("observation length checked at construction")
    }
}

/// Zero increments: every PWM stays at its reset value.
pub struct HoldController;

impl Controller for HoldController {
    fn action(&mut self, _obs: &Observation) -> Vec<f64> {
        vec![0.0; ACTION_DIM]
    }
}

/// Uniform actions from a seeded generator.
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomController {
    fn action(&mut self, _obs: &Observation) -> Vec<f64> {
        uniform_action(ACTION_DIM, &mut self.rng)
    }
}

/// Everything that defines one episode apart from the controller.
#[derive(Clone, Debug)]
pub struct EpisodeSpec {
    pub episode: EpisodeConfig,
    pub goal: GoalTrajectory,
    pub wind: WindModel,
    /// Motors are cut once the goal has started moving and the vehicle is at
    /// least this far below the origin.
    pub cutoff_depth: Option<f64>,
    pub record: bool,
}

impl EpisodeSpec {
    /// The training task: hold the origin for one training-length episode.
    pub fn training(cfg: &Config) -> Self {
        Self {
            episode: cfg.episode.clone(),
            goal: GoalTrajectory::hover(),
            wind: WindModel::calm(),
            cutoff_depth: None,
            record: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Rollout {
    /// Logged rows, starting with the reset state at t = 0; empty unless recorded.
    pub rows: Vec<TrajectoryRow>,
    /// `(t, ‖goal − position‖)` after every step.
    pub errors: Vec<(f64, f64)>,
    pub episode_return: f64,
    pub crashed: bool,
    pub landed: bool,
    pub steps: usize,
    pub pwm_sum: [f64; NUM_ROTORS],
    pub wall: Duration,
}

fn log_row(env: &QuadEnv, reward: f64) -> TrajectoryRow {
    TrajectoryRow {
        t: env.time(),
        state: *env.state(),
        pwm: *env.pwm(),
        goal: Some(env.goal_now()),
        reward: Some(reward),
    }
}

pub fn run_episode(
    params: &QuadParams,
    reward: &RewardConfig,
    spec: &EpisodeSpec,
    ctl: &mut dyn Controller,
) -> Result<Rollout, HarnessError> {
    let mut env = QuadEnv::new(params.clone(), *reward, spec.episode.clone());
    env.set_goal(spec.goal);
    env.set_wind(spec.wind);
    let mut obs = env.reset();
    let mut out = Rollout {
        rows: Vec::new(),
        errors: Vec::with_capacity(spec.episode.horizon_steps),
        episode_return: 0.0,
        crashed: false,
        landed: false,
        steps: 0,
        pwm_sum: [0.0; NUM_ROTORS],
        wall: Duration::ZERO,
    };
    if spec.record {
        out.rows.push(log_row(&env, 0.0));
    }
    let spin_down_steps = (SPIN_DOWN_TIME / spec.episode.dt).ceil() as usize;
    let mut cut_at: Option<usize> = None;
    loop {
        let started = Instant::now();
        let action = ctl.action(&obs);
        let res = env.step(&action)?;
        out.wall += started.elapsed();
        out.steps += 1;
        out.episode_return += res.reward;
        for (s, p) in out.pwm_sum.iter_mut().zip(env.pwm()) {
            *s += p;
        }
        out.errors.push((env.time(), res.observation.error_norm()));
        if spec.record {
            // the row shows the command that drove this step
            out.rows.push(log_row(&env, res.reward));
        }
        obs = res.observation;
        if res.termination == Some(Termination::Crash) {
            out.crashed = true;
            break;
        }
        if res.done {
            break;
        }
        if let (Some(depth), None) = (spec.cutoff_depth, cut_at) {
            // only a descent counts; falling through the floor while the goal
            // still holds station is left to the divergence bound
            if env.time() > spec.goal.stabilize_time && env.state().position[2] >= depth {
                env.cut_motors();
                out.landed = true;
                cut_at = Some(out.steps);
            }
        }
        if cut_at.is_some_and(|c| out.steps >= c + spin_down_steps) {
            break;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub maneuver: Maneuver,
    pub wind_speed: f64,
    pub stabilize_time: f64,
    /// Simulated time actually covered, s.
    pub sim_time: f64,
    pub steps: usize,
    /// Over the post-stabilization window; NaN if the episode ended before it.
    pub rmse: f64,
    pub max_error: f64,
    pub episode_return: f64,
    pub crashed: bool,
    pub landed: bool,
    pub mean_pwm: [f64; NUM_ROTORS],
    /// Controller plus simulator wall time per step, s.
    pub mean_step_time: f64,
    /// Set when the evaluation itself failed.
    pub error: Option<String>,
}

impl EvalReport {
    /// Copy with the only non-deterministic field zeroed.
    pub fn without_timing(&self) -> Self {
        Self {
            mean_step_time: 0.0,
            ..self.clone()
        }
    }

    fn from_rollout(maneuver: Maneuver, wind_speed: f64, stabilize_time: f64, dt: f64, r: &Rollout) -> Self {
        let window: Vec<f64> = r.errors.iter().filter(|(t, _)| *t >= stabilize_time - 1e-9).map(|(_, e)| *e).collect();
        let (rmse, max_error) = if window.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let ms = window.iter().map(|e| e * e).sum::<f64>() / window.len() as f64;
            (ms.sqrt(), window.iter().copied().fold(0.0, f64::max))
        };
        let n = r.steps.max(1) as f64;
        Self {
            maneuver,
            wind_speed,
            stabilize_time,
            sim_time: r.steps as f64 * dt,
            steps: r.steps,
            rmse,
            max_error,
            episode_return: r.episode_return,
            crashed: r.crashed,
            landed: r.landed,
            mean_pwm: r.pwm_sum.map(|s| s / n),
            mean_step_time: r.wall.as_secs_f64() / n,
            error: None,
        }
    }

    fn failed(maneuver: Maneuver, wind_speed: f64, stabilize_time: f64, err: &HarnessError) -> Self {
        Self {
            maneuver,
            wind_speed,
            stabilize_time,
            sim_time: 0.0,
            steps: 0,
            rmse: f64::NAN,
            max_error: f64::NAN,
            episode_return: f64::NAN,
            crashed: true,
            landed: false,
            mean_pwm: [f64::NAN; NUM_ROTORS],
            mean_step_time: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub maneuver: Maneuver,
    /// Wind magnitude, m/s; the direction is drawn from `seed`.
    pub wind_speed: f64,
    /// Defaults to the configured evaluation duration.
    pub duration: Option<f64>,
    pub seed: u64,
}

impl EvalOptions {
    pub fn new(maneuver: Maneuver) -> Self {
        Self {
            maneuver,
            wind_speed: 0.0,
            duration: None,
            seed: 0,
        }
    }

    pub fn spec(&self, cfg: &Config) -> Result<EpisodeSpec, HarnessError> {
        if !(self.wind_speed >= 0.0 && self.wind_speed.is_finite()) {
            return Err(HarnessError::Incompatible(format!("wind speed must be a non-negative number, got {}", self.wind_speed)));
        }
        let duration = self.duration.unwrap_or(cfg.eval.duration);
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(HarnessError::Incompatible(format!("duration must be positive, got {duration}")));
        }
        let windy = self.wind_speed > 0.0;
        let stabilize = if windy { cfg.eval.wind_stabilize_time } else { cfg.eval.stabilize_time };
        let wind = if windy {
            let dir: [f64; 3] = ChaCha8Rng::seed_from_u64(self.seed).sample(UnitSphere);
            WindModel {
                wind_velocity: dir.map(|d| d * self.wind_speed),
                drag_coeff: cfg.eval.wind_drag_coeff,
                enabled: true,
            }
        } else {
            WindModel::calm()
        };
        let episode = EpisodeConfig {
            horizon_steps: (duration / cfg.episode.dt).round().max(1.0) as usize,
            ..cfg.episode.clone()
        };
        Ok(EpisodeSpec {
            episode,
            goal: self.maneuver.goal(&cfg.eval, stabilize),
            wind,
            cutoff_depth: (self.maneuver == Maneuver::Land).then_some(cfg.eval.land_floor),
            record: true,
        })
    }
}

/// One evaluation episode; returns the report and the trajectory log.
pub fn evaluate(
    ctl: &mut dyn Controller,
    cfg: &Config,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<TrajectoryRow>), HarnessError> {
    let spec = opts.spec(cfg)?;
    let rollout = run_episode(&cfg.quad, &cfg.reward, &spec, ctl)?;
    let report = EvalReport::from_rollout(opts.maneuver, opts.wind_speed, spec.goal.stabilize_time, spec.episode.dt, &rollout);
    Ok((report, rollout.rows))
}

/// All five maneuvers in order, maneuver `i` seeded with `seed + i`.
/// A failing maneuver is reported with its crash flag set.
pub fn maneuver_suite(
    ctl: &mut dyn Controller,
    cfg: &Config,
    wind_speed: f64,
    seed: u64,
) -> Vec<(EvalReport, Vec<TrajectoryRow>)> {
    Maneuver::ALL
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let opts = EvalOptions {
                maneuver: m,
                wind_speed,
                duration: None,
                seed: seed.wrapping_add(i as u64),
            };
            evaluate(ctl, cfg, &opts).unwrap_or_else(|e| {
                log::error!("maneuver {m} failed: {e}");
                let stab = if wind_speed > 0.0 { cfg.eval.wind_stabilize_time } else { cfg.eval.stabilize_time };
                (EvalReport::failed(m, wind_speed, stab, &e), Vec::new())
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineStats {
    pub returns: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
}

/// Returns of uniform-random actions on the training task.
pub fn random_baseline(cfg: &Config, episodes: usize, seed: u64) -> Result<BaselineStats, HarnessError> {
    assert!(episodes >= 2, "need at least two episodes for a spread");
    let spec = EpisodeSpec::training(cfg);
    let mut ctl = RandomController::new(seed);
    let returns = (0..episodes)
        .map(|_| run_episode(&cfg.quad, &cfg.reward, &spec, &mut ctl).map(|r| r.episode_return))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64;
    Ok(BaselineStats {
        returns,
        mean,
        std: var.sqrt(),
    })
}

const SUMMARY_COLUMNS: [&str; 16] = [
    "maneuver",
    "wind_speed",
    "stabilize_time",
    "sim_time",
    "steps",
    "rmse",
    "max_error",
    "return",
    "crashed",
    "landed",
    "pwm1_mean",
    "pwm2_mean",
    "pwm3_mean",
    "pwm4_mean",
    "step_time_us",
    "error",
];

pub fn write_summary_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS).map_err(crate::logs::LogError::from)?;
    for r in reports {
        let mut rec = vec![
            r.maneuver.name().to_string(),
            format!("{:?}", r.wind_speed),
            format!("{:?}", r.stabilize_time),
            format!("{:?}", r.sim_time),
            r.steps.to_string(),
            format!("{:?}", r.rmse),
            format!("{:?}", r.max_error),
            format!("{:?}", r.episode_return),
            r.crashed.to_string(),
            r.landed.to_string(),
        ];
        rec.extend(r.mean_pwm.iter().map(|p| format!("{p:?}")));
        rec.push(format!("{:.1}", r.mean_step_time * 1e6));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(crate::logs::LogError::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_text<W: Write>(mut out: W, reports: &[EvalReport]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<10} {:>6} {:>6} {:>7} {:>9} {:>9} {:>10} {:>7} {:>6}  {:<27} {:>8}",
        "maneuver", "wind", "stab", "time", "rmse_m", "max_m", "return", "crashed", "landed", "mean_pwm(1..4)", "step_us"
    )?;
    for r in reports {
        let pwm = r.mean_pwm.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(" ");
        writeln!(
            out,
            "{:<10} {:>6.2} {:>6.1} {:>7.2} {:>9.4} {:>9.4} {:>10.2} {:>7} {:>6}  {:<27} {:>8.1}",
            r.maneuver.name(),
            r.wind_speed,
            r.stabilize_time,
            r.sim_time,
            r.rmse,
            r.max_error,
            r.episode_return,
            if r.crashed { "yes" } else { "no" },
            if r.landed { "yes" } else { "no" },
            pwm,
            r.mean_step_time * 1e6
        )?;
        if let Some(e) = &r.error {
            writeln!(out, "  error: {e}")?;
        }
    }
    Ok(())
}
