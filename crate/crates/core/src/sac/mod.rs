//! Soft Actor-Critic: twin critics with Polyak-averaged targets, a
//! tanh-squashed Gaussian actor, and automatic temperature tuning.
//!
//! One [`SacAgent::update`] performs, in order, a critic step on both
//! Q-networks, an actor step, a temperature step, and target averaging.

mod buffer;

pub use buffer::{Batch, ReplayBuffer, Transition};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{AdamState, GaussianHead, Matrix, MlpParams, NnError, SquashedSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("replay buffer holds {size} transitions, batch needs {batch}")]
    Underfilled { size: usize, batch: usize },
    #[error("transition has the wrong shape")]
    TransitionShape,
    #[error("transition contains a non-finite value")]
    NonFiniteTransition,
    #[error("non-finite {what} loss; update aborted")]
    NonFiniteLoss { what: &'static str },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub gamma: f64,
    /// Polyak step for the target networks.
    pub rho: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub lr_q: f64,
    pub lr_pi: f64,
    pub lr_alpha: f64,
    /// Defaults to `−action_dim` when absent.
    pub target_entropy: Option<f64>,
    pub init_alpha: f64,
    /// Probability of replacing the policy action with a uniform one.
    pub epsilon_explore: f64,
    /// Uniform-random environment steps before learning starts.
    pub warmup_steps: usize,
    pub hidden_width: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            rho: 0.05,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            lr_q: 3e-4,
            lr_pi: 3e-4,
            lr_alpha: 3e-4,
            target_entropy: None,
            init_alpha: 1.0,
            epsilon_explore: 0.001,
            warmup_steps: 1000,
            hidden_width: 64,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err("gamma must lie in (0, 1)".into());
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err("rho must lie in (0, 1]".into());
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err("batch_size must be in 1..=buffer_capacity".into());
        }
        for (name, lr) in [("lr_q", self.lr_q), ("lr_pi", self.lr_pi), ("lr_alpha", self.lr_alpha)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.init_alpha > 0.0 && self.init_alpha.is_finite()) {
            return Err("init_alpha must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) {
            return Err("epsilon_explore must lie in [0, 1]".into());
        }
        if self.hidden_width == 0 {
            return Err("hidden_width must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// Soft target `r + γ(1 − d)(min Q̄ − α·log π)` for one sample.
pub fn soft_target(r: f64, done: f64, gamma: f64, min_target_q: f64, alpha: f64, log_pi: f64) -> f64 {
    r + gamma * (1.0 - done) * (min_target_q - alpha * log_pi)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub pi_loss: f64,
    pub alpha: f64,
    /// Batch mean of `−log π` under the pre-update policy.
    pub entropy: f64,
}

/// Learner state: actor, twin critics and targets, temperature, optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacAgent {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Elementwise scale applied to observations before every network.
    pub input_scale: Vec<f64>,
    pub head: GaussianHead,
    pub actor: MlpParams,
    pub critic1: MlpParams,
    pub critic2: MlpParams,
    pub target1: MlpParams,
    pub target2: MlpParams,
    pub log_alpha: f64,
    pub target_entropy: f64,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub alpha_opt: AdamState,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        input_scale: Vec<f64>,
        cfg: &SacConfig,
        rng: &mut R,
    ) -> Result<Self, SacError> {
        assert_eq!(input_scale.len(), obs_dim, "input_scale length");
        let h = cfg.hidden_width;
        let head = GaussianHead::new(act_dim);
        let actor = MlpParams::new(&[obs_dim, h, h, head.input_dim()], rng)?;
        let critic_sizes = [obs_dim + act_dim, h, h, h, 1];
        let critic1 = MlpParams::new(&critic_sizes, rng)?;
        let critic2 = MlpParams::new(&critic_sizes, rng)?;
        Ok(Self {
            obs_dim,
            act_dim,
            input_scale,
            head,
            actor_opt: AdamState::new(actor.num_params(), cfg.lr_pi),
            critic1_opt: AdamState::new(critic1.num_params(), cfg.lr_q),
            critic2_opt: AdamState::new(critic2.num_params(), cfg.lr_q),
            alpha_opt: AdamState::new(1, cfg.lr_alpha),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            log_alpha: cfg.init_alpha.ln(),
            target_entropy: cfg.target_entropy.unwrap_or(-(act_dim as f64)),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn scale_obs(&self, obs: &Matrix) -> Matrix {
        let mut out = obs.clone();
        for r in 0..out.rows() {
            for (v, s) in out.row_mut(r).iter_mut().zip(&self.input_scale) {
                *v *= s;
            }
        }
        out
    }

    fn noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Matrix {
        let data = (0..rows * self.act_dim).map(|_| rng.sample(StandardNormal)).collect();
        Matrix::from_vec(rows, self.act_dim, data)
    }

    /// Policy action for one observation.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        mode: ActMode,
        epsilon_explore: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>, SacError> {
        if obs.len() != self.obs_dim {
            return Err(NnError::Dimension {
                expected: self.obs_dim,
                got: obs.len(),
            }
            .into());
        }
        if mode == ActMode::Stochastic && epsilon_explore > 0.0 && rng.random::<f64>() < epsilon_explore {
            return Ok(uniform_action(self.act_dim, rng));
        }
        let x: Vec<f64> = obs.iter().zip(&self.input_scale).map(|(o, s)| o * s).collect();
        let raw = self.actor.forward(&x)?;
        Ok(match mode {
            ActMode::Deterministic => self.head.mode(&raw),
            ActMode::Stochastic => {
                let eps: Vec<f64> = (0..self.act_dim).map(|_| rng.sample(StandardNormal)).collect();
                self.head.sample_squashed(&raw, &eps).0
            }
        })
    }

    fn sample_policy<R: Rng + ?Sized>(
        &self,
        scaled_obs: &Matrix,
        rng: &mut R,
    ) -> Result<(crate::nn::Tape, SquashedSample), SacError> {
        let tape = self.actor.forward_batch(scaled_obs)?;
        let noise = self.noise(scaled_obs.rows(), rng);
        let sample = self.head.sample_batch(tape.output(), &noise);
        Ok((tape, sample))
    }

    /// Soft Bellman targets; no gradient flows through them.
    pub fn compute_target<R: Rng + ?Sized>(&self, batch: &Batch, gamma: f64, rng: &mut R) -> Result<Vec<f64>, SacError> {
        let next = self.scale_obs(&batch.next_obs);
        let (_, sample) = self.sample_policy(&next, rng)?;
        let input = next.hcat(&sample.actions);
        let q1 = self.target1.forward_batch(&input)?;
        let q2 = self.target2.forward_batch(&input)?;
        let alpha = self.alpha();
        Ok((0..batch.len())
            .map(|i| {
                let min_q = q1.output().get(i, 0).min(q2.output().get(i, 0));
                soft_target(batch.rewards[i], batch.dones[i], gamma, min_q, alpha, sample.log_prob[i])
            })
            .collect())
    }

    /// One Adam step of each critic toward `targets`; returns both losses.
    pub fn critic_update(&mut self, batch: &Batch, targets: &[f64]) -> Result<(f64, f64), SacError> {
        let input = self.scale_obs(&batch.obs).hcat(&batch.actions);
        let n = batch.len() as f64;
        let step = |net: &mut MlpParams, opt: &mut AdamState, what| -> Result<f64, SacError> {
            let tape = net.forward_batch(&input)?;
            let q = tape.output().as_slice();
            let loss = q.iter().zip(targets).map(|(q, t)| (q - t).powi(2)).sum::<f64>() / n;
            if !loss.is_finite() {
                return Err(SacError::NonFiniteLoss { what });
            }
            let up: Vec<f64> = q.iter().zip(targets).map(|(q, t)| 2.0 * (q - t) / n).collect();
            let (grads, _) = net.backward(&tape, &Matrix::from_vec(q.len(), 1, up))?;
            opt.step(net.params_mut(), &grads)?;
            Ok(loss)
        };
        let l1 = step(&mut self.critic1, &mut self.critic1_opt, "q1")?;
        let l2 = step(&mut self.critic2, &mut self.critic2_opt, "q2")?;
        Ok((l1, l2))
    }

    /// Reparameterized actor step on `E[α·log π − min Q]`.
    ///
    /// Returns the loss and the per-sample log-probabilities of the fresh
    /// actions, which the temperature step reuses.
    pub fn actor_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<(f64, Vec<f64>), SacError> {
        let (c1, c2) = (self.critic1.clone(), self.critic2.clone());
        let obs_dim = self.obs_dim;
        self.actor_step(batch, rng, |input| twin_min_q(&c1, &c2, input, obs_dim))
    }

    /// Actor step against an arbitrary differentiable critic.
    ///
    /// `critic` maps the scaled `[obs | action]` matrix to per-sample Q
    /// values and dQ/d(action).
    pub fn actor_step<R, F>(&mut self, batch: &Batch, rng: &mut R, critic: F) -> Result<(f64, Vec<f64>), SacError>
    where
        R: Rng + ?Sized,
        F: FnOnce(&Matrix) -> Result<(Vec<f64>, Matrix), SacError>,
    {
        let obs = self.scale_obs(&batch.obs);
        let (tape, sample) = self.sample_policy(&obs, rng)?;
        let (q, dq_da) = critic(&obs.hcat(&sample.actions))?;
        let n = batch.len() as f64;
        let alpha = self.alpha();
        let loss = q
            .iter()
            .zip(&sample.log_prob)
            .map(|(q, lp)| alpha * lp - q)
            .sum::<f64>()
            / n;
        if !loss.is_finite() {
            return Err(SacError::NonFiniteLoss { what: "policy" });
        }
        let mut d_action = dq_da;
        for v in d_action.as_mut_slice() {
            *v *= -1.0 / n;
        }
        let d_logp = vec![alpha / n; batch.len()];
        let d_raw = self.head.backward(&sample, &d_action, &d_logp);
        let (grads, _) = self.actor.backward(&tape, &d_raw)?;
        self.actor_opt.step(self.actor.params_mut(), &grads)?;
        Ok((loss, sample.log_prob))
    }

    /// Temperature step on `J = E[−log α·(log π + H̄)]`.
    pub fn alpha_update(&mut self, log_probs: &[f64]) -> Result<(), SacError> {
        if log_probs.is_empty() {
            return Ok(());
        }
        let mean = log_probs.iter().sum::<f64>() / log_probs.len() as f64;
        let grad = -(mean + self.target_entropy);
        let mut p = [self.log_alpha];
        self.alpha_opt.step(&mut p, &[grad])?;
        self.log_alpha = p[0];
        Ok(())
    }

    pub fn polyak_update(&mut self, rho: f64) {
        self.target1.polyak_from(&self.critic1, rho);
        self.target2.polyak_from(&self.critic2, rho);
    }

    /// Full learner iteration on one batch.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, cfg: &SacConfig, rng: &mut R) -> Result<UpdateStats, SacError> {
        let targets = self.compute_target(batch, cfg.gamma, rng)?;
        let (q1_loss, q2_loss) = self.critic_update(batch, &targets)?;
        let (pi_loss, log_probs) = self.actor_update(batch, rng)?;
        self.alpha_update(&log_probs)?;
        self.polyak_update(cfg.rho);
        Ok(UpdateStats {
            q1_loss,
            q2_loss,
            pi_loss,
            alpha: self.alpha(),
            entropy: -log_probs.iter().sum::<f64>() / log_probs.len() as f64,
        })
    }
}

/// Elementwise minimum of two critics and its action gradient.
///
/// Each sample's gradient comes from whichever critic is lower there; ties
/// go to the first.
pub fn twin_min_q(c1: &MlpParams, c2: &MlpParams, input: &Matrix, obs_dim: usize) -> Result<(Vec<f64>, Matrix), SacError> {
    let n = input.rows();
    let t1 = c1.forward_batch(input)?;
    let t2 = c2.forward_batch(input)?;
    let mut q = vec![0.0; n];
    let mut up1 = vec![0.0; n];
    let mut up2 = vec![0.0; n];
    for i in 0..n {
        let (a, b) = (t1.output().get(i, 0), t2.output().get(i, 0));
        if a <= b {
            q[i] = a;
            up1[i] = 1.0;
        } else {
            q[i] = b;
            up2[i] = 1.0;
        }
    }
    let g1 = c1.backward_input(&t1, &Matrix::from_vec(n, 1, up1))?;
    let g2 = c2.backward_input(&t2, &Matrix::from_vec(n, 1, up2))?;
    let act_dim = input.cols() - obs_dim;
    let mut dq = Matrix::zeros(n, act_dim);
    for i in 0..n {
        for j in 0..act_dim {
            dq.set(i, j, g1.get(i, obs_dim + j) + g2.get(i, obs_dim + j));
        }
    }
    Ok((q, dq))
}

/// Uniform action in `(−1, 1)^dim`.
pub fn uniform_action<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[cfg(test)]
mod tests;
