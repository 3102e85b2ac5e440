//! The off-policy training loop: act, store, sample, update, every step.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::env::{QuadEnv, ACTION_DIM, OBS_DIM};
use crate::logs::{write_trajectory, MetricsRow, MetricsWriter};
use crate::nn::NnError;
use crate::sac::{uniform_action, ActMode, ReplayBuffer, SacAgent, SacError, Transition, UpdateStats};

use super::eval::{run_episode, EpisodeSpec, PolicyController, Rollout};
use super::{observation_scale, HarnessError};

/// What one call to [`Trainer::iterate`] did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationInfo {
    pub reward: f64,
    pub episode_done: bool,
    pub stats: Option<UpdateStats>,
}

#[derive(Default)]
struct Interval {
    returns: Vec<f64>,
    q1: f64,
    q2: f64,
    pi: f64,
    updates: u64,
}

pub struct Trainer {
    cfg: Config,
    seed: u64,
    agent: SacAgent,
    buffer: ReplayBuffer,
    env: QuadEnv,
    rng: ChaCha8Rng,
    step: u64,
    episodes: u64,
    obs: [f64; OBS_DIM],
    ep_return: f64,
    updates: u64,
    skipped_updates: u64,
    best_return: Option<f64>,
    interval: Interval,
}

impl Trainer {
    /// Fresh run. The seed is `cfg.train.seed`, or 0 when unset.
    pub fn new(cfg: Config) -> Result<Self, HarnessError> {
        let seed = cfg.train.seed.unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = SacAgent::new(OBS_DIM, ACTION_DIM, observation_scale(&cfg.quad), &cfg.sac, &mut rng)?;
        Ok(Self::assemble(cfg, seed, agent, rng, 0, 0, None))
    }

    /// Continues from a checkpoint with an empty replay buffer.
    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, HarnessError> {
        if ck.agent.obs_dim != OBS_DIM || ck.agent.act_dim != ACTION_DIM {
            return Err(HarnessError::Incompatible("checkpoint was trained on a different task shape".into()));
        }
        Ok(Self::assemble(ck.config, ck.seed, ck.agent, ck.rng, ck.step, ck.episode, ck.best_return))
    }

    fn assemble(
        cfg: Config,
        seed: u64,
        agent: SacAgent,
        rng: ChaCha8Rng,
        step: u64,
        episodes: u64,
        best_return: Option<f64>,
    ) -> Self {
        let mut env = QuadEnv::new(cfg.quad.clone(), cfg.reward, cfg.episode.clone());
        let obs = env.reset().to_array();
        Self {
            buffer: ReplayBuffer::new(cfg.sac.buffer_capacity, OBS_DIM, ACTION_DIM),
            cfg,
            seed,
            agent,
            env,
            rng,
            step,
            episodes,
            obs,
            ep_return: 0.0,
            updates: 0,
            skipped_updates: 0,
            best_return,
            interval: Interval::default(),
        }
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env(&self) -> &QuadEnv {
        &self.env
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Episodes finished so far.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn best_return(&self) -> Option<f64> {
        self.best_return
    }

    /// One environment step, one stored transition and, once warm-up is
    /// over and the buffer holds a batch, one learner update.
    pub fn iterate(&mut self) -> Result<IterationInfo, HarnessError> {
        let sac = &self.cfg.sac;
        let action = if self.step < sac.warmup_steps as u64 {
            uniform_action(ACTION_DIM, &mut self.rng)
        } else {
            self.agent.act(&self.obs, ActMode::Stochastic, sac.epsilon_explore, &mut self.rng)?
        };
        let res = self.env.step(&action)?;
        let next = res.observation.to_array();
        self.buffer.push(&Transition {
            s: self.obs.to_vec(),
            a: action,
            r: res.reward,
            s_next: next.to_vec(),
            d: res.terminal(),
        })?;
        self.ep_return += res.reward;
        self.step += 1;
        if res.done {
            self.episodes += 1;
            self.interval.returns.push(self.ep_return);
            self.ep_return = 0.0;
            self.obs = self.env.reset().to_array();
        } else {
            self.obs = next;
        }

        let mut stats = None;
        if self.step >= sac.warmup_steps as u64 && self.buffer.len() >= sac.batch_size {
            let batch = self.buffer.sample(sac.batch_size, &mut self.rng)?;
            match self.agent.update(&batch, &self.cfg.sac, &mut self.rng) {
                Ok(s) => {
                    self.updates += 1;
                    self.interval.q1 += s.q1_loss;
                    self.interval.q2 += s.q2_loss;
                    self.interval.pi += s.pi_loss;
                    self.interval.updates += 1;
                    stats = Some(s);
                }
                Err(SacError::NonFiniteLoss { what }) => {
                    self.skipped_updates += 1;
                    log::warn!("step {}: non-finite {what}; update skipped", self.step);
                }
                Err(SacError::Nn(NnError::NonFinite)) => {
                    self.skipped_updates += 1;
                    log::warn!("step {}: non-finite gradient; update skipped", self.step);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(IterationInfo {
            reward: res.reward,
            episode_done: res.done,
            stats,
        })
    }

    /// Closes the current logging interval.
    fn metrics_row(&mut self) -> MetricsRow {
        let iv = std::mem::take(&mut self.interval);
        let mean = |s: f64, n: u64| if n == 0 { f64::NAN } else { s / n as f64 };
        MetricsRow {
            step: self.step,
            episode: self.episodes,
            ep_reward: mean(iv.returns.iter().sum(), iv.returns.len() as u64),
            q1_loss: mean(iv.q1, iv.updates),
            q2_loss: mean(iv.q2, iv.updates),
            pi_loss: mean(iv.pi, iv.updates),
            alpha: self.agent.alpha(),
        }
    }

    /// Deterministic policy on the training task, recorded.
    pub fn evaluate_policy(&self) -> Result<Rollout, HarnessError> {
        let spec = EpisodeSpec {
            record: true,
            ..EpisodeSpec::training(&self.cfg)
        };
        let mut ctl = PolicyController::new(&self.agent)?;
        run_episode(&self.cfg.quad, &self.cfg.reward, &spec, &mut ctl)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.step,
            self.episodes,
            self.seed,
            self.rng.clone(),
            self.best_return,
            self.cfg.clone(),
            self.agent.clone(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub steps: u64,
    pub episodes: u64,
    pub updates: u64,
    pub skipped_updates: u64,
    pub best_return: Option<f64>,
    /// Return of the final periodic evaluation, if any ran.
    pub last_eval_return: Option<f64>,
    pub wall: Duration,
}

struct RunFiles {
    metrics: MetricsWriter<BufWriter<File>>,
    evals: BufWriter<File>,
}

fn open_append(path: &Path, header: &str) -> std::io::Result<BufWriter<File>> {
    let exists = path.exists();
    let mut f = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
    if !exists {
        writeln!(f, "{header}")?;
        f.flush()?;
    }
    Ok(f)
}

/// Runs (or resumes) training into `out`; see the module docs for the
/// directory layout.
///
/// On resume the checkpoint's configuration is used except for the
/// `train` section, which comes from `cfg`, so a run can be extended.
pub fn train(cfg: &Config, out: &Path, resume: Option<&Path>) -> Result<TrainOutcome, HarnessError> {
    let started = Instant::now();
    let ck_dir = out.join("checkpoints");
    fs::create_dir_all(&ck_dir)?;

    let mut trainer = match resume {
        Some(path) => {
            let mut ck = Checkpoint::load(path)?;
            let seed = ck.seed;
            ck.config.train = cfg.train.clone();
            ck.config.train.seed = Some(seed);
            Trainer::from_checkpoint(ck)?
        }
        None => {
            let mut cfg = cfg.clone();
            cfg.train.seed.get_or_insert(0);
            Trainer::new(cfg)?
        }
    };
    let fresh = resume.is_none();
    fs::write(out.join("config.echo"), trainer.cfg.to_toml_string())?;

    let metrics_path = out.join("metrics.csv");
    let mut files = RunFiles {
        metrics: if fresh || !metrics_path.exists() {
            MetricsWriter::new(BufWriter::new(File::create(&metrics_path)?))?
        } else {
            MetricsWriter::append(BufWriter::new(OpenOptions::new().append(true).open(&metrics_path)?))
        },
        evals: if fresh {
            let mut f = BufWriter::new(File::create(out.join("evals.csv"))?);
            writeln!(f, "{EVALS_HEADER}")?;
            f
        } else {
            open_append(&out.join("evals.csv"), EVALS_HEADER)?
        },
    };

    let mut last_eval = None;
    if fresh {
        trainer.checkpoint().save(&ck_dir.join("initial.json"))?;
        last_eval = Some(periodic_eval(&mut trainer, out, &mut files)?);
        trainer.checkpoint().save(&ck_dir.join("latest.json"))?;
    }

    let t = trainer.cfg.train.clone();
    while trainer.step < t.total_steps {
        trainer.iterate()?;
        let s = trainer.step;
        if s % t.log_interval == 0 {
            let row = trainer.metrics_row();
            files.metrics.write(&row)?;
        }
        if s % t.eval_interval == 0 {
            last_eval = Some(periodic_eval(&mut trainer, out, &mut files)?);
        }
        if s % t.checkpoint_interval == 0 {
            trainer.checkpoint().save(&ck_dir.join("latest.json"))?;
        }
    }
    trainer.checkpoint().save(&ck_dir.join("latest.json"))?;
    files.evals.flush()?;

    Ok(TrainOutcome {
        steps: trainer.step,
        episodes: trainer.episodes,
        updates: trainer.updates,
        skipped_updates: trainer.skipped_updates,
        best_return: trainer.best_return,
        last_eval_return: last_eval,
        wall: started.elapsed(),
    })
}

const EVALS_HEADER: &str = "step,return,steps,crashed,pwm1_mean,pwm2_mean,pwm3_mean,pwm4_mean";

fn periodic_eval(trainer: &mut Trainer, out: &Path, files: &mut RunFiles) -> Result<f64, HarnessError> {
    let r = trainer.evaluate_policy()?;
    let n = r.steps.max(1) as f64;
    let pwm: Vec<String> = r.pwm_sum.iter().map(|p| format!("{:?}", p / n)).collect();
    writeln!(files.evals, "{},{:?},{},{},{}", trainer.step, r.episode_return, r.steps, r.crashed, pwm.join(","))?;
    files.evals.flush()?;
    log::info!(
        "step {}: eval return {:.2} over {} steps{}",
        trainer.step,
        r.episode_return,
        r.steps,
        if r.crashed { " (crashed)" } else { "" }
    );
    write_trajectory(BufWriter::new(File::create(out.join("eval_latest.csv"))?), &r.rows)?;
    if trainer.best_return.is_none_or(|b| r.episode_return > b) {
        trainer.best_return = Some(r.episode_return);
        trainer.checkpoint().save(&out.join("checkpoints").join("best.json"))?;
    }
    Ok(r.episode_return)
}
