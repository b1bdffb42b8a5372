//! Awake, dreaming and planning phases, and the training schedules built on
//! them.
//!
//! Every schedule plays one real game per iteration. Depending on the mode the
//! iteration also runs one simulated game inside the world model (a dream), or
//! interleaves short model rollouts with the real game (planning). Only real
//! environment steps count as interactions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{AgentNetwork, AgentSpec};
use crate::env::{env_reset, env_step, ObservationMode, Observer, PongConfig, N_ACTIONS};
use crate::snn::NeuronConfig;
use crate::world_model::{ModelLossConfig, ModelNetwork, ModelSpec, WorldObservation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Awake games only.
    Baseline,
    /// One awake game then one dream per iteration.
    Dream,
    /// Awake games with short model rollouts every `dt_pred` steps.
    Plan,
    /// As `Dream`, but the policy learns only while dreaming.
    SleepOnly,
    /// As `SleepOnly`, with model learning stopped after `freeze_at` iterations.
    FreezeModel,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Baseline,
        Mode::Dream,
        Mode::Plan,
        Mode::SleepOnly,
        Mode::FreezeModel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Dream => "dream",
            Mode::Plan => "plan",
            Mode::SleepOnly => "sleep-only",
            Mode::FreezeModel => "freeze-model",
        }
    }

    pub fn dreams(self) -> bool {
        matches!(self, Mode::Dream | Mode::SleepOnly | Mode::FreezeModel)
    }

    pub fn learns_policy_awake(self) -> bool {
        matches!(self, Mode::Baseline | Mode::Dream | Mode::Plan)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub mode: Mode,
    pub n_iter: usize,
    pub awake_t: usize,
    pub dream_t: usize,
    pub n_fut: usize,
    pub dt_pred: usize,
    /// Number of iterations during which the model still learns (freeze-model mode).
    pub freeze_at: usize,
    pub gamma: f64,
    /// Clip predicted rewards to [-1, 1] inside simulated games.
    pub clip_dream_reward: bool,
    pub neuron: NeuronConfig,
    pub env: PongConfig,
    pub obs: ObservationMode,
    pub pixel_dim: usize,
    pub pixel_sigma: f64,
    pub sigma_in: f64,
    pub sigma_rec: f64,
    pub agent_lr: f64,
    pub model_lr: f64,
    pub loss: ModelLossConfig,
    /// When false, `wall_ms` is reported as 0 so that records are reproducible bytewise.
    pub record_wall_time: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Baseline,
            n_iter: 100,
            awake_t: 100,
            dream_t: 50,
            n_fut: 1,
            dt_pred: 2,
            freeze_at: 25,
            gamma: 0.99,
            clip_dream_reward: false,
            neuron: NeuronConfig::default(),
            env: PongConfig::default(),
            obs: ObservationMode::Coords,
            pixel_dim: 4,
            pixel_sigma: 0.1,
            sigma_in: 5.0,
            sigma_rec: 1.0,
            agent_lr: 1e-3,
            model_lr: 1e-3,
            loss: ModelLossConfig::default(),
            record_wall_time: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        self.env_config().validate()?;
        if self.awake_t == 0 {
            return Err(Error::Config("awake_t must be positive".into()));
        }
        if self.mode.dreams() && self.dream_t == 0 {
            return Err(Error::Config("dream_t must be positive in dreaming modes".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1]".into()));
        }
        if self.mode == Mode::Plan && self.n_fut > 0 {
            if self.dt_pred != 2 * self.n_fut {
                return Err(Error::Config(format!(
                    "planning requires dt_pred = 2 n_fut (got dt_pred={}, n_fut={})",
                    self.dt_pred, self.n_fut
                )));
            }
            let planned = self.planned_steps_per_episode();
            if planned.abs_diff(self.dream_t) >= self.n_fut {
                return Err(Error::Config(format!(
                    "planning simulates {planned} steps per game, dreaming {}; budgets must match",
                    self.dream_t
                )));
            }
        }
        if self.mode == Mode::FreezeModel && self.freeze_at > self.n_iter {
            return Err(Error::Config("freeze_at exceeds n_iter".into()));
        }
        if self.obs == ObservationMode::Pixels && self.pixel_dim == 0 {
            return Err(Error::Config("pixel_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn env_config(&self) -> PongConfig {
        PongConfig {
            horizon: self.awake_t,
            ..self.env.clone()
        }
    }

    /// Simulated steps contributed by planning rollouts in one awake game.
    pub fn planned_steps_per_episode(&self) -> usize {
        if self.mode != Mode::Plan || self.n_fut == 0 {
            return 0;
        }
        self.awake_t.div_ceil(self.dt_pred) * self.n_fut
    }

    fn plans(&self) -> bool {
        self.mode == Mode::Plan && self.n_fut > 0
    }
}

/// Metrics of one training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub env_interactions: u64,
    pub episode_reward: f64,
    pub dream_reward: f64,
    /// Mean squared one-step prediction error of the world variables.
    pub model_loss_xi: f64,
    /// Mean squared one-step prediction error of the reward.
    pub model_loss_r: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Awake,
    Dream,
}

/// Result of one awake game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwakeOutcome {
    pub reward: f64,
    pub simulated_reward: f64,
    pub model_loss_xi: f64,
    pub model_loss_r: f64,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent training run (one seed).
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainerConfig,
    env_config: PongConfig,
    pub agent: AgentNetwork,
    pub model: ModelNetwork,
    observer: Observer,
    env_rng: ChaCha8Rng,
    act_rng: ChaCha8Rng,
    sim_rng: ChaCha8Rng,
    env_interactions: u64,
    simulated_steps: u64,
    iteration: usize,
    events: Vec<Phase>,
}

impl Trainer {
    pub fn new(config: TrainerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env_config = config.env_config();
        let observer = match config.obs {
            ObservationMode::Coords => Observer::coords(),
            ObservationMode::Pixels => {
                Observer::pixels(&env_config, config.pixel_dim, config.pixel_sigma, derive_seed(seed, 3))?
            }
        };
        let obs_dim = observer.dim();
        let agent = AgentNetwork::new(
            &AgentSpec {
                neuron: config.neuron.clone(),
                obs_dim,
                n_actions: N_ACTIONS,
                sigma_in: config.sigma_in,
                sigma_rec: config.sigma_rec,
                lr: config.agent_lr,
                gamma: config.gamma,
            },
            derive_seed(seed, 1),
        )?;
        let model = ModelNetwork::new(
            &ModelSpec {
                neuron: config.neuron.clone(),
                n_actions: N_ACTIONS,
                obs_dim,
                sigma_action: config.sigma_in,
                sigma_xi: config.sigma_in,
                sigma_rec: config.sigma_rec,
                lr: config.model_lr,
                loss: config.loss,
            },
            derive_seed(seed, 2),
        )?;
        let rng = |stream| ChaCha8Rng::seed_from_u64(derive_seed(seed, stream));
        Ok(Self {
            env_config,
            agent,
            model,
            observer,
            env_rng: rng(4),
            act_rng: rng(5),
            sim_rng: rng(6),
            env_interactions: 0,
            simulated_steps: 0,
            iteration: 0,
            events: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn env_interactions(&self) -> u64 {
        self.env_interactions
    }

    pub fn simulated_steps(&self) -> u64 {
        self.simulated_steps
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn events(&self) -> &[Phase] {
        &self.events
    }

    pub fn observer(&self) -> &Observer {
        &self.observer
    }

    /// Whether the model learns during the current iteration.
    pub fn model_learning(&self) -> bool {
        !(self.config.mode == Mode::FreezeModel && self.iteration > self.config.freeze_at)
    }

    /// Plays one real game. Optional per-step callback sees the environment
    /// state after each step (used for frame dumps).
    pub fn run_awake_episode(
        &mut self,
        mut on_step: Option<&mut dyn FnMut(&crate::env::PongState) -> Result<()>>,
    ) -> Result<AwakeOutcome> {
        self.events.push(Phase::Awake);
        let learn_policy = self.config.mode.learns_policy_awake();
        let learn_model = self.model_learning();
        let plans = self.config.plans();
        let env_seed: u64 = self.env_rng.random();
        let (mut state, _) = env_reset(&self.env_config, env_seed);
        let mut xi = self.observer.observe(&state, &self.env_config);
        self.agent.begin_episode();
        self.model.begin_episode();

        let mut reward = 0.0;
        let mut simulated_reward = 0.0;
        for t in 0..self.config.awake_t {
            let action = self.agent.act(&xi, &mut self.act_rng)?;
            let out = env_step(&mut state, action, &self.env_config)?;
            self.env_interactions += 1;
            if let Some(cb) = on_step.as_deref_mut() {
                cb(&state)?;
            }
            let next_xi = self.observer.observe(&state, &self.env_config);
            reward += out.reward;
            if learn_policy {
                self.agent.reinforce(action, out.reward)?;
            }
            let prediction = self.model.step(action, &xi)?;
            self.model
                .observe(&prediction, &WorldObservation::new(next_xi.clone(), out.reward), learn_model)?;
            xi = next_xi;
            if plans && t % self.config.dt_pred == 0 {
                simulated_reward += self.run_planning_rollout(&xi)?;
            }
        }
        if learn_policy {
            self.agent.apply_updates()?;
        }
        if learn_model {
            self.model.apply_updates()?;
        }
        let errors = self.model.episode_errors();
        Ok(AwakeOutcome {
            reward,
            simulated_reward,
            model_loss_xi: errors.mse_xi(),
            model_loss_r: errors.mse_r(),
        })
    }

    /// Runs `n_fut` steps inside the model from the live state and the real
    /// observation `xi`, adds the resulting policy-gradient contributions to
    /// the current episode, then restores both networks' dynamic state.
    pub fn run_planning_rollout(&mut self, xi: &[f64]) -> Result<f64> {
        let agent_snapshot = self.agent.snapshot();
        let model_snapshot = self.model.snapshot();
        let mut xi = xi.to_vec();
        let mut total = 0.0;
        for _ in 0..self.config.n_fut {
            let action = self.agent.act(&xi, &mut self.sim_rng)?;
            let prediction = self.model.step(action, &xi)?;
            let reward = self.simulated_reward(prediction.reward);
            self.agent.reinforce(action, reward)?;
            total += reward;
            xi = prediction.xi;
            self.simulated_steps += 1;
        }
        self.agent.restore(&agent_snapshot);
        self.model.restore(&model_snapshot);
        Ok(total)
    }

    /// Plays one game inside the world model from a random initial condition
    /// and applies the resulting policy update. The model is not trained.
    pub fn run_dream_episode(&mut self) -> Result<f64> {
        self.events.push(Phase::Dream);
        self.agent.begin_episode();
        self.model.layer.reset();
        let mut xi = self.observer.random_observation(&mut self.sim_rng, &self.env_config);
        let mut total = 0.0;
        for _ in 0..self.config.dream_t {
            let action = self.agent.act(&xi, &mut self.sim_rng)?;
            let prediction = self.model.step(action, &xi)?;
            let reward = self.simulated_reward(prediction.reward);
            self.agent.reinforce(action, reward)?;
            total += reward;
            xi = prediction.xi;
            self.simulated_steps += 1;
        }
        self.agent.apply_updates()?;
        Ok(total)
    }

    fn simulated_reward(&self, r: f64) -> f64 {
        if self.config.clip_dream_reward {
            r.clamp(-1.0, 1.0)
        } else {
            r
        }
    }

    /// One iteration of the configured schedule.
    pub fn run_iteration(
        &mut self,
        on_step: Option<&mut dyn FnMut(&crate::env::PongState) -> Result<()>>,
    ) -> Result<TrainRecord> {
        let start = Instant::now();
        self.iteration += 1;
        let awake = self.run_awake_episode(on_step)?;
        let mut dream_reward = awake.simulated_reward;
        if self.config.mode.dreams() {
            dream_reward += self.run_dream_episode()?;
        }
        let wall_ms = if self.config.record_wall_time {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        Ok(TrainRecord {
            iteration: self.iteration,
            env_interactions: self.env_interactions,
            episode_reward: awake.reward,
            dream_reward,
            model_loss_xi: awake.model_loss_xi,
            model_loss_r: awake.model_loss_r,
            wall_ms,
        })
    }
}

/// Runs the full schedule for one seed.
pub fn train(config: &TrainerConfig, seed: u64) -> Result<Vec<TrainRecord>> {
    let mut trainer = Trainer::new(config.clone(), seed)?;
    (0..config.n_iter).map(|_| trainer.run_iteration(None)).collect()
}
