//! Python bindings for the `dreamnet` crate.

use std::collections::HashMap;

use ::dreamnet as dn;
use dn::cli::RunConfig;
use dn::env::{PongConfig, PongState};
use dn::world_model::{ModelLossConfig, WorldObservation};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: dn::Error) -> PyErr {
    match e {
        dn::Error::Io(_) | dn::Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// One training iteration, as returned by `Trainer.run_iteration`.
#[pyclass(name = "TrainRecord", get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTrainRecord {
    iteration: usize,
    env_interactions: u64,
    episode_reward: f64,
    dream_reward: f64,
    model_loss_xi: f64,
    model_loss_r: f64,
    wall_ms: f64,
}

#[pymethods]
impl PyTrainRecord {
    fn __repr__(&self) -> String {
        format!(
            "TrainRecord(iteration={}, env_interactions={}, episode_reward={}, dream_reward={}, model_loss_xi={:.6}, model_loss_r={:.6})",
            self.iteration, self.env_interactions, self.episode_reward, self.dream_reward, self.model_loss_xi, self.model_loss_r
        )
    }
}

impl From<dn::trainer::TrainRecord> for PyTrainRecord {
    fn from(r: dn::trainer::TrainRecord) -> Self {
        Self {
            iteration: r.iteration,
            env_interactions: r.env_interactions,
            episode_reward: r.episode_reward,
            dream_reward: r.dream_reward,
            model_loss_xi: r.model_loss_xi,
            model_loss_r: r.model_loss_r,
            wall_ms: r.wall_ms,
        }
    }
}

fn run_config(mode: &str, options: Option<HashMap<String, String>>) -> PyResult<RunConfig> {
    let mut rc = RunConfig::default();
    rc.set("mode", mode).map_err(err)?;
    let mut options: Vec<_> = options.unwrap_or_default().into_iter().collect();
    options.sort();
    for (k, v) in options {
        rc.set(&k, &v).map_err(err)?;
    }
    Ok(rc)
}

/// Agent and world-model networks plus the environment, driven one iteration at a time.
///
/// `options` takes the same keys as the CLI's `--set KEY=VALUE`.
#[pyclass(name = "Trainer", unsendable)]
struct PyTrainer {
    inner: dn::trainer::Trainer,
}

#[pymethods]
impl PyTrainer {
    #[new]
    #[pyo3(signature = (mode="baseline", seed=0, options=None))]
    fn new(mode: &str, seed: u64, options: Option<HashMap<String, String>>) -> PyResult<Self> {
        let rc = run_config(mode, options)?;
        let inner = dn::trainer::Trainer::new(rc.trainer, seed).map_err(err)?;
        Ok(Self { inner })
    }

    fn run_iteration(&mut self) -> PyResult<PyTrainRecord> {
        self.inner.run_iteration(None).map(Into::into).map_err(err)
    }

    /// Runs `n` iterations and returns their records.
    fn train(&mut self, n: usize) -> PyResult<Vec<PyTrainRecord>> {
        (0..n).map(|_| self.run_iteration()).collect()
    }

    #[getter]
    fn env_interactions(&self) -> u64 {
        self.inner.env_interactions()
    }

    #[getter]
    fn simulated_steps(&self) -> u64 {
        self.inner.simulated_steps()
    }

    #[getter]
    fn iteration(&self) -> usize {
        self.inner.iteration()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.config().mode.to_string()
    }

    /// Agent recurrent weights, row-major.
    fn agent_weights(&self) -> Vec<f64> {
        self.inner.agent.layer.params.w_rec.as_slice().to_vec()
    }

    /// Model recurrent weights, row-major.
    fn model_weights(&self) -> Vec<f64> {
        self.inner.model.layer.params.w_rec.as_slice().to_vec()
    }
}

/// Built-in Pong environment. Actions: 0 up, 1 stay, 2 down.
#[pyclass(name = "MiniPong", unsendable)]
struct PyMiniPong {
    inner: dn::env::MiniPong,
}

#[pymethods]
impl PyMiniPong {
    #[new]
    #[pyo3(signature = (seed=0, horizon=100))]
    fn new(seed: u64, horizon: usize) -> PyResult<Self> {
        let config = PongConfig { horizon, ..PongConfig::default() };
        let inner = dn::env::MiniPong::new(config, seed).map_err(err)?;
        Ok(Self { inner })
    }

    /// Restarts the episode; returns the observation `[ball_x, ball_y, agent_y, opponent_y]`.
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed).xi
    }

    /// Returns `(observation, reward, done)`.
    fn step(&mut self, action: usize) -> PyResult<(Vec<f64>, f64, bool)> {
        let obs = self.inner.step(action).map_err(err)?;
        Ok((obs.xi, obs.reward, self.done()))
    }

    fn done(&self) -> bool {
        self.inner.state.is_finished(&self.inner.config)
    }

    #[getter]
    fn score(&self) -> (u32, u32) {
        let s: &PongState = &self.inner.state;
        (s.agent_score, s.opponent_score)
    }

    /// Binary frame as `(width, height, pixels)`.
    fn render(&self) -> (usize, usize, Vec<u8>) {
        let f = dn::env::render_frame(&self.inner.state, &self.inner.config);
        (f.width, f.height, f.pixels)
    }
}

#[pyfunction]
#[pyo3(signature = (v, delta_v=0.3))]
fn pseudo_derivative(v: f64, delta_v: f64) -> f64 {
    dn::snn::pseudo_derivative_scalar(v, delta_v)
}

#[pyfunction]
fn softmax(logits: Vec<f64>) -> Vec<f64> {
    dn::agent::softmax(&logits)
}

#[pyfunction]
#[pyo3(signature = (rewards, gamma=0.99))]
fn compute_return(rewards: Vec<f64>, gamma: f64) -> Vec<f64> {
    dn::agent::compute_return(&rewards, gamma)
}

/// Weighted squared error over sequences of `(xi, reward)` pairs.
#[pyfunction]
#[pyo3(signature = (predictions, targets, c_xi=1.0, c_r=0.1))]
fn model_loss(
    predictions: Vec<(Vec<f64>, f64)>,
    targets: Vec<(Vec<f64>, f64)>,
    c_xi: f64,
    c_r: f64,
) -> PyResult<f64> {
    let conv = |v: Vec<(Vec<f64>, f64)>| -> Vec<WorldObservation> {
        v.into_iter().map(|(xi, r)| WorldObservation::new(xi, r)).collect()
    };
    dn::world_model::model_loss(&conv(predictions), &conv(targets), &ModelLossConfig { c_xi, c_r })
        .map_err(err)
}

/// Rewards of a uniformly random policy over `episodes` games.
#[pyfunction]
#[pyo3(signature = (episodes, seed=0))]
fn random_policy_rewards(episodes: usize, seed: u64) -> Vec<f64> {
    dn::env::random_policy_rewards(&PongConfig::default(), episodes, seed)
}

#[pymodule]
fn dreamnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrainer>()?;
    m.add_class::<PyTrainRecord>()?;
    m.add_class::<PyMiniPong>()?;
    m.add_function(wrap_pyfunction!(pseudo_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(compute_return, m)?)?;
    m.add_function(wrap_pyfunction!(model_loss, m)?)?;
    m.add_function(wrap_pyfunction!(random_policy_rewards, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
