//! World model: a spiking module driven by the one-hot action and the current
//! world variables, read out linearly to predict the next world variables and
//! the reward, and trained online with an error-modulated three-factor rule.
//!
//! Index convention: after the model layer is advanced with `(a^t, xi^t)`, its
//! readout trace `s_bar` produces the prediction of `(xi^{t+1}, r^{t+1})`. The
//! rule pairs the resulting error with the pseudo-derivative and eligibility
//! trace produced by that same step, and the readout updates use the same
//! `s_bar` that generated the prediction, which makes them exact gradients of
//! the squared loss.

use crate::error::check_len;
use crate::optim::AdamState;
use crate::snn::{init_network, LayerSnapshot, NeuronConfig, SpikingLayer};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WorldObservation {
    pub xi: Vec<f64>,
    pub reward: f64,
}

impl WorldObservation {
    pub fn new(xi: Vec<f64>, reward: f64) -> Self {
        Self { xi, reward }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReadouts {
    /// `D x N` state readout.
    pub r_xi: Matrix,
    /// Length-`N` reward readout.
    pub r_r: Vec<f64>,
}

impl ModelReadouts {
    pub fn zeros(obs_dim: usize, n_neurons: usize) -> Self {
        Self {
            r_xi: Matrix::zeros(obs_dim, n_neurons),
            r_r: vec![0.0; n_neurons],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelLossConfig {
    pub c_xi: f64,
    pub c_r: f64,
}

impl Default for ModelLossConfig {
    fn default() -> Self {
        Self { c_xi: 1.0, c_r: 0.1 }
    }
}

pub fn model_predict(s_bar: &[f64], readouts: &ModelReadouts) -> WorldObservation {
    WorldObservation {
        xi: readouts.r_xi.matvec(s_bar),
        reward: crate::linalg::dot(&readouts.r_r, s_bar),
    }
}

/// `c_xi * sum_{t,k} (xi*_k - xi_k)^2 + c_r * sum_t (r* - r)^2`.
pub fn model_loss(
    predictions: &[WorldObservation],
    targets: &[WorldObservation],
    cfg: &ModelLossConfig,
) -> Result<f64> {
    check_len("model_loss targets", predictions.len(), targets.len())?;
    let mut loss = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        check_len("model_loss xi", p.xi.len(), t.xi.len())?;
        loss += cfg.c_xi * p.xi.iter().zip(&t.xi).map(|(a, b)| (b - a).powi(2)).sum::<f64>();
        loss += cfg.c_r * (t.reward - p.reward).powi(2);
    }
    Ok(loss)
}

/// Per-episode sums of the model's improvement directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub w_rec: Matrix,
    pub r_xi: Matrix,
    pub r_r: Vec<f64>,
}

impl ModelGradients {
    pub fn zeros(obs_dim: usize, n_neurons: usize) -> Self {
        Self {
            w_rec: Matrix::zeros(n_neurons, n_neurons),
            r_xi: Matrix::zeros(obs_dim, n_neurons),
            r_r: vec![0.0; n_neurons],
        }
    }

    pub fn clear(&mut self) {
        self.w_rec.fill(0.0);
        self.r_xi.fill(0.0);
        self.r_r.fill(0.0);
    }
}

/// Learning signal of neuron `i`: `c_xi sum_k R^xi_ki err_k + c_r R^r_i err_r`.
pub fn model_learning_signal(
    error_xi: &[f64],
    error_r: f64,
    readouts: &ModelReadouts,
    cfg: &ModelLossConfig,
    out: &mut [f64],
) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut l = cfg.c_r * readouts.r_r[i] * error_r;
        for (k, &err) in error_xi.iter().enumerate() {
            l += cfg.c_xi * readouts.r_xi.get(k, i) * err;
        }
        *o = l;
    }
}

/// Adds one step's contribution to the model update directions.
///
/// `error_xi = xi* - xi`, `error_r = r* - r`; `s_bar`, `p`, `e` come from the
/// model step that produced the prediction.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_model_gradients(
    error_xi: &[f64],
    error_r: f64,
    s_bar: &[f64],
    p: &[f64],
    e: &[f64],
    readouts: &ModelReadouts,
    cfg: &ModelLossConfig,
    grads: &mut ModelGradients,
) -> Result<()> {
    let n = s_bar.len();
    check_len("p", n, p.len())?;
    check_len("e", n, e.len())?;
    check_len("error_xi", readouts.r_xi.rows(), error_xi.len())?;
    let mut signal = vec![0.0; n];
    model_learning_signal(error_xi, error_r, readouts, cfg, &mut signal);
    for (l, &pi) in signal.iter_mut().zip(p) {
        *l *= pi;
    }
    grads.w_rec.add_outer(&signal, e);
    for (k, &err) in error_xi.iter().enumerate() {
        let scale = cfg.c_xi * err;
        for (g, &sb) in grads.r_xi.row_mut(k).iter_mut().zip(s_bar) {
            *g += scale * sb;
        }
    }
    for (g, &sb) in grads.r_r.iter_mut().zip(s_bar) {
        *g += cfg.c_r * error_r * sb;
    }
    Ok(())
}

/// Construction parameters of the model network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub neuron: NeuronConfig,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub sigma_action: f64,
    pub sigma_xi: f64,
    pub sigma_rec: f64,
    pub lr: f64,
    pub loss: ModelLossConfig,
}

/// Squared prediction errors of one episode.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PredictionErrors {
    pub sum_sq_xi: f64,
    pub sum_sq_r: f64,
    pub steps: usize,
    pub obs_dim: usize,
}

impl PredictionErrors {
    pub fn mse_xi(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.sum_sq_xi / (self.steps * self.obs_dim) as f64
        }
    }

    pub fn mse_r(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.sum_sq_r / self.steps as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelNetwork {
    pub layer: SpikingLayer,
    pub readouts: ModelReadouts,
    pub grads: ModelGradients,
    loss: ModelLossConfig,
    n_actions: usize,
    adam_w: AdamState,
    adam_xi: AdamState,
    adam_r: AdamState,
    one_hot: Vec<f64>,
    errors: PredictionErrors,
}

impl ModelNetwork {
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        if spec.n_actions == 0 || spec.obs_dim == 0 {
            return Err(Error::Config("model needs at least one action and one world variable".into()));
        }
        let params = init_network(
            &spec.neuron,
            seed,
            &[spec.n_actions, spec.obs_dim],
            &[spec.sigma_action, spec.sigma_xi],
            spec.sigma_rec,
        )?;
        let n = spec.neuron.n_neurons;
        Ok(Self {
            layer: SpikingLayer::new(spec.neuron.clone(), params)?,
            readouts: ModelReadouts::zeros(spec.obs_dim, n),
            grads: ModelGradients::zeros(spec.obs_dim, n),
            loss: spec.loss,
            n_actions: spec.n_actions,
            adam_w: AdamState::new(n * n, spec.lr),
            adam_xi: AdamState::new(spec.obs_dim * n, spec.lr),
            adam_r: AdamState::new(n, spec.lr),
            one_hot: vec![0.0; spec.n_actions],
            errors: PredictionErrors {
                obs_dim: spec.obs_dim,
                ..Default::default()
            },
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.readouts.r_xi.rows()
    }

    /// Resets neuron state and the per-episode error tally.
    pub fn begin_episode(&mut self) {
        self.layer.reset();
        self.errors = PredictionErrors {
            obs_dim: self.obs_dim(),
            ..Default::default()
        };
    }

    /// Feeds `(action, xi)` and returns the predicted next observation.
    pub fn step(&mut self, action: usize, xi: &[f64]) -> Result<WorldObservation> {
        if action >= self.n_actions {
            return Err(Error::Config(format!("action {action} out of range")));
        }
        self.one_hot.fill(0.0);
        self.one_hot[action] = 1.0;
        let one_hot = std::mem::take(&mut self.one_hot);
        let res = self.layer.advance(&[&one_hot, xi]);
        self.one_hot = one_hot;
        res?;
        Ok(self.predict())
    }

    pub fn predict(&self) -> WorldObservation {
        model_predict(&self.layer.state.s_bar, &self.readouts)
    }

    /// Scores `prediction` against the real `target`; when `learn` is set the
    /// step's contribution is added to the update directions.
    pub fn observe(&mut self, prediction: &WorldObservation, target: &WorldObservation, learn: bool) -> Result<()> {
        check_len("target xi", self.obs_dim(), target.xi.len())?;
        let error_xi: Vec<f64> = target.xi.iter().zip(&prediction.xi).map(|(t, p)| t - p).collect();
        let error_r = target.reward - prediction.reward;
        self.errors.sum_sq_xi += error_xi.iter().map(|e| e * e).sum::<f64>();
        self.errors.sum_sq_r += error_r * error_r;
        self.errors.steps += 1;
        if learn {
            accumulate_model_gradients(
                &error_xi,
                error_r,
                &self.layer.state.s_bar,
                &self.layer.elig.p,
                &self.layer.elig.e,
                &self.readouts,
                &self.loss,
                &mut self.grads,
            )?;
        }
        Ok(())
    }

    pub fn episode_errors(&self) -> PredictionErrors {
        self.errors
    }

    /// One Adam step per trainable tensor, then clears the accumulated directions.
    pub fn apply_updates(&mut self) -> Result<()> {
        self.adam_w
            .ascend(self.layer.params.w_rec.as_mut_slice(), self.grads.w_rec.as_slice())?;
        self.adam_xi
            .ascend(self.readouts.r_xi.as_mut_slice(), self.grads.r_xi.as_slice())?;
        self.adam_r.ascend(&mut self.readouts.r_r, &self.grads.r_r)?;
        self.grads.clear();
        Ok(())
    }

    pub fn snapshot(&self) -> LayerSnapshot {
        self.layer.snapshot()
    }

    pub fn restore(&mut self, snapshot: &LayerSnapshot) {
        self.layer.restore(snapshot);
    }

    /// Trainable tensors, for equality checks.
    pub fn tensors(&self) -> (&Matrix, &Matrix, &[f64]) {
        (&self.layer.params.w_rec, &self.readouts.r_xi, &self.readouts.r_r)
    }
}
