//! Agent: softmax policy over a linear readout of the filtered spikes and the
//! online, reward-gated policy-gradient rule.
//!
//! The rule keeps, for every trainable weight, a `gamma`-discounted running
//! sum of `(1[a=k] - pi_k)` times the local trace, and adds `r^t` times that
//! sum to the update direction at every step. Because the policy readout is
//! held fixed within an episode, the per-action sums for the recurrent weights
//! can be contracted through it on the fly:
//!
//! ```text
//! sum_k R_ki z_kij  =  sum_{t'<=t} gamma^(t-t') L_i^t' p_i^t' e_j^t',
//! L_i = sum_k R_ki (1[a=k] - pi_k)
//! ```
//!
//! so one `N x N` accumulator suffices instead of `K x N x N`.

use rand::Rng;

use crate::error::check_len;
use crate::optim::AdamState;
use crate::snn::{init_network, LayerSnapshot, NeuronConfig, SpikingLayer};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyReadout {
    /// `K x N`.
    pub r_pi: Matrix,
}

/// Discounted eligibility accumulators of the policy-gradient rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    /// Recurrent-weight accumulator, already contracted through the readout.
    pub z_w: Matrix,
    /// Readout accumulator, `K x N`.
    pub z_r: Matrix,
    pub gamma: f64,
}

impl PolicyState {
    pub fn new(n_actions: usize, n_neurons: usize, gamma: f64) -> Self {
        Self {
            z_w: Matrix::zeros(n_neurons, n_neurons),
            z_r: Matrix::zeros(n_actions, n_neurons),
            gamma,
        }
    }

    pub fn clear(&mut self) {
        self.z_w.fill(0.0);
        self.z_r.fill(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradients {
    pub w_rec: Matrix,
    pub r_pi: Matrix,
}

impl PolicyGradients {
    pub fn zeros(n_actions: usize, n_neurons: usize) -> Self {
        Self {
            w_rec: Matrix::zeros(n_neurons, n_neurons),
            r_pi: Matrix::zeros(n_actions, n_neurons),
        }
    }

    pub fn clear(&mut self) {
        self.w_rec.fill(0.0);
        self.r_pi.fill(0.0);
    }
}

/// Max-subtracted softmax of the logits `R^pi s_bar`.
pub fn policy_probs(s_bar: &[f64], readout: &PolicyReadout) -> Vec<f64> {
    softmax(&readout.r_pi.matvec(s_bar))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|y| (y - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|x| x / z).collect()
}

/// Categorical sample by inverse CDF on one uniform draw.
pub fn sample_action<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > 1e-9 || pi.iter().any(|&p| p < 0.0) {
        return Err(Error::NotNormalized(total));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(k);
        }
    }
    // u landed in the rounding gap at the top; return the last action with mass.
    Ok(pi.iter().rposition(|&p| p > 0.0).unwrap_or(0))
}

/// Discounted returns `R^t = sum_{t' >= t} gamma^(t'-t) r^t'`.
pub fn compute_return(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// One step of the online policy-gradient rule.
///
/// `pi`, `p`, `e` and `s_bar` are the quantities that produced `action`;
/// `reward` is the reward that followed it.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_policy_gradients(
    action: usize,
    pi: &[f64],
    p: &[f64],
    e: &[f64],
    s_bar: &[f64],
    reward: f64,
    readout: &PolicyReadout,
    state: &mut PolicyState,
    grads: &mut PolicyGradients,
) -> Result<()> {
    let k_actions = readout.r_pi.rows();
    let n = readout.r_pi.cols();
    check_len("pi", k_actions, pi.len())?;
    check_len("p", n, p.len())?;
    check_len("e", n, e.len())?;
    check_len("s_bar", n, s_bar.len())?;
    if action >= k_actions {
        return Err(Error::Config(format!("action {action} out of range")));
    }
    let centered: Vec<f64> = pi
        .iter()
        .enumerate()
        .map(|(k, &pk)| if k == action { 1.0 - pk } else { -pk })
        .collect();
    // L_i p_i
    let mut signal = vec![0.0; n];
    for (k, &c) in centered.iter().enumerate() {
        for (l, &r) in signal.iter_mut().zip(readout.r_pi.row(k)) {
            *l += r * c;
        }
    }
    for (l, &pi) in signal.iter_mut().zip(p) {
        *l *= pi;
    }
    state.z_w.decay_add_outer(state.gamma, &signal, e);
    state.z_r.decay_add_outer(state.gamma, &centered, s_bar);
    if reward != 0.0 {
        grads.w_rec.add_scaled(reward, &state.z_w);
        grads.r_pi.add_scaled(reward, &state.z_r);
    }
    Ok(())
}

/// Construction parameters of the agent network.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub neuron: NeuronConfig,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub sigma_in: f64,
    pub sigma_rec: f64,
    pub lr: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSnapshot {
    layer: LayerSnapshot,
    trace: PolicyState,
    pi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AgentNetwork {
    pub layer: SpikingLayer,
    pub readout: PolicyReadout,
    pub trace: PolicyState,
    pub grads: PolicyGradients,
    adam_w: AdamState,
    adam_r: AdamState,
    pi: Vec<f64>,
}

impl AgentNetwork {
    pub fn new(spec: &AgentSpec, seed: u64) -> Result<Self> {
        if spec.n_actions == 0 {
            return Err(Error::Config("agent needs at least one action".into()));
        }
        let params = init_network(&spec.neuron, seed, &[spec.obs_dim], &[spec.sigma_in], spec.sigma_rec)?;
        let n = spec.neuron.n_neurons;
        let k = spec.n_actions;
        Ok(Self {
            layer: SpikingLayer::new(spec.neuron.clone(), params)?,
            readout: PolicyReadout {
                r_pi: Matrix::zeros(k, n),
            },
            trace: PolicyState::new(k, n, spec.gamma),
            grads: PolicyGradients::zeros(k, n),
            adam_w: AdamState::new(n * n, spec.lr),
            adam_r: AdamState::new(k * n, spec.lr),
            pi: vec![1.0 / k as f64; k],
        })
    }

    pub fn begin_episode(&mut self) {
        self.layer.reset();
        self.trace.clear();
    }

    /// Advances the network on `xi`, refreshes the policy and samples an action.
    pub fn act<R: Rng + ?Sized>(&mut self, xi: &[f64], rng: &mut R) -> Result<usize> {
        self.layer.advance(&[xi])?;
        self.pi = policy_probs(&self.layer.state.s_bar, &self.readout);
        sample_action(&self.pi, rng)
    }

    /// Policy that produced the last action.
    pub fn policy(&self) -> &[f64] {
        &self.pi
    }

    /// Credits `reward` to the last action and everything before it.
    pub fn reinforce(&mut self, action: usize, reward: f64) -> Result<()> {
        accumulate_policy_gradients(
            action,
            &self.pi,
            &self.layer.elig.p,
            &self.layer.elig.e,
            &self.layer.state.s_bar,
            reward,
            &self.readout,
            &mut self.trace,
            &mut self.grads,
        )
    }

    pub fn apply_updates(&mut self) -> Result<()> {
        self.adam_w
            .ascend(self.layer.params.w_rec.as_mut_slice(), self.grads.w_rec.as_slice())?;
        self.adam_r
            .ascend(self.readout.r_pi.as_mut_slice(), self.grads.r_pi.as_slice())?;
        self.grads.clear();
        Ok(())
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        AgentSnapshot {
            layer: self.layer.snapshot(),
            trace: self.trace.clone(),
            pi: self.pi.clone(),
        }
    }

    pub fn restore(&mut self, snapshot: &AgentSnapshot) {
        self.layer.restore(&snapshot.layer);
        self.trace.clone_from(&snapshot.trace);
        self.pi.clone_from(&snapshot.pi);
    }

    pub fn tensors(&self) -> (&Matrix, &Matrix) {
        (&self.layer.params.w_rec, &self.readout.r_pi)
    }
}
