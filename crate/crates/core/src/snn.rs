//! Discrete-time leaky integrate-and-fire module.
//!
//! One call to [`step_layer`] advances a module of `N` neurons by `dt`:
//!
//! ```text
//! v    <- a_m v + (1 - a_m) (W s_hat + I + v_rest) - w_res s
//! s_hat <- a_s s_hat + (1 - a_s) s
//! s    <- H(v - v_th)
//! s_bar <- a_* s_bar + (1 - a_*) s
//! ```
//!
//! with `a_x = exp(-dt / tau_x)`. The recurrent drive reads the filtered
//! spikes from the previous step, the reset subtracts `w_res` from every
//! neuron that spiked on the previous step, and the readout trace `s_bar`
//! already contains the spikes emitted by this step. A readout taken right
//! after the call therefore reflects the input current passed to it.
//!
//! The spike response of the membrane to `w_ij` (the eligibility trace)
//! depends only on the presynaptic index, so it is stored as one vector per
//! module and broadcast over postsynaptic rows when updates are formed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::check_len;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronConfig {
    pub n_neurons: usize,
    /// Integration step (ms).
    pub dt: f64,
    /// Membrane time constant (ms). Also sets the eligibility-trace decay.
    pub tau_m: f64,
    /// Filter constant of the recurrent spike trace `s_hat` (ms).
    pub tau_s: f64,
    /// Filter constant of the readout trace `s_bar` (ms).
    pub tau_star: f64,
    pub v_th: f64,
    pub v_rest: f64,
    /// Magnitude of the post-spike decrement applied to the membrane.
    pub w_res_magnitude: f64,
    /// Width of the pseudo-derivative.
    pub delta_v: f64,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            n_neurons: 500,
            dt: 1.0,
            tau_m: 1.0,
            tau_s: 1.0,
            tau_star: 3.0,
            v_th: 0.0,
            v_rest: -4.0,
            w_res_magnitude: 20.0,
            delta_v: 0.3,
        }
    }
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(Error::Config("n_neurons must be positive".into()));
        }
        let positive = [
            ("dt", self.dt),
            ("tau_m", self.tau_m),
            ("tau_s", self.tau_s),
            ("tau_star", self.tau_star),
            ("delta_v", self.delta_v),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.v_rest < self.v_th) {
            return Err(Error::Config(format!(
                "v_rest ({}) must lie below v_th ({})",
                self.v_rest, self.v_th
            )));
        }
        Ok(())
    }

    /// Membrane (and eligibility) decay factor per step.
    pub fn membrane_decay(&self) -> f64 {
        (-self.dt / self.tau_m).exp()
    }

    pub fn spike_filter_decay(&self) -> f64 {
        (-self.dt / self.tau_s).exp()
    }

    pub fn readout_decay(&self) -> f64 {
        (-self.dt / self.tau_star).exp()
    }
}

/// Dynamic variables of one module.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronLayerState {
    pub v: Vec<f64>,
    /// Spikes emitted by the last step, exactly 0.0 or 1.0.
    pub s: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub s_bar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityState {
    /// Presynaptic spike response, one entry per presynaptic neuron.
    pub e: Vec<f64>,
    /// Pseudo-derivative of each neuron at its current membrane potential.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// `w_rec[i][j]` is the synapse from `j` to `i`.
    pub w_rec: Matrix,
    /// Fixed projections of the external drive streams, each `N x D_stream`.
    pub input_weights: Vec<Matrix>,
}

/// Draws the recurrent and input weights of one module.
///
/// Input weights are `N(0, sigma_in[k]^2)` per stream, recurrent weights are
/// `N(0, (sigma_rec / sqrt(N))^2)`.
pub fn init_network(
    config: &NeuronConfig,
    rng_seed: u64,
    input_dims: &[usize],
    sigma_in: &[f64],
    sigma_rec: f64,
) -> Result<NetworkParams> {
    config.validate()?;
    check_len("sigma_in", input_dims.len(), sigma_in.len())?;
    if let Some(k) = input_dims.iter().position(|&d| d == 0) {
        return Err(Error::Config(format!("input stream {k} has zero dimension")));
    }
    if sigma_in.iter().chain([&sigma_rec]).any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Config("weight scales must be finite and non-negative".into()));
    }
    let n = config.n_neurons;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let input_weights = input_dims
        .iter()
        .zip(sigma_in)
        .map(|(&d, &sigma)| Matrix::gaussian(n, d, sigma, &mut rng))
        .collect();
    let w_rec = if sigma_rec == 0.0 {
        Matrix::zeros(n, n)
    } else {
        Matrix::gaussian(n, n, sigma_rec / (n as f64).sqrt(), &mut rng)
    };
    Ok(NetworkParams {
        w_rec,
        input_weights,
    })
}

/// Advances the layer by one step given the already projected input current.
pub fn step_layer(
    state: &mut NeuronLayerState,
    params: &NetworkParams,
    external_current: &[f64],
    config: &NeuronConfig,
) -> Result<()> {
    let n = config.n_neurons;
    check_len("external_current", n, external_current.len())?;
    check_len("w_rec rows", n, params.w_rec.rows())?;
    if external_current.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("external_current"));
    }
    let a_m = config.membrane_decay();
    let a_s = config.spike_filter_decay();
    let a_star = config.readout_decay();

    let NeuronLayerState { v, s, s_hat, s_bar } = state;
    for i in 0..n {
        let drive = crate::linalg::dot(params.w_rec.row(i), s_hat) + external_current[i] + config.v_rest;
        // Written as drive + a_m (v - drive) so that rest is an exact fixed point.
        v[i] = drive + a_m * (v[i] - drive) - config.w_res_magnitude * s[i];
    }
    for i in 0..n {
        s_hat[i] = a_s * s_hat[i] + (1.0 - a_s) * s[i];
        s[i] = if v[i] > config.v_th { 1.0 } else { 0.0 };
        s_bar[i] = a_star * s_bar[i] + (1.0 - a_star) * s[i];
    }
    Ok(())
}

/// Logistic-derivative surrogate `exp(v/dv) / (dv (exp(v/dv) + 1)^2)`,
/// evaluated through `exp(-|v|/dv)` so it never overflows.
#[inline]
pub fn pseudo_derivative_scalar(v: f64, delta_v: f64) -> f64 {
    let x = (-v.abs() / delta_v).exp();
    x / (delta_v * (1.0 + x) * (1.0 + x))
}

pub fn pseudo_derivative(v: &[f64], config: &NeuronConfig) -> Vec<f64> {
    v.iter()
        .map(|&x| pseudo_derivative_scalar(x - config.v_th, config.delta_v))
        .collect()
}

pub fn pseudo_derivative_into(v: &[f64], config: &NeuronConfig, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(v) {
        *o = pseudo_derivative_scalar(x - config.v_th, config.delta_v);
    }
}

/// `e <- a_m e + (1 - a_m) s_hat`, elementwise over presynaptic neurons.
pub fn update_eligibility(elig: &mut EligibilityState, s_hat: &[f64], config: &NeuronConfig) -> Result<()> {
    check_len("s_hat", elig.e.len(), s_hat.len())?;
    let a_m = config.membrane_decay();
    for (e, &x) in elig.e.iter_mut().zip(s_hat) {
        *e = a_m * *e + (1.0 - a_m) * x;
    }
    Ok(())
}

pub fn reset_episode_state(config: &NeuronConfig) -> (NeuronLayerState, EligibilityState) {
    let n = config.n_neurons;
    let v = vec![config.v_rest; n];
    let p = pseudo_derivative(&v, config);
    (
        NeuronLayerState {
            v,
            s: vec![0.0; n],
            s_hat: vec![0.0; n],
            s_bar: vec![0.0; n],
        },
        EligibilityState { e: vec![0.0; n], p },
    )
}

/// Saved dynamic state of a [`SpikingLayer`], used to branch and restore.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSnapshot {
    state: NeuronLayerState,
    elig: EligibilityState,
}

/// A module of LIF neurons together with its fixed input projections and
/// running traces.
#[derive(Debug, Clone)]
pub struct SpikingLayer {
    pub config: NeuronConfig,
    pub params: NetworkParams,
    pub state: NeuronLayerState,
    pub elig: EligibilityState,
    current: Vec<f64>,
}

impl SpikingLayer {
    pub fn new(config: NeuronConfig, params: NetworkParams) -> Result<Self> {
        config.validate()?;
        let n = config.n_neurons;
        check_len("w_rec rows", n, params.w_rec.rows())?;
        check_len("w_rec cols", n, params.w_rec.cols())?;
        for w in &params.input_weights {
            check_len("input weight rows", n, w.rows())?;
        }
        let (state, elig) = reset_episode_state(&config);
        Ok(Self {
            config,
            params,
            state,
            elig,
            current: vec![0.0; n],
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.config.n_neurons
    }

    pub fn reset(&mut self) {
        let (state, elig) = reset_episode_state(&self.config);
        self.state = state;
        self.elig = elig;
    }

    /// Projects each drive stream through its input matrix, then advances the
    /// eligibility trace, the membrane and the pseudo-derivative by one step.
    pub fn advance(&mut self, drives: &[&[f64]]) -> Result<()> {
        check_len("drive streams", self.params.input_weights.len(), drives.len())?;
        self.current.fill(0.0);
        for (w, drive) in self.params.input_weights.iter().zip(drives) {
            check_len("drive", w.cols(), drive.len())?;
            w.matvec_add(drive, &mut self.current);
        }
        // e^t filters the same s_hat that feeds the recurrent drive of v^t.
        update_eligibility(&mut self.elig, &self.state.s_hat, &self.config)?;
        step_layer(&mut self.state, &self.params, &self.current, &self.config)?;
        pseudo_derivative_into(&self.state.v, &self.config, &mut self.elig.p);
        Ok(())
    }

    pub fn snapshot(&self) -> LayerSnapshot {
        LayerSnapshot {
            state: self.state.clone(),
            elig: self.elig.clone(),
        }
    }

    pub fn restore(&mut self, snapshot: &LayerSnapshot) {
        self.state.clone_from(&snapshot.state);
        self.elig.clone_from(&snapshot.elig);
    }
}
