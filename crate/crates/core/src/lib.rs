//! Two-module recurrent spiking network (agent + world model) trained online
//! with local three-factor rules, plus "dreaming" and "planning" phases that
//! reuse the learned world model to train the policy without touching the
//! real environment.
//!
//! The crate is organized bottom-up:
//!
//! - [`snn`]: discrete-time LIF dynamics, pseudo-derivative, eligibility traces
//! - [`optim`]: Adam applied once per episode to accumulated update directions
//! - [`world_model`]: readouts and online learning rule of the model network
//! - [`agent`]: softmax policy, returns and the online policy-gradient rule
//! - [`env`]: MiniPong, a deterministic Pong-like environment with pixel mode
//! - [`trainer`]: awake / dream / planning orchestration and ablations
//! - [`stats`], [`cli`]: multi-seed experiment harness and CSV output

pub mod agent;
pub mod cli;
pub mod env;
mod error;
pub mod linalg;
pub mod optim;
pub mod snn;
pub mod stats;
pub mod trainer;
pub mod world_model;

pub use error::{Error, Result};
pub use linalg::Matrix;
