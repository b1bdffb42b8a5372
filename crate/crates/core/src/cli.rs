//! Command-line configuration and the multi-seed experiment runner.
//!
//! Settings come from an optional config file (flat `key = value` lines or a
//! JSON object) and are then overridden by command-line flags. Each seed
//! writes `metrics_seed<k>.csv`; after all seeds finish, `summary.csv` holds
//! per-iteration mean, standard error and nearest-rank 80th percentile across
//! seeds.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;

use crate::env::{render_frame, ObservationMode, PongState};
use crate::stats::{mean, percentile_nearest_rank, std_err};
use crate::trainer::{Mode, TrainRecord, Trainer, TrainerConfig};
use crate::{Error, Result};

pub const METRICS_HEADER: [&str; 7] = [
    "iteration",
    "env_interactions",
    "episode_reward",
    "dream_reward",
    "model_loss_xi",
    "model_loss_r",
    "wall_ms",
];

const SUMMARY_METRICS: [&str; 4] = ["episode_reward", "dream_reward", "model_loss_xi", "model_loss_r"];

#[derive(Parser, Debug, Default)]
#[command(
    name = "dreamnet",
    version,
    about = "Train a spiking agent and world model on MiniPong, with optional dreaming or planning"
)]
pub struct Args {
    /// baseline | dream | plan | sleep-only | freeze-model
    #[arg(long)]
    pub mode: Option<String>,
    /// Training iterations (one real game each).
    #[arg(long)]
    pub iters: Option<usize>,
    /// Seed count (e.g. `10`) or explicit comma-separated list (e.g. `3,7,11`).
    #[arg(long)]
    pub seeds: Option<String>,
    /// Output directory for CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file, `key = value` lines or a JSON object. Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "n-fut")]
    pub n_fut: Option<usize>,
    /// Planning period; defaults to 2 * n_fut.
    #[arg(long = "dt-pred")]
    pub dt_pred: Option<usize>,
    #[arg(long = "freeze-at")]
    pub freeze_at: Option<usize>,
    /// coords | pixels
    #[arg(long)]
    pub obs: Option<String>,
    /// Write the first real game of each seed as PGM frames.
    #[arg(long = "dump-frames")]
    pub dump_frames: bool,
    /// Neurons per module.
    #[arg(long)]
    pub neurons: Option<usize>,
    /// Report wall_ms as 0 so reruns produce identical bytes.
    #[arg(long = "no-wall-clock")]
    pub no_wall_clock: bool,
    /// Any config key, repeatable: `--set tau_m=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trainer: TrainerConfig,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub dump_frames: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trainer: TrainerConfig::default(),
            out_dir: PathBuf::from("runs"),
            seeds: vec![0],
            dump_frames: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Invalid(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Invalid(_) => 2,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

/// `"10"` means seeds `0..10`; anything with a comma is an explicit list.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let value = value.trim();
    let seeds: Vec<u64> = if value.contains(',') {
        value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_value("seeds", s))
            .collect::<Result<_>>()?
    } else {
        (0..parse_value::<u64>("seeds", value)?).collect()
    };
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(seeds)
}

impl RunConfig {
    /// Applies one setting by name. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let t = &mut self.trainer;
        match key.as_str() {
            "mode" => t.mode = value.trim().parse()?,
            "iters" | "n_iter" => t.n_iter = parse_value(&key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "out" => self.out_dir = PathBuf::from(value.trim()),
            "n_fut" => {
                t.n_fut = parse_value(&key, value)?;
                t.dt_pred = 2 * t.n_fut.max(1);
            }
            "dt_pred" => t.dt_pred = parse_value(&key, value)?,
            "freeze_at" => t.freeze_at = parse_value(&key, value)?,
            "obs" => t.obs = value.trim().parse::<ObservationMode>()?,
            "dump_frames" => self.dump_frames = parse_bool(&key, value)?,
            "neurons" | "n_neurons" => t.neuron.n_neurons = parse_value(&key, value)?,
            "awake_t" => t.awake_t = parse_value(&key, value)?,
            "dream_t" => t.dream_t = parse_value(&key, value)?,
            "gamma" => t.gamma = parse_value(&key, value)?,
            "clip_dream_reward" => t.clip_dream_reward = parse_bool(&key, value)?,
            "record_wall_time" => t.record_wall_time = parse_bool(&key, value)?,
            "dt" => t.neuron.dt = parse_value(&key, value)?,
            "tau_m" => t.neuron.tau_m = parse_value(&key, value)?,
            "tau_s" => t.neuron.tau_s = parse_value(&key, value)?,
            "tau_star" => t.neuron.tau_star = parse_value(&key, value)?,
            "delta_v" => t.neuron.delta_v = parse_value(&key, value)?,
            "v_th" => t.neuron.v_th = parse_value(&key, value)?,
            "v_rest" => t.neuron.v_rest = parse_value(&key, value)?,
            "w_res" | "w_res_magnitude" => t.neuron.w_res_magnitude = parse_value(&key, value)?,
            "sigma_in" => t.sigma_in = parse_value(&key, value)?,
            "sigma_rec" => t.sigma_rec = parse_value(&key, value)?,
            "lr" => {
                t.agent_lr = parse_value(&key, value)?;
                t.model_lr = t.agent_lr;
            }
            "agent_lr" => t.agent_lr = parse_value(&key, value)?,
            "model_lr" => t.model_lr = parse_value(&key, value)?,
            "c_xi" => t.loss.c_xi = parse_value(&key, value)?,
            "c_r" => t.loss.c_r = parse_value(&key, value)?,
            "pixel_dim" => t.pixel_dim = parse_value(&key, value)?,
            "pixel_sigma" => t.pixel_sigma = parse_value(&key, value)?,
            "ball_speed" => t.env.ball_speed = parse_value(&key, value)?,
            "agent_speed" => t.env.agent_speed = parse_value(&key, value)?,
            "opponent_speed" => t.env.opponent_speed = parse_value(&key, value)?,
            "paddle_half_height" => t.env.paddle_half_height = parse_value(&key, value)?,
            "serve_delay" => t.env.serve_delay = parse_value(&key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }
}

/// Reads a config file into ordered `(key, value)` pairs.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("JSON config must be an object".into()))?;
        return Ok(obj
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Array(items) => items
                        .iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                    other => other.to_string(),
                };
                (k.clone(), v)
            })
            .collect());
    }
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    let mut cfg = RunConfig::default();
    let mut mode_given = false;
    if let Some(path) = &args.config {
        for (k, v) in read_config_file(path)? {
            mode_given |= k.trim() == "mode";
            cfg.set(&k, &v)?;
        }
    }
    let mut flags: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k.to_string(), v));
        }
    };
    push("mode", args.mode.clone());
    push("iters", args.iters.map(|x| x.to_string()));
    push("seeds", args.seeds.clone());
    push("out", args.out.as_ref().map(|p| p.display().to_string()));
    push("neurons", args.neurons.map(|x| x.to_string()));
    push("n_fut", args.n_fut.map(|x| x.to_string()));
    push("dt_pred", args.dt_pred.map(|x| x.to_string()));
    push("freeze_at", args.freeze_at.map(|x| x.to_string()));
    push("obs", args.obs.clone());
    if args.dump_frames {
        push("dump_frames", Some("true".into()));
    }
    if args.no_wall_clock {
        push("record_wall_time", Some("false".into()));
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        flags.push((k.to_string(), v.to_string()));
    }
    for (k, v) in &flags {
        mode_given |= k == "mode";
        cfg.set(k, v)?;
    }
    if !mode_given {
        return Err(clap::Error::raw(clap::error::ErrorKind::MissingRequiredArgument, "--mode is required\n").into());
    }
    cfg.trainer.validate()?;
    Ok(cfg)
}

pub fn metrics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed{seed}.csv"))
}

pub fn write_metrics(path: &Path, records: &[TrainRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.iteration.to_string(),
            r.env_interactions.to_string(),
            r.episode_reward.to_string(),
            r.dream_reward.to_string(),
            r.model_loss_xi.to_string(),
            r.model_loss_r.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<TrainRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = |i: usize| parse_value::<f64>(METRICS_HEADER[i], &row[i]);
        out.push(TrainRecord {
            iteration: parse_value("iteration", &row[0])?,
            env_interactions: parse_value("env_interactions", &row[1])?,
            episode_reward: f(2)?,
            dream_reward: f(3)?,
            model_loss_xi: f(4)?,
            model_loss_r: f(5)?,
            wall_ms: f(6)?,
        });
    }
    Ok(out)
}

fn metric(r: &TrainRecord, name: &str) -> f64 {
    match name {
        "episode_reward" => r.episode_reward,
        "dream_reward" => r.dream_reward,
        "model_loss_xi" => r.model_loss_xi,
        "model_loss_r" => r.model_loss_r,
        _ => unreachable!("unknown metric {name}"),
    }
}

pub fn summary_header() -> Vec<String> {
    let mut h = vec!["iteration".to_string(), "env_interactions".into(), "n_seeds".into()];
    for m in SUMMARY_METRICS {
        for stat in ["mean", "stderr", "p80"] {
            h.push(format!("{m}_{stat}"));
        }
    }
    h
}

/// Per-iteration statistics across seeds; runs must have equal length.
pub fn write_summary(path: &Path, runs: &[Vec<TrainRecord>]) -> Result<()> {
    let n_iter = runs.first().map_or(0, Vec::len);
    if runs.iter().any(|r| r.len() != n_iter) {
        return Err(Error::Config("seed runs have different lengths".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_header())?;
    for i in 0..n_iter {
        let first = &runs[0][i];
        let mut row = vec![
            first.iteration.to_string(),
            first.env_interactions.to_string(),
            runs.len().to_string(),
        ];
        for m in SUMMARY_METRICS {
            let xs: Vec<f64> = runs.iter().map(|r| metric(&r[i], m)).collect();
            row.push(mean(&xs).to_string());
            row.push(std_err(&xs).to_string());
            row.push(percentile_nearest_rank(&xs, 80.0).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn run_seed(config: &RunConfig, seed: u64) -> Result<Vec<TrainRecord>> {
    let mut trainer = Trainer::new(config.trainer.clone(), seed)?;
    let mut records = Vec::with_capacity(config.trainer.n_iter);
    for i in 0..config.trainer.n_iter {
        let record = if config.dump_frames && i == 0 {
            let dir = config.out_dir.join(format!("frames_seed{seed}"));
            fs::create_dir_all(&dir)?;
            let env_cfg = config.trainer.env_config();
            let mut step = 0usize;
            let mut dump = |state: &PongState| -> Result<()> {
                step += 1;
                render_frame(state, &env_cfg).write_pgm(&dir.join(format!("step_{step:03}.pgm")))
            };
            trainer.run_iteration(Some(&mut dump))?
        } else {
            trainer.run_iteration(None)?
        };
        records.push(record);
    }
    write_metrics(&metrics_path(&config.out_dir, seed), &records)?;
    Ok(records)
}

/// Runs every seed, writes per-seed metrics and the summary, and returns the records.
pub fn run_experiment_checked(config: &RunConfig) -> Result<Vec<Vec<TrainRecord>>> {
    config.trainer.validate()?;
    if config.seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    fs::create_dir_all(&config.out_dir)?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<Vec<_>>>()?;
    write_summary(&config.out_dir.join("summary.csv"), &runs)?;
    Ok(runs)
}

/// Exit code 0 iff every seed completed and all files were written.
pub fn run_experiment(config: &RunConfig) -> i32 {
    match run_experiment_checked(config) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn mode_names() -> Vec<&'static str> {
    Mode::ALL.iter().map(|m| m.as_str()).collect()
}
