//! MiniPong: a small deterministic Pong on the unit square.
//!
//! The agent paddle sits at the left (`x = 0.05`), the opponent at the right
//! (`x = 0.95`), `y` grows upward. The ball keeps a constant speed; it
//! reflects off the top and bottom walls, and off a paddle with an outgoing
//! angle proportional to the hit offset from the paddle center. A ball that
//! leaves through the left edge costs the agent one point (`-1`), through the
//! right edge earns one (`+1`). After a point the ball is re-served from the
//! center toward the agent, following a short pause, and play continues until
//! the horizon.
//!
//! World variables are `(ball x, ball y, agent paddle y, opponent paddle y)`.
//! In pixel mode the state is rasterized to a binary frame and projected to a
//! few dimensions with a fixed Gaussian matrix.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::check_len;
use crate::world_model::WorldObservation;
use crate::{Error, Matrix, Result};

pub const N_ACTIONS: usize = 3;
pub const OBS_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up = 0,
    Stay = 1,
    Down = 2,
}

impl Action {
    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Action::Up),
            1 => Ok(Action::Stay),
            2 => Ok(Action::Down),
            _ => Err(Error::Config(format!("action {index} out of range"))),
        }
    }

    fn direction(self) -> f64 {
        match self {
            Action::Up => 1.0,
            Action::Stay => 0.0,
            Action::Down => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PongConfig {
    pub horizon: usize,
    pub agent_x: f64,
    pub opponent_x: f64,
    pub paddle_half_height: f64,
    pub ball_speed: f64,
    pub agent_speed: f64,
    pub opponent_speed: f64,
    /// Largest serve angle from the horizontal (radians).
    pub max_serve_angle: f64,
    /// Outgoing angle for a hit on the paddle edge (radians).
    pub max_bounce_angle: f64,
    /// Steps the ball rests at the center after a point.
    pub serve_delay: usize,
    pub frame_width: usize,
    pub frame_height: usize,
}

impl Default for PongConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            agent_x: 0.05,
            opponent_x: 0.95,
            paddle_half_height: 0.1,
            ball_speed: 0.025,
            agent_speed: 0.04,
            opponent_speed: 0.02,
            max_serve_angle: PI / 4.0,
            max_bounce_angle: PI / 3.0,
            serve_delay: 20,
            frame_width: 80,
            frame_height: 105,
        }
    }
}

impl PongConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {x} outside the unit interval")))
            }
        };
        unit("agent_x", self.agent_x)?;
        unit("opponent_x", self.opponent_x)?;
        if self.agent_x >= self.opponent_x {
            return Err(Error::Config("agent paddle must be left of the opponent".into()));
        }
        if !(self.paddle_half_height > 0.0 && self.paddle_half_height < 0.5) {
            return Err(Error::Config("paddle_half_height must be in (0, 0.5)".into()));
        }
        for (name, v) in [
            ("ball_speed", self.ball_speed),
            ("agent_speed", self.agent_speed),
            ("opponent_speed", self.opponent_speed),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1)")));
            }
        }
        if !(self.max_serve_angle >= 0.0 && self.max_serve_angle < PI / 2.0)
            || !(self.max_bounce_angle > 0.0 && self.max_bounce_angle < PI / 2.0)
        {
            return Err(Error::Config("angles must lie in [0, pi/2)".into()));
        }
        if self.opponent_speed >= self.ball_speed * self.max_bounce_angle.sin() {
            return Err(Error::Config(
                "opponent speed cap must be below the fastest vertical ball speed".into(),
            ));
        }
        if self.horizon == 0 || self.frame_width < 4 || self.frame_height < 4 {
            return Err(Error::Config("horizon and frame size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PongState {
    pub ball_x: f64,
    pub ball_y: f64,
    pub ball_vx: f64,
    pub ball_vy: f64,
    pub agent_y: f64,
    pub opponent_y: f64,
    pub step: usize,
    pub agent_score: u32,
    pub opponent_score: u32,
    pub serve_timer: usize,
    rng: ChaCha8Rng,
}

impl PongState {
    pub fn xi(&self) -> [f64; OBS_DIM] {
        [self.ball_x, self.ball_y, self.agent_y, self.opponent_y]
    }

    pub fn is_finished(&self, config: &PongConfig) -> bool {
        self.step >= config.horizon
    }

    fn serve(&mut self, config: &PongConfig, delay: usize) {
        let angle = self.rng.random_range(-config.max_serve_angle..=config.max_serve_angle);
        self.ball_x = 0.5;
        self.ball_y = 0.5;
        self.ball_vx = -config.ball_speed * angle.cos();
        self.ball_vy = config.ball_speed * angle.sin();
        self.serve_timer = delay;
    }
}

fn fold_unit(mut y: f64, mut vy: f64) -> (f64, f64) {
    loop {
        if y < 0.0 {
            y = -y;
            vy = -vy;
        } else if y > 1.0 {
            y = 2.0 - y;
            vy = -vy;
        } else {
            return (y, vy);
        }
    }
}

pub fn env_reset(config: &PongConfig, seed: u64) -> (PongState, WorldObservation) {
    let mut state = PongState {
        ball_x: 0.5,
        ball_y: 0.5,
        ball_vx: 0.0,
        ball_vy: 0.0,
        agent_y: 0.5,
        opponent_y: 0.5,
        step: 0,
        agent_score: 0,
        opponent_score: 0,
        serve_timer: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    state.serve(config, 0);
    let obs = WorldObservation::new(state.xi().to_vec(), 0.0);
    (state, obs)
}

/// Advances the game one step and returns the new observation (its `reward`
/// field is the reward of this step).
pub fn env_step(state: &mut PongState, action: usize, config: &PongConfig) -> Result<WorldObservation> {
    if state.is_finished(config) {
        return Err(Error::EpisodeFinished(state.step));
    }
    let action = Action::from_index(action)?;
    let hh = config.paddle_half_height;
    state.agent_y = (state.agent_y + action.direction() * config.agent_speed).clamp(hh, 1.0 - hh);
    let chase = (state.ball_y - state.opponent_y).clamp(-config.opponent_speed, config.opponent_speed);
    state.opponent_y = (state.opponent_y + chase).clamp(hh, 1.0 - hh);

    let mut reward = 0.0;
    if state.serve_timer > 0 {
        state.serve_timer -= 1;
    } else {
        let (x0, y0) = (state.ball_x, state.ball_y);
        let x1 = x0 + state.ball_vx;
        let y1 = y0 + state.ball_vy;
        let crossing = |paddle_x: f64| {
            let frac = (x0 - paddle_x) / (x0 - x1);
            fold_unit(y0 + frac * (y1 - y0), state.ball_vy).0
        };
        let hit = |paddle_x: f64, paddle_y: f64| {
            let y_cross = crossing(paddle_x);
            ((y_cross - paddle_y).abs() <= hh).then_some((y_cross, ((y_cross - paddle_y) / hh).clamp(-1.0, 1.0)))
        };
        let mut bounced = None;
        if state.ball_vx < 0.0 && x0 >= config.agent_x && x1 < config.agent_x {
            if let Some((y, offset)) = hit(config.agent_x, state.agent_y) {
                bounced = Some((config.agent_x, y, offset, 1.0));
            }
        } else if state.ball_vx > 0.0 && x0 <= config.opponent_x && x1 > config.opponent_x {
            if let Some((y, offset)) = hit(config.opponent_x, state.opponent_y) {
                bounced = Some((config.opponent_x, y, offset, -1.0));
            }
        }
        match bounced {
            Some((x, y, offset, dir)) => {
                let angle = offset * config.max_bounce_angle;
                state.ball_x = x;
                state.ball_y = y;
                state.ball_vx = dir * config.ball_speed * angle.cos();
                state.ball_vy = config.ball_speed * angle.sin();
            }
            None => {
                let (y, vy) = fold_unit(y1, state.ball_vy);
                state.ball_x = x1;
                state.ball_y = y;
                state.ball_vy = vy;
            }
        }
        if state.ball_x < 0.0 {
            reward = -1.0;
            state.opponent_score += 1;
            state.serve(config, config.serve_delay);
        } else if state.ball_x > 1.0 {
            reward = 1.0;
            state.agent_score += 1;
            state.serve(config, config.serve_delay);
        }
    }
    state.step += 1;
    Ok(WorldObservation::new(state.xi().to_vec(), reward))
}

/// Convenience wrapper owning config and state.
#[derive(Debug, Clone)]
pub struct MiniPong {
    pub config: PongConfig,
    pub state: PongState,
}

impl MiniPong {
    pub fn new(config: PongConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (state, _) = env_reset(&config, seed);
        Ok(Self { config, state })
    }

    pub fn reset(&mut self, seed: u64) -> WorldObservation {
        let (state, obs) = env_reset(&self.config, seed);
        self.state = state;
        obs
    }

    pub fn step(&mut self, action: usize) -> Result<WorldObservation> {
        env_step(&mut self.state, action, &self.config)
    }
}

/// Binary raster, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn on_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|&p| if p != 0 { 255 } else { 0 }).collect();
        out.write_all(&bytes)?;
        out.flush()?;
        Ok(())
    }
}

pub fn render_frame(state: &PongState, config: &PongConfig) -> Frame {
    let (w, h) = (config.frame_width, config.frame_height);
    let mut pixels = vec![0u8; w * h];
    let col = |x: f64| ((x * w as f64).floor() as isize).clamp(0, w as isize - 1) as usize;
    let row = |y: f64| (((1.0 - y) * h as f64).floor() as isize).clamp(0, h as isize - 1) as usize;
    let mut fill = |c0: usize, c1: usize, r0: usize, r1: usize| {
        for r in r0..=r1.min(h - 1) {
            for c in c0..=c1.min(w - 1) {
                pixels[r * w + c] = 1;
            }
        }
    };
    let hh = config.paddle_half_height;
    for (x, y) in [(config.agent_x, state.agent_y), (config.opponent_x, state.opponent_y)] {
        let c = col(x).min(w - 2);
        fill(c, c + 1, row(y + hh), row(y - hh));
    }
    // 2x2 ball stamp, shifted inward at the borders.
    let c = col(state.ball_x).min(w - 2);
    let r = row(state.ball_y).min(h - 2);
    fill(c, c + 1, r, r + 1);
    Frame { width: w, height: h, pixels }
}

/// `xi_k = sum_h F_kh x_h` over the pixels of `frame`.
pub fn pixel_project(frame: &Frame, projection: &Matrix) -> Result<Vec<f64>> {
    check_len("projection columns", frame.pixels.len(), projection.cols())?;
    let mut out = vec![0.0; projection.rows()];
    for (h, &x) in frame.pixels.iter().enumerate() {
        if x != 0 {
            let x = x as f64;
            for (k, o) in out.iter_mut().enumerate() {
                *o += projection.get(k, h) * x;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationMode {
    Coords,
    Pixels,
}

impl std::str::FromStr for ObservationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coords" => Ok(Self::Coords),
            "pixels" => Ok(Self::Pixels),
            other => Err(Error::Config(format!("unknown observation mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Coords => "coords",
            Self::Pixels => "pixels",
        })
    }
}

/// Maps environment states to the world variables seen by the networks.
#[derive(Debug, Clone)]
pub struct Observer {
    mode: ObservationMode,
    projection: Option<Matrix>,
}

impl Observer {
    pub fn coords() -> Self {
        Self {
            mode: ObservationMode::Coords,
            projection: None,
        }
    }

    /// Random pixel projection to `dim` variables, entries `N(0, sigma^2)`.
    pub fn pixels(config: &PongConfig, dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("projection dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = config.frame_width * config.frame_height;
        Ok(Self {
            mode: ObservationMode::Pixels,
            projection: Some(Matrix::gaussian(dim, p, sigma, &mut rng)),
        })
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.projection.as_ref().map_or(OBS_DIM, Matrix::rows)
    }

    pub fn observe(&self, state: &PongState, config: &PongConfig) -> Vec<f64> {
        match &self.projection {
            None => state.xi().to_vec(),
            Some(f) => pixel_project(&render_frame(state, config), f).expect("projection sized from config"),
        }
    }

    /// A random starting point for a simulated episode: uniform in the
    /// coordinate box, or the projection of a uniformly placed scene.
    pub fn random_observation<R: Rng + ?Sized>(&self, rng: &mut R, config: &PongConfig) -> Vec<f64> {
        match &self.projection {
            None => (0..OBS_DIM).map(|_| rng.random::<f64>()).collect(),
            Some(_) => {
                let hh = config.paddle_half_height;
                let (mut state, _) = env_reset(config, 0);
                state.ball_x = rng.random();
                state.ball_y = rng.random();
                state.agent_y = rng.random_range(hh..=1.0 - hh);
                state.opponent_y = rng.random_range(hh..=1.0 - hh);
                self.observe(&state, config)
            }
        }
    }
}

/// Total reward of each of `episodes` episodes played by a uniform random policy.
pub fn random_policy_rewards(config: &PongConfig, episodes: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes)
        .map(|ep| {
            let (mut state, _) = env_reset(config, seed.wrapping_mul(1_000_003).wrapping_add(ep as u64));
            let mut total = 0.0;
            while !state.is_finished(config) {
                total += env_step(&mut state, rng.random_range(0..N_ACTIONS), config)
                    .expect("episode not finished")
                    .reward;
            }
            total
        })
        .collect()
}
