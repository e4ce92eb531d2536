//! DQN training on the corridor traversal task.
//!
//! The scenario is a walled corridor: the vehicle starts at one end with a
//! randomized lateral offset and initial heading, and must cross the goal
//! plane at the far end within the control budget. Walls are terrain, so the
//! ray grid sees them. Training follows the classic loop: an epsilon-greedy
//! behavior policy fills a replay ring, the value network learns from
//! uniform batches, and a target copy refreshes on a fixed period.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::net::{td_update, Mlp, NetError};
use super::replay::{ReplayBuffer, Transition};
use super::{
    build_observation, config_hash, q_network_sizes, reward, select_control, Policy, PolicyMeta,
    TrainConfig,
};
use crate::world::{
    AuvState, Bounds, Heightfield, SensorConfig, VehicleConfig, World,
};

/// Controls per episode before truncation.
pub const EPISODE_CONTROL_BUDGET: usize = 30;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Geometry of the training corridor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorridorConfig {
    pub length: f64,
    pub width: f64,
    pub depth: f64,
    /// Start-pose randomization: lateral band and the set of initial
    /// headings episodes draw from.
    #[serde(default = "default_start_band")]
    pub start_band: [f64; 2],
    #[serde(default = "default_start_yaws_deg")]
    pub start_yaws_deg: Vec<f64>,
}

fn default_start_band() -> [f64; 2] {
    [0.3, 0.7]
}

fn default_start_yaws_deg() -> Vec<f64> {
    vec![-30.0, 0.0, 30.0]
}

impl Default for CorridorConfig {
    fn default() -> Self {
        CorridorConfig {
            length: 20.0,
            width: 20.0,
            depth: 5.0,
            start_band: default_start_band(),
            start_yaws_deg: default_start_yaws_deg(),
        }
    }
}

impl CorridorConfig {
    pub fn goal_x(&self) -> f64 {
        self.length - 1.5
    }

    /// Builds a fresh corridor world with a sampled start pose.
    pub fn spawn<R: Rng>(&self, rng: &mut R) -> World {
        let cell = 1.0;
        let mut terrain =
            Heightfield::flat([0.0, 0.0], [self.length, self.width], cell, -self.depth);
        // Terrain walls along both long edges so the ray grid sees them.
        let steps = (self.length / cell) as usize;
        for i in 0..steps {
            let x = (i as f64 + 0.5) * cell;
            terrain.set_height(x, 0.5 * cell, -0.1);
            terrain.set_height(x, self.width - 0.5 * cell, -0.1);
        }
        let y = rng.gen_range(self.width * self.start_band[0]..self.width * self.start_band[1]);
        let yaw_deg = self.start_yaws_deg[rng.gen_range(0..self.start_yaws_deg.len())];
        let auv = AuvState {
            x: 1.5,
            y,
            z: -self.depth / 2.0,
            roll: 0.0,
            pitch: 0.0,
            yaw: yaw_deg.to_radians(),
            speed: 1.0,
        };
        World::new(
            Bounds { min: [0.0, 0.0, -self.depth], max: [self.length, self.width, 0.0] },
            terrain,
            Vec::new(),
            auv,
            0,
            SensorConfig { max_range: 25.0, ..SensorConfig::default() },
            VehicleConfig::default(),
        )
    }
}

/// Per-episode learning curve entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub reward: f64,
    pub loss: f64,
}

/// Trains a navigation policy on the corridor task. Fully deterministic for
/// a fixed (corridor, config, seed) triple.
pub fn train(
    corridor: &CorridorConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Policy, Vec<EpisodeStats>), TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::seeded(&q_network_sizes(), &mut rng);
    let mut target = net.clone();
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut grad_steps: u64 = 0;
    let mut stats = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon_at(episode);
        let mut world = corridor.spawn(&mut rng);
        let max_range = world.sensors.max_range;
        let mut total_reward = 0.0;
        let mut losses = Vec::new();

        for _ in 0..EPISODE_CONTROL_BUDGET {
            let frame = world.observe();
            let obs = build_observation(&frame, max_range, world.auv.yaw, 0.0);
            let qvals = net.forward(&obs)?;
            let action = select_control(&qvals, epsilon, &mut rng);
            let u = action.to_control(&world.auv, world.vehicle.turn_rate, world.vehicle.max_pitch);
            let next_frame = world.step(u);
            let reached = world.auv.x >= corridor.goal_x();
            let r = reward(&next_frame, reached);
            total_reward += r;
            let next_obs = build_observation(&next_frame, max_range, world.auv.yaw, 0.0);
            buffer.push(Transition {
                observation: obs,
                action,
                reward: r,
                next_observation: next_obs,
                terminal: reached,
            });

            if buffer.len() >= cfg.warmup {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                let loss = td_update(&mut net, &target, &batch, cfg.gamma, cfg.learning_rate)?;
                if !loss.is_finite() {
                    return Err(TrainError::Net(NetError::Diverged(grad_steps)));
                }
                losses.push(loss);
                grad_steps += 1;
                if grad_steps % cfg.target_update_period as u64 == 0 {
                    target = net.clone();
                }
            }
            if reached {
                break;
            }
        }
        let mean_loss = if losses.is_empty() {
            0.0
        } else {
            losses.iter().sum::<f64>() / losses.len() as f64
        };
        stats.push(EpisodeStats { episode, reward: total_reward, loss: mean_loss });
    }

    let policy = Policy {
        net,
        meta: PolicyMeta { seed, config_hash: config_hash(cfg), episodes: cfg.episodes },
    };
    Ok((policy, stats))
}

/// Greedy evaluation summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    pub successes: usize,
    pub mean_reward: f64,
}

impl EvalStats {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.episodes.max(1) as f64
    }
}

/// Runs the policy greedily (epsilon = 0) over fresh corridor episodes.
/// Success means crossing the goal plane within the control budget.
pub fn evaluate_policy(
    policy: &Policy,
    corridor: &CorridorConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalStats, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0;
    let mut reward_sum = 0.0;
    for _ in 0..episodes {
        let mut world = corridor.spawn(&mut rng);
        let max_range = world.sensors.max_range;
        let mut total = 0.0;
        for _ in 0..EPISODE_CONTROL_BUDGET {
            let frame = world.observe();
            let obs = build_observation(&frame, max_range, world.auv.yaw, 0.0);
            let action = policy.act(&obs)?;
            let u = action.to_control(&world.auv, world.vehicle.turn_rate, world.vehicle.max_pitch);
            let next_frame = world.step(u);
            let reached = world.auv.x >= corridor.goal_x();
            total += reward(&next_frame, reached);
            if reached {
                successes += 1;
                break;
            }
        }
        reward_sum += total;
    }
    Ok(EvalStats { episodes, successes, mean_reward: reward_sum / episodes.max(1) as f64 })
}

/// On-disk shape of a `train-dqn` configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainFileConfig {
    #[serde(default)]
    pub corridor: CorridorConfig,
    pub train: TrainConfig,
}
