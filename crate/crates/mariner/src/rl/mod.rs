//! Motion planning: a deep Q-network policy for the `navigate` action, a
//! scripted tracking controller for `approach`, and the training pipeline.

pub mod approach;
pub mod net;
pub mod replay;
pub mod train;

pub use approach::{approach_controller, ApproachCommand};
pub use net::{apply_sgd, td_grads, td_update, Mlp, NetError};
pub use replay::{ReplayBuffer, Transition};
pub use train::{evaluate_policy, train, CorridorConfig, EpisodeStats, TrainError, TrainFileConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::world::{wrap_angle, ControlPrimitive, SensorFrame, RAY_GRID_LEN};

/// Observation width: the flattened ray grid plus sin/cos of the bearing to
/// the directed search sector.
pub const OBSERVATION_DIM: usize = RAY_GRID_LEN + 2;
/// Hidden layer width of the production network.
pub const HIDDEN_DIM: usize = 64;

/// Layer sizes of the production Q-network.
pub fn q_network_sizes() -> Vec<usize> {
    vec![OBSERVATION_DIM, HIDDEN_DIM, HIDDEN_DIM, ControlPrimitive::ALL.len()]
}

/// Ray depths normalized to (0, 1] plus the target bearing encoded as
/// (sin, cos); every component lies in [-1, 1].
pub fn build_observation(frame: &SensorFrame, max_range: f64, yaw: f64, target_azimuth: f64) -> Vec<f64> {
    let mut obs = Vec::with_capacity(OBSERVATION_DIM);
    for &d in &frame.ray_depths {
        obs.push((d / max_range).clamp(0.0, 1.0));
    }
    let rel = wrap_angle(target_azimuth - yaw);
    obs.push(rel.sin());
    obs.push(rel.cos());
    obs
}

/// Per-step reward: a time penalty, an extra collision penalty, and the
/// goal-reaching bonus on completion.
pub fn reward(frame: &SensorFrame, reached_goal: bool) -> f64 {
    let mut r = -0.1;
    if frame.collision {
        r -= 0.1;
    }
    if reached_goal {
        r += 10.0;
    }
    r
}

/// Discounted return of a reward sequence.
pub fn compute_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// The per-primitive action values for an observation: a forward pass with
/// rectified-linear hidden activations and a linear output layer.
pub fn q_values(net: &Mlp, observation: &[f64]) -> Result<Vec<f64>, NetError> {
    net.forward(observation)
}

/// Epsilon-greedy control selection. Greedy picks the argmax with ties
/// broken to the lowest primitive index; exploration is uniform over the
/// four primitives.
pub fn select_control<R: Rng>(qvals: &[f64], epsilon: f64, rng: &mut R) -> ControlPrimitive {
    debug_assert_eq!(qvals.len(), ControlPrimitive::ALL.len());
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return ControlPrimitive::ALL[rng.gen_range(0..ControlPrimitive::ALL.len())];
    }
    let mut best = 0;
    for (i, &q) in qvals.iter().enumerate() {
        if q > qvals[best] {
            best = i;
        }
    }
    ControlPrimitive::ALL[best]
}

/// Training hyperparameters. `Default` carries the reference configuration;
/// [`TrainConfig::desk_scale`] is the fast profile used by the test suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Samples collected before any gradient step.
    pub warmup: usize,
    /// Gradient steps between target-network copies.
    pub target_update_period: usize,
    pub episodes: usize,
    pub epsilon_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.95,
            replay_capacity: 60_000,
            batch_size: 64,
            learning_rate: 0.005,
            warmup: 2_000,
            target_update_period: 500,
            episodes: 5_000,
            epsilon_floor: 0.05,
        }
    }
}

impl TrainConfig {
    /// Small configuration that trains the corridor task in seconds.
    pub fn desk_scale() -> Self {
        TrainConfig { episodes: 500, warmup: 500, replay_capacity: 20_000, ..Self::default() }
    }

    /// Behavior-policy epsilon for an episode index: anneals linearly from
    /// 1.0 to the floor over the first half of the run.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let half = (self.episodes / 2).max(1);
        if episode >= half {
            self.epsilon_floor
        } else {
            1.0 - (1.0 - self.epsilon_floor) * episode as f64 / half as f64
        }
    }
}

/// A trained Q-network acted on greedily (ties to the lowest index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub net: Mlp,
    pub meta: PolicyMeta,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub seed: u64,
    pub config_hash: String,
    pub episodes: usize,
}

impl Policy {
    pub fn act(&self, observation: &[f64]) -> Result<ControlPrimitive, NetError> {
        let q = self.net.forward(observation)?;
        let mut best = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        Ok(ControlPrimitive::ALL[best])
    }

    /// Portable serialized form: layer shapes, row-major weights, metadata.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Policy, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Stable hash of a training configuration, recorded in policy metadata.
pub fn config_hash(cfg: &TrainConfig) -> String {
    use sha2::{Digest, Sha256};
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    hex_string(&digest[..8])
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn return_of_single_reward_is_itself() {
        assert!((compute_return(&[10.0], 0.95) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn return_hand_evaluated() {
        let g = compute_return(&[-0.1, -0.1, 10.0], 0.95);
        assert!((g - 8.83).abs() < 1e-12, "got {g}");
    }

    #[test]
    fn return_of_empty_sequence_is_zero() {
        assert_eq!(compute_return(&[], 0.95), 0.0);
    }

    #[test]
    fn constant_reward_matches_closed_form() {
        let gamma: f64 = 0.9;
        for n in [1usize, 5, 17] {
            let rewards = vec![2.5; n];
            let g = compute_return(&rewards, gamma);
            let closed = 2.5 * (1.0 - gamma.powi(n as i32)) / (1.0 - gamma);
            assert!((g - closed).abs() < 1e-10, "n={n}: {g} vs {closed}");
        }
    }

    #[test]
    fn greedy_selection_and_tie_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = select_control(&[0.1, 0.9, 0.2, 0.0], 0.0, &mut rng);
        assert_eq!(c, ControlPrimitive::TurnRight);
        let c = select_control(&[0.5, 0.5, 0.5, 0.5], 0.0, &mut rng);
        assert_eq!(c, ControlPrimitive::TurnLeft);
    }

    #[test]
    fn greedy_is_invariant_under_constant_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = [0.3, -0.2, 0.7, 0.1];
        let shifted: Vec<f64> = q.iter().map(|v| v + 123.45).collect();
        assert_eq!(
            select_control(&q, 0.0, &mut rng),
            select_control(&shifted, 0.0, &mut rng)
        );
    }

    #[test]
    fn full_exploration_is_uniform_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000usize;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_control(&[0.0, 1.0, 0.0, 0.0], 1.0, &mut rng).index()] += 1;
        }
        // Binomial(n, 1/4): sigma = sqrt(n * p * (1-p)).
        let expected = n as f64 * 0.25;
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() < 3.0 * sigma,
                "primitive {i} drawn {c} times, expected {expected} +- {}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn reward_values() {
        let mut frame = SensorFrame {
            ray_depths: vec![50.0; RAY_GRID_LEN],
            laser_forward: 50.0,
            imu_accel: [0.0; 3],
            velocity_measured: 1.0,
            depth: 10.0,
            collision: false,
            visible_entities: vec![],
        };
        assert!((reward(&frame, false) + 0.1).abs() < 1e-15);
        frame.collision = true;
        assert!((reward(&frame, false) + 0.2).abs() < 1e-15);
        frame.collision = false;
        assert!((reward(&frame, true) - 9.9).abs() < 1e-15);
    }

    #[test]
    fn observation_components_stay_bounded() {
        let frame = SensorFrame {
            ray_depths: vec![12.5; RAY_GRID_LEN],
            laser_forward: 12.5,
            imu_accel: [0.0; 3],
            velocity_measured: 1.0,
            depth: 10.0,
            collision: false,
            visible_entities: vec![],
        };
        let obs = build_observation(&frame, 50.0, 0.3, -2.0);
        assert_eq!(obs.len(), OBSERVATION_DIM);
        assert!(obs.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn default_config_matches_the_reference_hyperparameters() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.gamma, 0.95);
        assert_eq!(cfg.replay_capacity, 60_000);
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.learning_rate, 0.005);
        assert_eq!(cfg.warmup, 2_000);
        assert_eq!(cfg.target_update_period, 500);
        assert_eq!(cfg.episodes, 5_000);
        assert_eq!(cfg.epsilon_floor, 0.05);
    }

    #[test]
    fn epsilon_schedule_anneals_to_floor() {
        let cfg = TrainConfig { episodes: 100, epsilon_floor: 0.05, ..TrainConfig::default() };
        assert_eq!(cfg.epsilon_at(0), 1.0);
        assert!(cfg.epsilon_at(25) < 1.0);
        assert_eq!(cfg.epsilon_at(50), 0.05);
        assert_eq!(cfg.epsilon_at(99), 0.05);
    }

    #[test]
    fn policy_round_trips_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let policy = Policy {
            net: Mlp::seeded(&q_network_sizes(), &mut rng),
            meta: PolicyMeta { seed: 5, config_hash: "abc".into(), episodes: 10 },
        };
        let text = policy.to_json();
        let back = Policy::from_json(&text).unwrap();
        assert_eq!(policy, back);
    }
}
