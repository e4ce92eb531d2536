//! Holistic supervision: after every executed control the mission runner
//! feeds the latest frame here, gets back a five-valued flag, and routes the
//! matching recovery directive to the right planning level.
//!
//! Flags resolve by fixed priority — done beats a task fault beats a motion
//! fault beats an exhausted heuristic beats nominal — so simultaneous
//! triggers are deterministic.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::SensorFrame;

/// The supervision verdict. Codes follow the replanning-flag convention:
/// done = 0, semantic replan = 1, task replan = 2, motion replan = 3; the
/// nominal "keep executing" case carries no code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanFlag {
    None,
    Done,
    LlmReplan,
    TaskReplan,
    MotionReplan,
}

impl ReplanFlag {
    pub fn code(self) -> Option<u8> {
        match self {
            ReplanFlag::None => None,
            ReplanFlag::Done => Some(0),
            ReplanFlag::LlmReplan => Some(1),
            ReplanFlag::TaskReplan => Some(2),
            ReplanFlag::MotionReplan => Some(3),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Recovery routed to a specific planning level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryDirective {
    /// Task level: drop the plan, surface, signal for help.
    AbortToRescue,
    /// Motion level: one turn against an unexpected acceleration.
    CorrectiveTurn(Side),
    /// Motion level: sidestep whatever the laser sees ahead.
    AvoidObstacle(Side),
    /// Semantic level: re-assess and produce a fresh heuristic.
    NewHeuristic,
    Finish,
}

impl RecoveryDirective {
    /// The flag this directive answers; used by the consistency checks.
    pub fn level(&self) -> ReplanFlag {
        match self {
            RecoveryDirective::AbortToRescue => ReplanFlag::TaskReplan,
            RecoveryDirective::CorrectiveTurn(_) | RecoveryDirective::AvoidObstacle(_) => {
                ReplanFlag::MotionReplan
            }
            RecoveryDirective::NewHeuristic => ReplanFlag::LlmReplan,
            RecoveryDirective::Finish => ReplanFlag::Done,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplanError {
    #[error("dispatch called with the nominal flag")]
    NothingToDispatch,
}

/// Supervision thresholds; all exposed in the mission configuration under
/// `replanner{speed_ratio, window, accel_factor, d_safe}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplanConfig {
    /// Sustained measured/commanded speed ratio below this is a task fault.
    #[serde(default = "default_speed_ratio")]
    pub speed_ratio: f64,
    /// Ring-buffer length for the sustained-speed check.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Motion fault when |lateral accel| exceeds this multiple of the
    /// nominal turning acceleration.
    #[serde(default = "default_accel_factor")]
    pub accel_factor: f64,
    /// Motion fault when the forward laser reads closer than this.
    #[serde(default = "default_d_safe")]
    pub d_safe: f64,
}

fn default_speed_ratio() -> f64 {
    0.5
}
fn default_window() -> usize {
    5
}
fn default_accel_factor() -> f64 {
    2.0
}
fn default_d_safe() -> f64 {
    2.0
}

impl Default for ReplanConfig {
    fn default() -> Self {
        ReplanConfig {
            speed_ratio: default_speed_ratio(),
            window: default_window(),
            accel_factor: default_accel_factor(),
            d_safe: default_d_safe(),
        }
    }
}

/// Rolling sensor history plus the thresholds derived from the vehicle's
/// nominal motion.
#[derive(Clone, Debug)]
pub struct SupervisionState {
    cfg: ReplanConfig,
    /// Nominal turning acceleration (cruise speed times turn rate per step).
    nominal_turn_accel: f64,
    commanded: VecDeque<f64>,
    measured: VecDeque<f64>,
    lateral: VecDeque<f64>,
    laser: VecDeque<f64>,
}

impl SupervisionState {
    pub fn new(cfg: ReplanConfig, cruise_speed: f64, turn_rate: f64) -> Self {
        SupervisionState {
            cfg,
            nominal_turn_accel: cruise_speed * turn_rate,
            commanded: VecDeque::with_capacity(cfg.window),
            measured: VecDeque::with_capacity(cfg.window),
            lateral: VecDeque::with_capacity(cfg.window),
            laser: VecDeque::with_capacity(cfg.window),
        }
    }

    pub fn accel_threshold(&self) -> f64 {
        self.cfg.accel_factor * self.nominal_turn_accel
    }

    pub fn config(&self) -> &ReplanConfig {
        &self.cfg
    }

    /// Appends one executed control's telemetry, evicting beyond the window.
    pub fn record(&mut self, commanded_speed: f64, frame: &SensorFrame) {
        let push = |buf: &mut VecDeque<f64>, v: f64, cap: usize| {
            if buf.len() == cap {
                buf.pop_front();
            }
            buf.push_back(v);
        };
        push(&mut self.commanded, commanded_speed, self.cfg.window);
        push(&mut self.measured, frame.velocity_measured, self.cfg.window);
        push(&mut self.lateral, frame.imu_accel[1], self.cfg.window);
        push(&mut self.laser, frame.laser_forward, self.cfg.window);
    }

    pub fn samples(&self) -> usize {
        self.measured.len()
    }

    fn mean(buf: &VecDeque<f64>) -> f64 {
        if buf.is_empty() {
            0.0
        } else {
            buf.iter().sum::<f64>() / buf.len() as f64
        }
    }

    /// Sustained mobility loss over a full window.
    pub fn speed_degraded(&self) -> bool {
        if self.measured.len() < self.cfg.window {
            return false;
        }
        let commanded = Self::mean(&self.commanded);
        if commanded <= 0.0 {
            return false;
        }
        Self::mean(&self.measured) / commanded < self.cfg.speed_ratio
    }

    /// Latest lateral acceleration, signed positive to port.
    pub fn latest_lateral(&self) -> f64 {
        self.lateral.back().copied().unwrap_or(0.0)
    }

    pub fn latest_laser(&self) -> f64 {
        self.laser.back().copied().unwrap_or(f64::INFINITY)
    }

    pub fn accel_abnormal(&self) -> bool {
        self.latest_lateral().abs() > self.accel_threshold()
    }

    pub fn obstacle_near(&self) -> bool {
        self.latest_laser() < self.cfg.d_safe
    }
}

/// Produces the flag for the current step. Priority order:
/// done, task fault, motion fault, exhausted heuristic, nominal.
pub fn evaluate(
    sup: &SupervisionState,
    goal_satisfied: bool,
    heuristic_exhausted: bool,
) -> ReplanFlag {
    if goal_satisfied {
        ReplanFlag::Done
    } else if sup.speed_degraded() {
        ReplanFlag::TaskReplan
    } else if sup.accel_abnormal() || sup.obstacle_near() {
        ReplanFlag::MotionReplan
    } else if heuristic_exhausted {
        ReplanFlag::LlmReplan
    } else {
        ReplanFlag::None
    }
}

/// Routes a non-nominal flag to its directive. An abnormal acceleration is
/// answered with a turn to the opposite side; a hot laser with a sidestep
/// (fixed to port so recovery is deterministic).
pub fn dispatch(flag: ReplanFlag, sup: &SupervisionState) -> Result<RecoveryDirective, ReplanError> {
    match flag {
        ReplanFlag::None => Err(ReplanError::NothingToDispatch),
        ReplanFlag::Done => Ok(RecoveryDirective::Finish),
        ReplanFlag::TaskReplan => Ok(RecoveryDirective::AbortToRescue),
        ReplanFlag::LlmReplan => Ok(RecoveryDirective::NewHeuristic),
        ReplanFlag::MotionReplan => {
            if sup.accel_abnormal() {
                let side = if sup.latest_lateral() > 0.0 { Side::Left } else { Side::Right };
                Ok(RecoveryDirective::CorrectiveTurn(side.opposite()))
            } else {
                Ok(RecoveryDirective::AvoidObstacle(Side::Left))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::RAY_GRID_LEN;

    fn frame(velocity: f64, lateral: f64, laser: f64) -> SensorFrame {
        SensorFrame {
            ray_depths: vec![50.0; RAY_GRID_LEN],
            laser_forward: laser,
            imu_accel: [0.0, lateral, 0.0],
            velocity_measured: velocity,
            depth: 10.0,
            collision: false,
            visible_entities: vec![],
        }
    }

    fn sup_with(frames: &[(f64, f64, f64)]) -> SupervisionState {
        let mut sup =
            SupervisionState::new(ReplanConfig::default(), 1.0, 30f64.to_radians());
        for &(v, a, l) in frames {
            sup.record(1.0, &frame(v, a, l));
        }
        sup
    }

    #[test]
    fn sustained_slow_speed_is_a_task_fault() {
        let sup = sup_with(&[(0.4, 0.0, 50.0); 5]);
        assert_eq!(evaluate(&sup, false, false), ReplanFlag::TaskReplan);
        assert_eq!(dispatch(ReplanFlag::TaskReplan, &sup), Ok(RecoveryDirective::AbortToRescue));
    }

    #[test]
    fn momentary_slowdown_is_not_sustained() {
        let sup = sup_with(&[(0.0, 0.0, 50.0)]);
        assert_eq!(evaluate(&sup, false, false), ReplanFlag::None);
    }

    #[test]
    fn leftward_spike_demands_right_turn() {
        let sup = sup_with(&[(1.0, 3.0, 50.0)]);
        assert_eq!(evaluate(&sup, false, false), ReplanFlag::MotionReplan);
        assert_eq!(
            dispatch(ReplanFlag::MotionReplan, &sup),
            Ok(RecoveryDirective::CorrectiveTurn(Side::Right))
        );
    }

    #[test]
    fn rightward_spike_demands_left_turn() {
        let sup = sup_with(&[(1.0, -3.0, 50.0)]);
        assert_eq!(
            dispatch(ReplanFlag::MotionReplan, &sup),
            Ok(RecoveryDirective::CorrectiveTurn(Side::Left))
        );
    }

    #[test]
    fn hot_laser_dispatches_avoidance() {
        let sup = sup_with(&[(1.0, 0.0, 1.5)]);
        assert_eq!(evaluate(&sup, false, false), ReplanFlag::MotionReplan);
        assert_eq!(
            dispatch(ReplanFlag::MotionReplan, &sup),
            Ok(RecoveryDirective::AvoidObstacle(Side::Left))
        );
    }

    #[test]
    fn nominal_run_stays_quiet() {
        let sup = sup_with(&[(1.0, 0.0, 50.0); 5]);
        assert_eq!(evaluate(&sup, false, false), ReplanFlag::None);
    }

    #[test]
    fn exhausted_heuristic_asks_for_a_new_one() {
        let sup = sup_with(&[(1.0, 0.0, 50.0); 5]);
        assert_eq!(evaluate(&sup, false, true), ReplanFlag::LlmReplan);
        assert_eq!(dispatch(ReplanFlag::LlmReplan, &sup), Ok(RecoveryDirective::NewHeuristic));
    }

    #[test]
    fn done_wins_over_everything() {
        // Slow, shoved sideways, laser hot, heuristic exhausted: still done.
        let sup = sup_with(&[(0.1, 5.0, 0.5); 5]);
        assert_eq!(evaluate(&sup, true, true), ReplanFlag::Done);
        assert_eq!(dispatch(ReplanFlag::Done, &sup), Ok(RecoveryDirective::Finish));
    }

    #[test]
    fn task_beats_motion_beats_llm() {
        let sup = sup_with(&[(0.1, 5.0, 0.5); 5]);
        assert_eq!(evaluate(&sup, false, true), ReplanFlag::TaskReplan);
        let sup = sup_with(&[(1.0, 5.0, 0.5); 5]);
        assert_eq!(evaluate(&sup, false, true), ReplanFlag::MotionReplan);
    }

    #[test]
    fn dispatching_nominal_is_a_contract_violation() {
        let sup = sup_with(&[(1.0, 0.0, 50.0)]);
        assert_eq!(dispatch(ReplanFlag::None, &sup), Err(ReplanError::NothingToDispatch));
    }

    #[test]
    fn quiescence_under_in_threshold_noise() {
        // Fuzz within thresholds: speed ratio above 0.5, accel under the
        // threshold, laser beyond d_safe.
        let mut seed = 0x1234_5678_u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as f64 / (1u64 << 31) as f64
        };
        let mut sup =
            SupervisionState::new(ReplanConfig::default(), 1.0, 30f64.to_radians());
        let thresh = sup.accel_threshold();
        for _ in 0..500 {
            let v = 0.6 + 0.4 * next();
            let a = (next() * 2.0 - 1.0) * 0.95 * thresh;
            let l = 2.1 + 40.0 * next();
            sup.record(1.0, &frame(v, a, l));
            assert_eq!(evaluate(&sup, false, false), ReplanFlag::None);
        }
    }

    #[test]
    fn directive_levels_match_flags() {
        assert_eq!(RecoveryDirective::AbortToRescue.level(), ReplanFlag::TaskReplan);
        assert_eq!(RecoveryDirective::CorrectiveTurn(Side::Right).level(), ReplanFlag::MotionReplan);
        assert_eq!(RecoveryDirective::AvoidObstacle(Side::Left).level(), ReplanFlag::MotionReplan);
        assert_eq!(RecoveryDirective::NewHeuristic.level(), ReplanFlag::LlmReplan);
        assert_eq!(RecoveryDirective::Finish.level(), ReplanFlag::Done);
    }
}
