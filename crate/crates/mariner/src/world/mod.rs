//! Deterministic discrete-time ocean world: terrain, semantic entities,
//! vehicle kinematics, sensors, and fault injection.
//!
//! Stepping is pure state evolution: equal configuration, seed, and control
//! sequence give bit-identical worlds and sensor frames. All randomness is
//! confined to terrain generation, which is seeded.

pub mod config;
pub mod terrain;

pub use config::{spawn_world, WorldConfig};
pub use terrain::{wrap_angle, Heightfield, Vec3};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use terrain::{add, normalize, ray_sphere, ray_surface, scale, sub};

/// Rays per side of the forward depth grid.
pub const RAY_GRID_SIDE: usize = 5;
/// Total rays in the forward depth grid.
pub const RAY_GRID_LEN: usize = RAY_GRID_SIDE * RAY_GRID_SIDE;
/// Horizontal ray offsets, left to right (positive bearing is starboard).
pub const RAY_BEARINGS_DEG: [f64; RAY_GRID_SIDE] = [-30.0, -15.0, 0.0, 15.0, 30.0];
/// Vertical ray offsets, top row first.
pub const RAY_ELEVATIONS_DEG: [f64; RAY_GRID_SIDE] = [20.0, 10.0, 0.0, -10.0, -20.0];

/// Continuous pose and speed of the vehicle.
///
/// `z` is never positive: zero means surfaced. Angles are radians in
/// [-pi, pi); yaw is measured counterclockwise from +x in the horizontal
/// plane, pitch is positive nose-up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuvState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub speed: f64,
}

impl AuvState {
    pub fn position(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    /// Unit vector along the current heading and pitch.
    pub fn forward(&self) -> Vec3 {
        [
            self.pitch.cos() * self.yaw.cos(),
            self.pitch.cos() * self.yaw.sin(),
            self.pitch.sin(),
        ]
    }

    /// Body-frame lateral axis, positive to port (left).
    pub fn left(&self) -> Vec3 {
        [-self.yaw.sin(), self.yaw.cos(), 0.0]
    }
}

/// Commanded heading and pitch, both absolute targets the vehicle turns
/// toward at its bounded rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub heading: f64,
    pub pitch_cmd: f64,
}

/// The four primitive motions available to the motion planner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlPrimitive {
    TurnLeft,
    TurnRight,
    MoveForward,
    MoveUp,
}

impl ControlPrimitive {
    pub const ALL: [ControlPrimitive; 4] = [
        ControlPrimitive::TurnLeft,
        ControlPrimitive::TurnRight,
        ControlPrimitive::MoveForward,
        ControlPrimitive::MoveUp,
    ];

    pub fn index(self) -> usize {
        match self {
            ControlPrimitive::TurnLeft => 0,
            ControlPrimitive::TurnRight => 1,
            ControlPrimitive::MoveForward => 2,
            ControlPrimitive::MoveUp => 3,
        }
    }

    /// Fixed mapping onto a [`ControlInput`] relative to the current pose:
    /// turns offset the heading by the turn rate, `MoveUp` pitches up for one
    /// step, `MoveForward` holds heading at level pitch.
    pub fn to_control(self, pose: &AuvState, turn_rate: f64, max_pitch: f64) -> ControlInput {
        match self {
            ControlPrimitive::TurnLeft => {
                ControlInput { heading: wrap_angle(pose.yaw + turn_rate), pitch_cmd: 0.0 }
            }
            ControlPrimitive::TurnRight => {
                ControlInput { heading: wrap_angle(pose.yaw - turn_rate), pitch_cmd: 0.0 }
            }
            ControlPrimitive::MoveForward => {
                ControlInput { heading: pose.yaw, pitch_cmd: 0.0 }
            }
            ControlPrimitive::MoveUp => {
                ControlInput { heading: pose.yaw, pitch_cmd: max_pitch }
            }
        }
    }
}

/// Semantic classes: three object classes that occupy space and three
/// landscape classes that only mark terrain features for perception.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityClass {
    CoralReef,
    Glider,
    Warship,
    Canyon,
    Hill,
    Plain,
}

impl EntityClass {
    pub fn is_landscape(self) -> bool {
        matches!(self, EntityClass::Canyon | EntityClass::Hill | EntityClass::Plain)
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityClass::CoralReef => "coral_reef",
            EntityClass::Glider => "glider",
            EntityClass::Warship => "warship",
            EntityClass::Canyon => "canyon",
            EntityClass::Hill => "hill",
            EntityClass::Plain => "plain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "coral_reef" => EntityClass::CoralReef,
            "glider" => EntityClass::Glider,
            "warship" => EntityClass::Warship,
            "canyon" => EntityClass::Canyon,
            "hill" => EntityClass::Hill,
            "plain" => EntityClass::Plain,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub class: EntityClass,
    pub position: Vec3,
    pub radius: f64,
}

impl Entity {
    /// Landscape markers are part of the terrain: they never collide and do
    /// not register on range sensors.
    pub fn is_solid(&self) -> bool {
        !self.class.is_landscape()
    }
}

/// Ground-truth visibility record consumed only by perception.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleEntity {
    pub id: String,
    pub class: EntityClass,
    /// Radians, positive to starboard (right of heading).
    pub bearing: f64,
    /// Radians, positive above the horizontal plane.
    pub elevation: f64,
    pub range: f64,
}

/// One sensor sweep. Produced by every [`World::step`] and by
/// [`World::observe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// Row-major 5x5 forward depth grid, top row first, left to right.
    pub ray_depths: Vec<f64>,
    pub laser_forward: f64,
    pub imu_accel: Vec3,
    pub velocity_measured: f64,
    /// Depth below the surface in meters (a pressure sensor; positive down).
    pub depth: f64,
    pub collision: bool,
    pub visible_entities: Vec<VisibleEntity>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Scales effective speed by `magnitude` (< 1 slows the vehicle).
    SpeedDegradation,
    /// Constant port-side (leftward) acceleration of `magnitude` m/s^2.
    LateralPush,
    /// Spawns a solid glider `magnitude` meters ahead at activation.
    ObstacleSpawn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub kind: FaultKind,
    pub magnitude: f64,
    pub start_step: u64,
    pub end_step: u64,
    /// Fixed world position of a spawned obstacle, set at activation.
    #[serde(default)]
    pub materialized: Option<Vec3>,
}

impl Fault {
    pub fn new(kind: FaultKind, magnitude: f64, start_step: u64, end_step: u64) -> Self {
        Fault { kind, magnitude, start_step, end_step, materialized: None }
    }

    pub fn active_at(&self, step: u64) -> bool {
        step >= self.start_step && step <= self.end_step
    }
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("entity `{0}` lies outside the world bounds")]
    EntityOutOfBounds(String),
    #[error("entity `{0}` is buried inside the terrain")]
    EntityInsideTerrain(String),
    #[error("vehicle start pose is invalid: {0}")]
    BadStartPose(String),
    #[error("overlapping {0:?} faults: windows intersect")]
    OverlappingFaults(FaultKind),
    #[error("fault window is empty (start > end)")]
    EmptyFaultWindow,
    #[error("fault magnitude must be positive, got {0}")]
    NonPositiveMagnitude(f64),
    #[error("duplicate entity id `{0}`")]
    DuplicateEntityId(String),
    #[error("unknown entity class `{0}`")]
    UnknownClass(String),
}

/// Axis-aligned world bounds in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Sensor geometry shared by the ray grid, the laser, and visibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub max_range: f64,
    pub view_range: f64,
    pub view_half_angle: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            max_range: 50.0,
            view_range: 60.0,
            view_half_angle: 60f64.to_radians(),
        }
    }
}

/// Vehicle geometry and maneuvering limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleConfig {
    pub radius: f64,
    /// Max yaw/pitch change per step, radians.
    pub turn_rate: f64,
    pub max_pitch: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig {
            radius: 0.5,
            turn_rate: 30f64.to_radians(),
            max_pitch: 20f64.to_radians(),
        }
    }
}

/// Simulation time step in seconds.
pub const DT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub bounds: Bounds,
    pub terrain: Heightfield,
    pub entities: Vec<Entity>,
    pub auv: AuvState,
    pub time_step: u64,
    pub rng_seed: u64,
    pub active_faults: Vec<Fault>,
    pub sensors: SensorConfig,
    pub vehicle: VehicleConfig,
    last_velocity: f64,
    last_accel: Vec3,
    last_collision: bool,
}

impl World {
    pub fn new(
        bounds: Bounds,
        terrain: Heightfield,
        entities: Vec<Entity>,
        auv: AuvState,
        rng_seed: u64,
        sensors: SensorConfig,
        vehicle: VehicleConfig,
    ) -> Self {
        let speed = auv.speed;
        World {
            bounds,
            terrain,
            entities,
            auv,
            time_step: 0,
            rng_seed,
            active_faults: Vec::new(),
            sensors,
            vehicle,
            last_velocity: speed,
            last_accel: [0.0, 0.0, 0.0],
            last_collision: false,
        }
    }

    /// Appends a fault. Windows of the same kind must not overlap.
    pub fn inject_fault(&mut self, fault: Fault) -> Result<(), WorldError> {
        if fault.start_step > fault.end_step {
            return Err(WorldError::EmptyFaultWindow);
        }
        if fault.magnitude <= 0.0 {
            return Err(WorldError::NonPositiveMagnitude(fault.magnitude));
        }
        for existing in &self.active_faults {
            if existing.kind == fault.kind
                && fault.start_step <= existing.end_step
                && existing.start_step <= fault.end_step
            {
                return Err(WorldError::OverlappingFaults(fault.kind));
            }
        }
        self.active_faults.push(fault);
        Ok(())
    }

    fn speed_factor(&self, step: u64) -> f64 {
        self.active_faults
            .iter()
            .filter(|f| f.kind == FaultKind::SpeedDegradation && f.active_at(step))
            .map(|f| f.magnitude)
            .product()
    }

    fn lateral_push(&self, step: u64) -> f64 {
        self.active_faults
            .iter()
            .filter(|f| f.kind == FaultKind::LateralPush && f.active_at(step))
            .map(|f| f.magnitude)
            .sum()
    }

    /// Spheres that currently occupy space: solid entities plus any
    /// materialized obstacle faults.
    fn solid_spheres(&self, step: u64) -> Vec<(Vec3, f64)> {
        let mut out: Vec<(Vec3, f64)> = self
            .entities
            .iter()
            .filter(|e| e.is_solid())
            .map(|e| (e.position, e.radius))
            .collect();
        for f in &self.active_faults {
            if f.kind == FaultKind::ObstacleSpawn && f.active_at(step) {
                if let Some(p) = f.materialized {
                    out.push((p, OBSTACLE_RADIUS));
                }
            }
        }
        out
    }

    /// Advances one step under the control input and returns the new frame.
    pub fn step(&mut self, u: ControlInput) -> SensorFrame {
        let step = self.time_step;
        // Materialize obstacle faults that activate this step.
        let forward = self.auv.forward();
        let pos = self.auv.position();
        for f in &mut self.active_faults {
            if f.kind == FaultKind::ObstacleSpawn && f.active_at(step) && f.materialized.is_none() {
                f.materialized =
                    Some(add(pos, scale(forward, f.magnitude + OBSTACLE_RADIUS)));
            }
        }

        // Attitude moves toward the command at the bounded rate.
        let rate = self.vehicle.turn_rate;
        let yaw_err = wrap_angle(u.heading - self.auv.yaw);
        let yaw_delta = yaw_err.clamp(-rate, rate);
        self.auv.yaw = wrap_angle(self.auv.yaw + yaw_delta);
        let pitch_target = u.pitch_cmd.clamp(-self.vehicle.max_pitch, self.vehicle.max_pitch);
        let pitch_err = pitch_target - self.auv.pitch;
        self.auv.pitch = self.auv.pitch + pitch_err.clamp(-rate, rate);

        // Translation along the new attitude, scaled by any speed fault.
        let eff_speed = self.auv.speed * self.speed_factor(step);
        let heading_dir = self.auv.forward();
        let mut displacement = scale(heading_dir, eff_speed * DT);
        let push = self.lateral_push(step);
        if push != 0.0 {
            displacement = add(displacement, scale(self.auv.left(), 0.5 * push * DT * DT));
        }
        let mut candidate = add(self.auv.position(), displacement);
        // Surfacing clamps to z = 0 without counting as a collision.
        if candidate[2] > 0.0 {
            candidate[2] = 0.0;
        }

        let r = self.vehicle.radius;
        let mut collision = false;
        if candidate[0] < self.bounds.min[0] + r
            || candidate[0] > self.bounds.max[0] - r
            || candidate[1] < self.bounds.min[1] + r
            || candidate[1] > self.bounds.max[1] - r
        {
            collision = true;
        }
        if !collision && candidate[2] - r < self.terrain.height_at(candidate[0], candidate[1]) {
            collision = true;
        }
        if !collision {
            for (center, radius) in self.solid_spheres(step) {
                let d = terrain::norm(sub(candidate, center));
                if d < r + radius {
                    collision = true;
                    break;
                }
            }
        }

        let moved = if collision {
            0.0
        } else {
            let d = displacement;
            self.auv.x = candidate[0];
            self.auv.y = candidate[1];
            self.auv.z = candidate[2];
            terrain::norm(d) / DT
        };

        // IMU: centripetal acceleration from the executed turn plus any push.
        let lateral = eff_speed * yaw_delta / DT + push;
        self.last_accel = [0.0, lateral, 0.0];
        self.last_velocity = moved;
        self.last_collision = collision;
        self.time_step += 1;
        self.observe()
    }

    /// Builds the sensor frame for the current state without advancing time.
    pub fn observe(&self) -> SensorFrame {
        let pose = self.auv;
        SensorFrame {
            ray_depths: self.ray_grid(&pose),
            laser_forward: self.cast_ray(pose.position(), pose.forward()),
            imu_accel: self.last_accel,
            velocity_measured: self.last_velocity,
            depth: -pose.z,
            collision: self.last_collision,
            visible_entities: self.visible_ground_truth(&pose),
        }
    }

    /// Casts one normalized ray against terrain, surface, and solid spheres.
    pub fn cast_ray(&self, origin: Vec3, dir: Vec3) -> f64 {
        let dir = normalize(dir);
        let max = self.sensors.max_range;
        let mut best = max;
        if let Some(t) = self.terrain.ray(origin, dir, max) {
            best = best.min(t);
        }
        if let Some(t) = ray_surface(origin, dir, max) {
            best = best.min(t);
        }
        for (center, radius) in self.solid_spheres(self.time_step) {
            if let Some(t) = ray_sphere(origin, dir, center, radius, max) {
                best = best.min(t);
            }
        }
        best
    }

    /// The forward 5x5 depth grid for an arbitrary pose, row-major from the
    /// top-left (up-left) ray.
    pub fn ray_grid(&self, pose: &AuvState) -> Vec<f64> {
        let mut out = Vec::with_capacity(RAY_GRID_LEN);
        for elev_deg in RAY_ELEVATIONS_DEG {
            for bearing_deg in RAY_BEARINGS_DEG {
                let yaw = pose.yaw - bearing_deg.to_radians();
                let pitch = pose.pitch + elev_deg.to_radians();
                let dir = [pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin()];
                out.push(self.cast_ray(pose.position(), dir));
            }
        }
        out
    }

    /// Entities inside the view cone and range, unoccluded by terrain.
    pub fn visible_ground_truth(&self, pose: &AuvState) -> Vec<VisibleEntity> {
        let mut out = Vec::new();
        let eye = pose.position();
        let mut candidates: Vec<(String, EntityClass, Vec3, f64)> = self
            .entities
            .iter()
            .map(|e| (e.id.clone(), e.class, e.position, e.radius))
            .collect();
        for (i, f) in self.active_faults.iter().enumerate() {
            if f.kind == FaultKind::ObstacleSpawn && f.active_at(self.time_step) {
                if let Some(p) = f.materialized {
                    candidates.push((format!("fault_obstacle_{i}"), EntityClass::Glider, p, OBSTACLE_RADIUS));
                }
            }
        }
        for (id, class, position, radius) in candidates {
            let rel = sub(position, eye);
            let range = terrain::norm(rel);
            if range > self.sensors.view_range || range < 1e-9 {
                continue;
            }
            let azimuth = rel[1].atan2(rel[0]);
            let bearing = wrap_angle(pose.yaw - azimuth);
            if bearing.abs() > self.sensors.view_half_angle {
                continue;
            }
            let horizontal = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
            let elevation = rel[2].atan2(horizontal);
            // Occlusion: terrain blocking the line of sight before the body.
            let dir = normalize(rel);
            if let Some(t) = self.terrain.ray(eye, dir, range) {
                if t < range - radius - 1e-6 {
                    continue;
                }
            }
            out.push(VisibleEntity { id, class, bearing, elevation, range });
        }
        out
    }
}

/// Radius of obstacles spawned by [`FaultKind::ObstacleSpawn`].
pub const OBSTACLE_RADIUS: f64 = 0.5;
