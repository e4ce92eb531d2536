//! World configuration documents.
//!
//! A `WorldConfig` is a JSON file with the keys `bounds`,
//! `terrain{seed, cell_size, region_labels}`, `entities[]`, and
//! `auv{start_pose, speed}`. Sensor and vehicle blocks are optional and take
//! defaults. See `docs/formats.md` in the repository for the full schema.

use serde::{Deserialize, Serialize};

use super::terrain::{Heightfield, RegionLabel};
use super::{
    AuvState, Bounds, Entity, EntityClass, SensorConfig, VehicleConfig, World, WorldError,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TerrainConfig {
    pub seed: u64,
    pub cell_size: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_noise_amplitude")]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub region_labels: Vec<RegionLabel>,
}

fn default_floor() -> f64 {
    -30.0
}

fn default_noise_amplitude() -> f64 {
    1.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntityConfig {
    pub id: String,
    pub class: String,
    pub position: [f64; 3],
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default)]
    pub roll: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuvConfig {
    pub start_pose: StartPose,
    #[serde(default = "default_speed")]
    pub speed: f64,
}

fn default_speed() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensorConfigDoc {
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default = "default_view_range")]
    pub view_range: f64,
    #[serde(default = "default_view_half_angle_deg")]
    pub view_half_angle_deg: f64,
}

fn default_max_range() -> f64 {
    50.0
}
fn default_view_range() -> f64 {
    60.0
}
fn default_view_half_angle_deg() -> f64 {
    60.0
}

impl Default for SensorConfigDoc {
    fn default() -> Self {
        SensorConfigDoc {
            max_range: default_max_range(),
            view_range: default_view_range(),
            view_half_angle_deg: default_view_half_angle_deg(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VehicleConfigDoc {
    #[serde(default = "default_vehicle_radius")]
    pub radius: f64,
    #[serde(default = "default_turn_rate_deg")]
    pub turn_rate_deg: f64,
    #[serde(default = "default_max_pitch_deg")]
    pub max_pitch_deg: f64,
}

fn default_vehicle_radius() -> f64 {
    0.5
}
fn default_turn_rate_deg() -> f64 {
    30.0
}
fn default_max_pitch_deg() -> f64 {
    20.0
}

impl Default for VehicleConfigDoc {
    fn default() -> Self {
        VehicleConfigDoc {
            radius: default_vehicle_radius(),
            turn_rate_deg: default_turn_rate_deg(),
            max_pitch_deg: default_max_pitch_deg(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldConfig {
    pub bounds: Bounds,
    pub terrain: TerrainConfig,
    #[serde(default)]
    pub entities: Vec<EntityConfig>,
    pub auv: AuvConfig,
    #[serde(default)]
    pub sensors: SensorConfigDoc,
    #[serde(default)]
    pub vehicle: VehicleConfigDoc,
}

impl WorldConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Builds the deterministic world described by `config`. The same
/// (config, seed) pair always yields an identical world.
pub fn spawn_world(config: &WorldConfig, seed: u64) -> Result<World, WorldError> {
    let size = [
        config.bounds.max[0] - config.bounds.min[0],
        config.bounds.max[1] - config.bounds.min[1],
    ];
    let terrain = Heightfield::generate(
        config.terrain.seed,
        [config.bounds.min[0], config.bounds.min[1]],
        size,
        config.terrain.cell_size,
        config.terrain.floor,
        config.terrain.noise_amplitude,
        &config.terrain.region_labels,
    );

    let mut entities: Vec<Entity> = Vec::with_capacity(config.entities.len());
    for e in &config.entities {
        let class = EntityClass::parse(&e.class)
            .ok_or_else(|| WorldError::UnknownClass(e.class.clone()))?;
        if entities.iter().any(|prev| prev.id == e.id) {
            return Err(WorldError::DuplicateEntityId(e.id.clone()));
        }
        if !config.bounds.contains(e.position) {
            return Err(WorldError::EntityOutOfBounds(e.id.clone()));
        }
        if e.position[2] < terrain.height_at(e.position[0], e.position[1]) {
            return Err(WorldError::EntityInsideTerrain(e.id.clone()));
        }
        entities.push(Entity { id: e.id.clone(), class, position: e.position, radius: e.radius });
    }

    let sp = &config.auv.start_pose;
    let auv = AuvState {
        x: sp.x,
        y: sp.y,
        z: sp.z,
        roll: sp.roll,
        pitch: sp.pitch,
        yaw: sp.yaw,
        speed: config.auv.speed,
    };
    if !config.bounds.contains(auv.position()) {
        return Err(WorldError::BadStartPose("outside world bounds".into()));
    }
    if auv.z - config.vehicle.radius < terrain.height_at(auv.x, auv.y) {
        return Err(WorldError::BadStartPose("inside terrain".into()));
    }

    Ok(World::new(
        config.bounds,
        terrain,
        entities,
        auv,
        seed,
        SensorConfig {
            max_range: config.sensors.max_range,
            view_range: config.sensors.view_range,
            view_half_angle: config.sensors.view_half_angle_deg.to_radians(),
        },
        VehicleConfig {
            radius: config.vehicle.radius,
            turn_rate: config.vehicle.turn_rate_deg.to_radians(),
            max_pitch: config.vehicle.max_pitch_deg.to_radians(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_config_json(entity_pos: [f64; 3]) -> String {
        format!(
            r#"{{
  "bounds": {{"min": [0, 0, -30], "max": [200, 200, 0]}},
  "terrain": {{"seed": 7, "cell_size": 2.0, "region_labels": []}},
  "entities": [
    {{"id": "warship", "class": "warship", "position": [{}, {}, {}], "radius": 3.0}},
    {{"id": "glider", "class": "glider", "position": [60, 140, -12], "radius": 1.0}},
    {{"id": "reef", "class": "coral_reef", "position": [150, 40, -6], "radius": 5.0}}
  ],
  "auv": {{"start_pose": {{"x": 20, "y": 20, "z": -10}}, "speed": 1.0}}
}}"#,
            entity_pos[0], entity_pos[1], entity_pos[2]
        )
    }

    #[test]
    fn spawns_configured_entities() {
        let cfg = WorldConfig::from_json(&demo_config_json([120.0, 80.0, -15.0])).unwrap();
        let world = spawn_world(&cfg, 42).unwrap();
        let classes: Vec<EntityClass> = world.entities.iter().map(|e| e.class).collect();
        assert!(classes.contains(&EntityClass::Warship));
        assert!(classes.contains(&EntityClass::Glider));
        assert!(classes.contains(&EntityClass::CoralReef));
    }

    #[test]
    fn empty_entity_list_is_fine() {
        let mut cfg = WorldConfig::from_json(&demo_config_json([120.0, 80.0, -15.0])).unwrap();
        cfg.entities.clear();
        let world = spawn_world(&cfg, 1).unwrap();
        assert!(world.entities.is_empty());
    }

    #[test]
    fn same_config_and_seed_serialize_identically() {
        let cfg = WorldConfig::from_json(&demo_config_json([120.0, 80.0, -15.0])).unwrap();
        let a = serde_json::to_vec(&spawn_world(&cfg, 42).unwrap()).unwrap();
        let b = serde_json::to_vec(&spawn_world(&cfg, 42).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_entity_ids_rejected() {
        let mut cfg = WorldConfig::from_json(&demo_config_json([120.0, 80.0, -15.0])).unwrap();
        let dup = cfg.entities[0].clone();
        cfg.entities.push(dup);
        assert!(matches!(spawn_world(&cfg, 1), Err(WorldError::DuplicateEntityId(_))));
    }

    #[test]
    fn out_of_bounds_entity_is_a_config_error() {
        let cfg = WorldConfig::from_json(&demo_config_json([500.0, 80.0, -15.0])).unwrap();
        assert!(matches!(spawn_world(&cfg, 42), Err(WorldError::EntityOutOfBounds(_))));
    }

    #[test]
    fn buried_entity_is_a_config_error() {
        let cfg = WorldConfig::from_json(&demo_config_json([120.0, 80.0, -40.0])).unwrap();
        assert!(matches!(spawn_world(&cfg, 42), Err(WorldError::EntityOutOfBounds(_)) | Err(WorldError::EntityInsideTerrain(_))));
    }
}
