//! Perception stand-in: turns sensor frames into text descriptors and
//! discretized relative positions, the way the vision side of the stack
//! would describe the scene to the semantic planner.
//!
//! Everything here is a pure function of the frame plus an explicit random
//! source; with noise disabled the output is fully determined by the frame.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{EntityClass, SensorFrame, RAY_GRID_SIDE};

/// Angular half-width of the `front`/`center` bucket.
pub const BUCKET_HALF_WIDTH_DEG: f64 = 10.0;
/// Range at or under which a target counts as close.
pub const CLOSE_THRESHOLD: f64 = 5.0;
/// Shallower than this (meters below surface) reads as sunlit.
pub const SUNLIT_DEPTH: f64 = 8.0;
/// Deeper than this reads as dark.
pub const DARK_DEPTH: f64 = 20.0;

/// Coarse direction of a described subject relative to the heading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Front,
    Above,
    Below,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Front => "front",
            Direction::Above => "above",
            Direction::Below => "below",
        }
    }
}

/// Discretized relative position of a tracked target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelPos {
    Close,
    LeftFar,
    RightFar,
    CenterFar,
    TopFar,
    BottomFar,
}

/// A textual observation of one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextDescriptor {
    pub text: String,
    pub subject_class: EntityClass,
    pub direction: Direction,
    pub confidence: f64,
    /// Estimated world-frame depth of the subject, when derivable. Lets the
    /// scorer place evidence in the right depth band.
    pub subject_z: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Probability a descriptor is dropped entirely.
    #[serde(default)]
    pub p_miss: f64,
    /// Probability a descriptor's subject class is swapped.
    #[serde(default)]
    pub p_confuse: f64,
}

impl NoiseConfig {
    pub fn enabled(&self) -> bool {
        self.p_miss > 0.0 || self.p_confuse > 0.0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PerceptionError {
    #[error("target `{0}` is not visible")]
    NotVisible(String),
}

/// Buckets a (bearing, elevation) pair; bearing takes precedence.
fn direction_of(bearing: f64, elevation: f64) -> Direction {
    let half = BUCKET_HALF_WIDTH_DEG.to_radians();
    if bearing < -half {
        Direction::Left
    } else if bearing > half {
        Direction::Right
    } else if elevation > half {
        Direction::Above
    } else if elevation < -half {
        Direction::Below
    } else {
        Direction::Front
    }
}

fn class_phrase(class: EntityClass) -> &'static str {
    match class {
        EntityClass::CoralReef => "coral reef",
        EntityClass::Glider => "glider",
        EntityClass::Warship => "warship",
        EntityClass::Canyon => "canyon",
        EntityClass::Hill => "rocky hill",
        EntityClass::Plain => "plain",
    }
}

/// Light clause appended to landscape descriptors so knowledge matching has
/// words to latch onto.
fn brightness_clause(subject_z: f64) -> &'static str {
    if subject_z > -SUNLIT_DEPTH {
        ", bright with ample sunlight"
    } else if subject_z < -DARK_DEPTH {
        ", in dark water"
    } else {
        ""
    }
}

fn descriptor_text(class: EntityClass, direction: Direction, subject_z: Option<f64>) -> String {
    let base = format!("a {} on the {}", class_phrase(class), direction.name());
    match subject_z {
        Some(z) if class.is_landscape() => format!("{base}{}", brightness_clause(z)),
        _ => base,
    }
}

/// Classifies the overall landscape from the forward depth grid: open water
/// reads as a plain, near walls on both flanks as a canyon, anything else as
/// a hill.
fn grid_landscape(frame: &SensorFrame, max_range: f64) -> EntityClass {
    let depths = &frame.ray_depths;
    let n = depths.len();
    let hits = depths.iter().filter(|&&d| d < max_range * 0.98).count();
    if hits * 5 <= n {
        return EntityClass::Plain;
    }
    let col_mean = |c: usize| -> f64 {
        (0..RAY_GRID_SIDE).map(|r| depths[r * RAY_GRID_SIDE + c]).sum::<f64>()
            / RAY_GRID_SIDE as f64
    };
    let left = col_mean(0);
    let center = col_mean(RAY_GRID_SIDE / 2);
    let right = col_mean(RAY_GRID_SIDE - 1);
    if left < center && right < center {
        EntityClass::Canyon
    } else {
        EntityClass::Hill
    }
}

/// One descriptor per visible entity, plus a descriptor for the dominant
/// landscape read off the ray grid when no landscape entity is in view.
///
/// With noise enabled each descriptor is independently dropped with
/// probability `p_miss` and has its class swapped with probability
/// `p_confuse`.
pub fn describe_view<R: Rng>(
    frame: &SensorFrame,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Vec<TextDescriptor> {
    let mut out = Vec::new();
    let confidence = if noise.enabled() { 1.0 - noise.p_confuse } else { 1.0 };
    for seen in &frame.visible_entities {
        let mut class = seen.class;
        if noise.enabled() {
            if rng.gen::<f64>() < noise.p_miss {
                continue;
            }
            if rng.gen::<f64>() < noise.p_confuse {
                let others: Vec<EntityClass> = [
                    EntityClass::CoralReef,
                    EntityClass::Glider,
                    EntityClass::Warship,
                    EntityClass::Canyon,
                    EntityClass::Hill,
                    EntityClass::Plain,
                ]
                .into_iter()
                .filter(|c| *c != class)
                .collect();
                class = others[rng.gen_range(0..others.len())];
            }
        }
        let direction = direction_of(seen.bearing, seen.elevation);
        let subject_z = -frame.depth + seen.range * seen.elevation.sin();
        out.push(TextDescriptor {
            text: descriptor_text(class, direction, Some(subject_z)),
            subject_class: class,
            direction,
            confidence,
            subject_z: Some(subject_z),
        });
    }
    if !out.iter().any(|d| d.subject_class.is_landscape()) && !frame.ray_depths.is_empty() {
        let max_range = frame.ray_depths.iter().cloned().fold(0.0, f64::max).max(1e-9);
        let class = grid_landscape(frame, max_range);
        let keep = !noise.enabled() || rng.gen::<f64>() >= noise.p_miss;
        if keep {
            out.push(TextDescriptor {
                text: descriptor_text(class, Direction::Front, Some(-frame.depth)),
                subject_class: class,
                direction: Direction::Front,
                confidence,
                subject_z: Some(-frame.depth),
            });
        }
    }
    out
}

/// Discretizes the position of a tracked target. Close wins over every far
/// bucket; among the far buckets, bearing wins over elevation.
pub fn classify_relative_position(
    frame: &SensorFrame,
    target_id: &str,
) -> Result<RelPos, PerceptionError> {
    let seen = frame
        .visible_entities
        .iter()
        .find(|e| e.id == target_id)
        .ok_or_else(|| PerceptionError::NotVisible(target_id.to_string()))?;
    if seen.range <= CLOSE_THRESHOLD {
        return Ok(RelPos::Close);
    }
    Ok(match direction_of(seen.bearing, seen.elevation) {
        Direction::Left => RelPos::LeftFar,
        Direction::Right => RelPos::RightFar,
        Direction::Front => RelPos::CenterFar,
        Direction::Above => RelPos::TopFar,
        Direction::Below => RelPos::BottomFar,
    })
}

/// True iff some descriptor reports the target class.
pub fn detect_target(descriptors: &[TextDescriptor], target: EntityClass) -> bool {
    descriptors.iter().any(|d| d.subject_class == target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::VisibleEntity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame_with(entities: Vec<VisibleEntity>) -> SensorFrame {
        SensorFrame {
            ray_depths: vec![50.0; 25],
            laser_forward: 50.0,
            imu_accel: [0.0, 0.0, 0.0],
            velocity_measured: 1.0,
            depth: 10.0,
            collision: false,
            visible_entities: entities,
        }
    }

    fn seen(id: &str, class: EntityClass, bearing_deg: f64, elev_deg: f64, range: f64) -> VisibleEntity {
        VisibleEntity {
            id: id.into(),
            class,
            bearing: bearing_deg.to_radians(),
            elevation: elev_deg.to_radians(),
            range,
        }
    }

    #[test]
    fn hill_left_reads_as_rocky_hill_on_the_left() {
        let frame = frame_with(vec![seen("hill1", EntityClass::Hill, -40.0, 0.0, 30.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = describe_view(&frame, &NoiseConfig::default(), &mut rng);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].text, "a rocky hill on the left");
        assert_eq!(ds[0].direction, Direction::Left);
    }

    #[test]
    fn shallow_plain_gets_the_sunlight_clause() {
        // Elevation raises the subject near the surface: z = -10 + 30*sin(17deg) ~ -1.2.
        let frame = frame_with(vec![seen("p", EntityClass::Plain, 0.0, 17.0, 30.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = describe_view(&frame, &NoiseConfig::default(), &mut rng);
        assert!(ds[0].text.contains("ample sunlight"), "text: {}", ds[0].text);
    }

    #[test]
    fn warship_front_is_confident_and_centered() {
        let frame = frame_with(vec![seen("warship", EntityClass::Warship, 0.0, 0.0, 20.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = describe_view(&frame, &NoiseConfig::default(), &mut rng);
        let warship = ds.iter().find(|d| d.subject_class == EntityClass::Warship).unwrap();
        assert_eq!(warship.direction, Direction::Front);
        assert_eq!(warship.confidence, 1.0);
    }

    #[test]
    fn empty_frame_yields_grid_descriptor_only() {
        // No visible entities: the ray grid still characterizes the scene.
        let frame = frame_with(vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = describe_view(&frame, &NoiseConfig::default(), &mut rng);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].subject_class, EntityClass::Plain);
    }

    #[test]
    fn noise_free_description_is_pure() {
        let frame = frame_with(vec![
            seen("warship", EntityClass::Warship, 5.0, 0.0, 25.0),
            seen("glider", EntityClass::Glider, 45.0, 0.0, 30.0),
        ]);
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(999);
        let a = describe_view(&frame, &NoiseConfig::default(), &mut rng_a);
        let b = describe_view(&frame, &NoiseConfig::default(), &mut rng_b);
        assert_eq!(a, b);
    }

    #[test]
    fn close_target_classifies_close() {
        let frame = frame_with(vec![seen("glider", EntityClass::Glider, 0.0, 0.0, 2.0)]);
        assert_eq!(classify_relative_position(&frame, "glider"), Ok(RelPos::Close));
    }

    #[test]
    fn far_right_target_classifies_right_far() {
        let frame = frame_with(vec![seen("glider", EntityClass::Glider, 45.0, 0.0, 30.0)]);
        assert_eq!(classify_relative_position(&frame, "glider"), Ok(RelPos::RightFar));
    }

    #[test]
    fn centered_far_target_classifies_center_far() {
        let frame = frame_with(vec![seen("t", EntityClass::Warship, 0.0, 0.0, 30.0)]);
        assert_eq!(classify_relative_position(&frame, "t"), Ok(RelPos::CenterFar));
    }

    #[test]
    fn bearing_wins_over_elevation() {
        let frame = frame_with(vec![seen("t", EntityClass::Warship, 25.0, 45.0, 30.0)]);
        assert_eq!(classify_relative_position(&frame, "t"), Ok(RelPos::RightFar));
    }

    #[test]
    fn missing_target_errors() {
        let frame = frame_with(vec![]);
        assert_eq!(
            classify_relative_position(&frame, "ghost"),
            Err(PerceptionError::NotVisible("ghost".into()))
        );
    }

    #[test]
    fn partition_is_total_and_unique() {
        // Every (bearing, elevation, range) triple lands in exactly one bucket.
        for b in -17..=17 {
            for e in -17..=17 {
                for range in [2.0, 10.0, 40.0] {
                    let frame = frame_with(vec![seen(
                        "t",
                        EntityClass::Glider,
                        b as f64 * 5.0,
                        e as f64 * 5.0,
                        range,
                    )]);
                    classify_relative_position(&frame, "t").unwrap();
                }
            }
        }
    }

    #[test]
    fn close_is_monotone_in_range() {
        for range in [5.0, 4.0, 3.0, 1.0, 0.5] {
            let frame = frame_with(vec![seen("t", EntityClass::Glider, 30.0, -20.0, range)]);
            assert_eq!(classify_relative_position(&frame, "t"), Ok(RelPos::Close));
        }
    }

    #[test]
    fn detect_target_matches_class() {
        let frame = frame_with(vec![
            seen("hill1", EntityClass::Hill, -40.0, 0.0, 30.0),
            seen("glider", EntityClass::Glider, 20.0, 0.0, 30.0),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = describe_view(&frame, &NoiseConfig::default(), &mut rng);
        assert!(detect_target(&ds, EntityClass::Glider));
        assert!(!detect_target(&ds, EntityClass::Warship));
        assert!(!detect_target(&[], EntityClass::Warship));
    }

    #[test]
    fn descriptors_drop_under_full_miss_noise() {
        let frame = frame_with(vec![seen("w", EntityClass::Warship, 0.0, 0.0, 20.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = NoiseConfig { p_miss: 1.0, p_confuse: 0.0 };
        assert!(describe_view(&frame, &noise, &mut rng).is_empty());
    }
}
