//! Synthetic perception: a depth sensor, an image-text similarity oracle
//! and an object detector, all reading the ground-truth world.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::{World, WorldObject};
use crate::error::{NavError, Result};
use crate::geometry::{Point, Pose};
use crate::knowledge::KnowledgeBase;
use crate::observation::Detection;
use crate::raycast::{cast, line_of_sight};
use crate::world_model::{DepthRay, DepthScan, MAX_DEPTH, MIN_DEPTH};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Similarity of a view that shows nothing relevant.
    pub sim_base: f64,
    /// Similarity when an instance of the prompted object is in view.
    pub sim_target_visible: f64,
    /// Similarity when at least 60% of the visible floor belongs to the
    /// prompted room type.
    pub sim_room_match: f64,
    pub noise_std: f64,
    /// Perception range of an object with salience 1, meters.
    pub detect_range: f64,
    pub detect_prob: f64,
    pub false_positive_rate: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            sim_base: 0.1,
            sim_target_visible: 0.85,
            sim_room_match: 0.8,
            noise_std: 0.05,
            detect_range: 3.0,
            detect_prob: 0.9,
            false_positive_rate: 0.02,
        }
    }
}

impl OracleConfig {
    /// Perfect perception: no noise, no misses, no false positives.
    pub fn noiseless() -> Self {
        Self { noise_std: 0.0, detect_prob: 1.0, false_positive_rate: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(NavError::Config(format!("oracle.{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("sim_base", self.sim_base)?;
        unit("sim_target_visible", self.sim_target_visible)?;
        unit("sim_room_match", self.sim_room_match)?;
        unit("detect_prob", self.detect_prob)?;
        unit("false_positive_rate", self.false_positive_rate)?;
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(NavError::Config(format!("oracle.noise_std must be non-negative, got {}", self.noise_std)));
        }
        if !(self.detect_range > 0.0 && self.detect_range.is_finite()) {
            return Err(NavError::Config(format!("oracle.detect_range must be positive, got {}", self.detect_range)));
        }
        Ok(())
    }
}

/// Camera and depth sensor geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    /// Angular spacing of depth beams, radians.
    pub beam_spacing: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::FRAC_PI_2,
            min_depth: MIN_DEPTH,
            max_depth: MAX_DEPTH,
            beam_spacing: 1f64.to_radians(),
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::TAU) {
            return Err(NavError::Config(format!("sensor.fov must lie in (0, 2π], got {}", self.fov)));
        }
        if !(self.min_depth >= 0.0 && self.max_depth > self.min_depth) {
            return Err(NavError::Config("sensor depth limits must satisfy 0 <= min < max".into()));
        }
        if self.beam_spacing.is_nan() || self.beam_spacing <= 0.0 {
            return Err(NavError::Config("sensor.beam_spacing must be positive".into()));
        }
        Ok(())
    }

    fn beams(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (self.fov / self.beam_spacing).round().max(1.0) as usize;
        (0..=n).map(move |i| -self.fov / 2.0 + self.fov * i as f64 / n as f64)
    }
}

/// A similarity query: an object class or a room type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Prompt {
    Object(String),
    Room(String),
}

impl Prompt {
    /// Resolves free text against the knowledge base's vocabulary.
    pub fn parse(text: &str, kb: &KnowledgeBase) -> Result<Prompt> {
        if kb.catalog.contains(text) {
            return Ok(Prompt::Room(text.to_string()));
        }
        let known =
            kb.targets.values().any(|t| t.target == text || t.contextual_objects.iter().any(|o| o.name == text));
        if known {
            Ok(Prompt::Object(text.to_string()))
        } else {
            Err(NavError::UnknownPrompt(text.to_string()))
        }
    }
}

/// Depth returns plus the floor points seen along each beam.
#[derive(Clone, Debug)]
pub struct View {
    pub scan: DepthScan,
    /// Free floor sample points in view, 0.1 m apart along each beam.
    pub floor: Vec<Point>,
}

const FLOOR_SAMPLE_STEP: f64 = 0.1;

pub fn render_view(world: &World, pose: &Pose, sensor: &SensorConfig) -> View {
    let frame = world.frame();
    let origin = pose.position();
    let mut rays = Vec::new();
    let mut floor = Vec::new();
    for bearing in sensor.beams() {
        let heading = pose.heading + bearing;
        let hit = cast(frame, origin, heading, sensor.max_depth, |c, r| world.is_wall(c, r));
        let visible_to = hit.unwrap_or(sensor.max_depth);
        let mut d = FLOOR_SAMPLE_STEP;
        while d < visible_to {
            floor.push(origin.offset(heading, d));
            d += FLOOR_SAMPLE_STEP;
        }
        match hit {
            Some(range) if range < sensor.min_depth => {}
            Some(range) => rays.push(DepthRay { bearing, range, hit: true }),
            None => rays.push(DepthRay { bearing, range: sensor.max_depth, hit: false }),
        }
    }
    View { scan: DepthScan { rays, min_depth: sensor.min_depth, max_depth: sensor.max_depth }, floor }
}

/// Whether `obj` lies inside the view cone of `pose` out to `range` and is
/// not hidden behind a wall.
fn within_cone(world: &World, pose: &Pose, sensor: &SensorConfig, obj: &WorldObject, range: f64) -> bool {
    let d = pose.position().distance(obj.position);
    if d > range {
        return false;
    }
    if d > 1e-9 && pose.relative_bearing(obj.position).abs() > sensor.fov / 2.0 + 1e-12 {
        return false;
    }
    line_of_sight(world.frame(), pose.position(), obj.position, |c, r| world.is_wall(c, r))
}

/// Whether `obj` is perceptible from `pose`: inside the field of view,
/// within its salience-scaled range and not hidden behind a wall.
pub fn object_visible(
    world: &World,
    pose: &Pose,
    sensor: &SensorConfig,
    oracle: &OracleConfig,
    obj: &WorldObject,
) -> bool {
    let range = (obj.salience * oracle.detect_range).min(sensor.max_depth);
    within_cone(world, pose, sensor, obj, range)
}

fn noisy<R: Rng>(value: f64, oracle: &OracleConfig, rng: &mut R) -> f64 {
    let noise = if oracle.noise_std > 0.0 {
        Normal::new(0.0, oracle.noise_std).expect("validated std").sample(rng)
    } else {
        0.0
    };
    (value + noise).clamp(0.0, 1.0)
}

fn similarity_with_view<R: Rng>(
    world: &World,
    pose: &Pose,
    sensor: &SensorConfig,
    view: &View,
    prompt: &Prompt,
    oracle: &OracleConfig,
    rng: &mut R,
) -> f64 {
    let matched = match prompt {
        Prompt::Object(class) => world.objects_of(class).any(|o| object_visible(world, pose, sensor, oracle, o)),
        Prompt::Room(room_type) => {
            let total = view.floor.len();
            let inside =
                view.floor.iter().filter(|p| world.room_at(**p).is_some_and(|r| &r.room_type == room_type)).count();
            total > 0 && inside as f64 >= 0.6 * total as f64
        }
    };
    let base = match (prompt, matched) {
        (_, false) => oracle.sim_base,
        (Prompt::Object(_), true) => oracle.sim_target_visible,
        (Prompt::Room(_), true) => oracle.sim_room_match,
    };
    noisy(base, oracle, rng)
}

/// Image-text similarity of the view from `pose` for `prompt`.
pub fn vlm_similarity<R: Rng>(
    world: &World,
    pose: &Pose,
    sensor: &SensorConfig,
    prompt: &Prompt,
    oracle: &OracleConfig,
    rng: &mut R,
) -> f64 {
    let view = render_view(world, pose, sensor);
    similarity_with_view(world, pose, sensor, &view, prompt, oracle, rng)
}

fn detect_with_view<R: Rng>(
    world: &World,
    pose: &Pose,
    sensor: &SensorConfig,
    view: &View,
    classes: &[String],
    oracle: &OracleConfig,
    rng: &mut R,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for obj in &world.objects {
        if !classes.contains(&obj.class_name) || !object_visible(world, pose, sensor, oracle, obj) {
            continue;
        }
        if rng.random::<f64>() < oracle.detect_prob {
            out.push(Detection {
                class_name: obj.class_name.clone(),
                position: obj.position,
                confidence: rng.random_range(0.6..=1.0),
            });
        }
    }
    if !classes.is_empty() && rng.random::<f64>() < oracle.false_positive_rate {
        let class = classes[rng.random_range(0..classes.len())].clone();
        let position =
            if view.floor.is_empty() { pose.position() } else { view.floor[rng.random_range(0..view.floor.len())] };
        let position = world.frame().cell_of(position).map(|(c, r)| world.frame().center(c, r)).unwrap_or(position);
        out.push(Detection { class_name: class, position, confidence: rng.random_range(0.5..=0.9) });
    }
    out
}

/// Detections of the interest classes visible from `pose`, plus at most
/// one spurious detection.
pub fn detect<R: Rng>(
    world: &World,
    pose: &Pose,
    sensor: &SensorConfig,
    classes: &[String],
    oracle: &OracleConfig,
    rng: &mut R,
) -> Vec<Detection> {
    let view = render_view(world, pose, sensor);
    detect_with_view(world, pose, sensor, &view, classes, oracle, rng)
}

/// One full perception frame. Random draws happen in a fixed order:
/// target similarity, room similarity, then detections.
#[allow(clippy::too_many_arguments)]
pub fn perceive<R: Rng>(
    world: &World,
    pose: &Pose,
    sensor: &SensorConfig,
    target_prompt: &Prompt,
    room_prompt: &Prompt,
    classes: &[String],
    oracle: &OracleConfig,
    rng: &mut R,
) -> crate::observation::Observation {
    let view = render_view(world, pose, sensor);
    let target_score = similarity_with_view(world, pose, sensor, &view, target_prompt, oracle, rng);
    let room_score = similarity_with_view(world, pose, sensor, &view, room_prompt, oracle, rng);
    let detections = detect_with_view(world, pose, sensor, &view, classes, oracle, rng);
    crate::observation::Observation { pose: *pose, scan: view.scan, target_score, room_score, detections }
}
