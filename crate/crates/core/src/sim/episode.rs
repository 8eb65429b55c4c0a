//! Episode runner: the simulated environment, the step loop, and traces.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{perceive, OracleConfig, Prompt, SensorConfig};
use super::world::World;
use crate::config::PolicyConfig;
use crate::error::{NavError, Result};
use crate::explorer::{Explorer, Outcome};
use crate::geometry::{Point, Pose};
use crate::knowledge::{CueWeights, KnowledgeBase};
use crate::observation::{Action, Observation};
use crate::raycast::RayWalk;
use crate::world_model::{GeoMap, PathPlanner};

/// What the policy can do to the world.
pub trait Environment {
    fn pose(&self) -> Pose;
    fn observe(&mut self) -> Observation;
    /// Executes `action`; returns whether the agent's position changed.
    fn apply(&mut self, action: Action) -> bool;
}

/// The ground-truth world seen through the perception oracle.
pub struct SimEnvironment<'a> {
    world: &'a World,
    pose: Pose,
    sensor: SensorConfig,
    oracle: OracleConfig,
    target_prompt: Prompt,
    room_prompt: Prompt,
    classes: Vec<String>,
    forward_step: f64,
    turn_angle: f64,
    rng: ChaCha8Rng,
}

impl<'a> SimEnvironment<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        world: &'a World,
        pose: Pose,
        sensor: SensorConfig,
        oracle: OracleConfig,
        target_prompt: Prompt,
        room_prompt: Prompt,
        classes: Vec<String>,
        forward_step: f64,
        turn_angle: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        Self { world, pose, sensor, oracle, target_prompt, room_prompt, classes, forward_step, turn_angle, rng }
    }
}

impl Environment for SimEnvironment<'_> {
    fn pose(&self) -> Pose {
        self.pose
    }

    fn observe(&mut self) -> Observation {
        perceive(
            self.world,
            &self.pose,
            &self.sensor,
            &self.target_prompt,
            &self.room_prompt,
            &self.classes,
            &self.oracle,
            &mut self.rng,
        )
    }

    fn apply(&mut self, action: Action) -> bool {
        match action {
            Action::RotateLeft => {
                self.pose = self.pose.rotated(self.turn_angle);
                false
            }
            Action::RotateRight => {
                self.pose = self.pose.rotated(-self.turn_angle);
                false
            }
            Action::Stop => false,
            Action::Forward => {
                let from = self.pose.position();
                let to = from.offset(self.pose.heading, self.forward_step);
                let blocked = !self.world.is_free_at(to)
                    || RayWalk::new(self.world.frame(), from, self.pose.heading, self.forward_step)
                        .any(|c| self.world.is_wall(c.col, c.row));
                if blocked {
                    return false;
                }
                self.pose = Pose::new(to.x, to.y, self.pose.heading);
                true
            }
        }
    }
}

/// Everything that defines one episode besides the world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub target: String,
    pub seed: u64,
    /// Start pose; sampled from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Pose>,
    pub policy: PolicyConfig,
    pub oracle: OracleConfig,
    pub sensor: SensorConfig,
}

impl EpisodeSetup {
    pub fn new(target: impl Into<String>, seed: u64) -> Self {
        Self {
            target: target.into(),
            seed,
            start: None,
            policy: PolicyConfig::default(),
            oracle: OracleConfig::default(),
            sensor: SensorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub phase: String,
    pub action: Action,
    pub pose: Pose,
    pub goal: Option<Point>,
    /// Whether the action changed the agent's position.
    pub moved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub target: String,
    pub world_seed: u64,
    pub episode_seed: u64,
    pub success: bool,
    /// The agent issued a stop away from every target instance.
    pub false_positive_stop: bool,
    pub outcome: Outcome,
    pub steps: usize,
    /// Meters actually traveled.
    pub path_length: f64,
    /// Geodesic distance from the start to the nearest success region.
    pub shortest_path: f64,
    pub final_distance: f64,
    pub start: Pose,
    pub weights: CueWeights,
    pub trace: Vec<TraceStep>,
}

impl EpisodeResult {
    /// `S · l / max(p, l)`, with `S` alone when both lengths are zero.
    pub fn spl_term(&self) -> f64 {
        let s = if self.success { 1.0 } else { 0.0 };
        let denom = self.path_length.max(self.shortest_path);
        if denom <= 0.0 {
            s
        } else {
            s * self.shortest_path / denom
        }
    }
}

/// Distance from `p` to the nearest footprint edge of any `target`
/// instance (0 inside a footprint).
pub fn distance_to_target(world: &World, target: &str, p: Point) -> f64 {
    world.objects_of(target).map(|o| (o.position.distance(p) - o.radius).max(0.0)).fold(f64::INFINITY, f64::min)
}

/// Geodesic length from `start` to the closest free cell whose center is
/// within `success_distance` of a target footprint.
pub fn shortest_path_to_target(world: &World, target: &str, start: Point, success_distance: f64) -> Option<f64> {
    if distance_to_target(world, target, start) <= success_distance {
        return Some(0.0);
    }
    let map = world.truth_map();
    let (c, r) = map.cell_of(start)?;
    let field = PathPlanner::new().cost_field(&map, map.index(c, r));
    (0..map.width() * map.height())
        .filter_map(|i| {
            let d = field.get(i)?;
            let (c, r) = map.coords(i);
            (distance_to_target(world, target, map.cell_center(c, r)) <= success_distance).then_some(d)
        })
        .min_by(f64::total_cmp)
}

/// Samples a start pose on a free cell with free surroundings, at least
/// 2 m from every target instance.
fn sample_start(world: &World, target: &str, rng: &mut ChaCha8Rng) -> Result<Pose> {
    let (w, h) = (world.width, world.height);
    let clear = |c: usize, r: usize| {
        c >= 2
            && r >= 2
            && c + 2 < w
            && r + 2 < h
            && (r - 2..=r + 2).all(|rr| (c - 2..=c + 2).all(|cc| !world.is_wall(cc, rr)))
    };
    for _ in 0..10_000 {
        let c = rng.random_range(0..w);
        let r = rng.random_range(0..h);
        if !clear(c, r) {
            continue;
        }
        let p = world.frame().center(c, r);
        if distance_to_target(world, target, p) < 2.0 {
            continue;
        }
        let heading = rng.random_range(0..12) as f64 * 30f64.to_radians();
        return Ok(Pose::new(p.x, p.y, heading));
    }
    Err(NavError::Episode(format!("no valid start pose for `{target}`")))
}

/// Validates the setup and returns the start pose, RNG and prompts.
struct Prepared {
    start: Pose,
    rng: ChaCha8Rng,
    knowledge: crate::knowledge::TargetKnowledge,
    target_prompt: Prompt,
    room_prompt: Prompt,
    classes: Vec<String>,
}

fn prepare(world: &World, kb: &KnowledgeBase, setup: &EpisodeSetup) -> Result<Prepared> {
    setup.policy.validate()?;
    setup.oracle.validate()?;
    setup.sensor.validate()?;
    let knowledge = kb.target(&setup.target)?.clone();
    if world.objects_of(&setup.target).next().is_none() {
        return Err(NavError::Episode(format!("world has no `{}` instance", setup.target)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let start = match setup.start {
        Some(p) => {
            if !world.is_free_at(p.position()) {
                return Err(NavError::Episode(format!("start ({:.2}, {:.2}) is not on a free cell", p.x, p.y)));
            }
            p
        }
        None => sample_start(world, &setup.target, &mut rng)?,
    };
    let target_prompt = Prompt::parse(&knowledge.target, kb)?;
    let room_prompt = Prompt::parse(&knowledge.contextual_room, kb)?;
    let classes = knowledge.classes_of_interest();
    Ok(Prepared { start, rng, knowledge, target_prompt, room_prompt, classes })
}

/// Runs a full episode.
pub fn run_episode(world: &World, kb: &KnowledgeBase, setup: &EpisodeSetup) -> Result<EpisodeResult> {
    run_episode_until(world, kb, setup, None).map(|(r, _)| r)
}

/// Runs an episode, stopping before the observation of step `stop_at`
/// when given. Returns the result so far and the agent's internal state.
pub fn run_episode_until(
    world: &World,
    kb: &KnowledgeBase,
    setup: &EpisodeSetup,
    stop_at: Option<usize>,
) -> Result<(EpisodeResult, Explorer)> {
    let prep = prepare(world, kb, setup)?;
    let policy = &setup.policy;
    let shortest = shortest_path_to_target(world, &setup.target, prep.start.position(), policy.success_distance)
        .ok_or_else(|| NavError::Episode(format!("no `{}` instance is reachable from the start", setup.target)))?;
    let agent_map = GeoMap::new(world.width, world.height, world.resolution, Point::new(0.0, 0.0));
    let mut explorer = Explorer::new(policy.clone(), setup.sensor, prep.knowledge, agent_map);
    let mut env = SimEnvironment::new(
        world,
        prep.start,
        setup.sensor,
        setup.oracle,
        prep.target_prompt,
        prep.room_prompt,
        prep.classes,
        policy.forward_step,
        policy.turn_angle(),
        prep.rng,
    );

    let mut trace = Vec::new();
    let mut moved_steps = 0usize;
    let mut stopped = false;
    loop {
        if stop_at.is_some_and(|k| trace.len() >= k) {
            break;
        }
        let obs = env.observe();
        let Some(action) = explorer.step(&obs)? else {
            break;
        };
        trace.push(TraceStep {
            step: trace.len(),
            phase: explorer.phase().name().to_string(),
            action,
            pose: obs.pose,
            goal: explorer.state().current_goal,
            moved: false,
        });
        if action == Action::Stop {
            stopped = true;
            break;
        }
        if env.apply(action) {
            moved_steps += 1;
            trace.last_mut().expect("step recorded").moved = true;
        }
    }

    let final_pose = env.pose();
    let final_distance = distance_to_target(world, &setup.target, final_pose.position());
    let success = stopped && final_distance <= policy.success_distance && trace.len() <= policy.max_steps;
    let outcome = match explorer.phase() {
        crate::explorer::Phase::Done(o) => o,
        _ => Outcome::Failure(crate::explorer::FailureKind::StepBudget),
    };
    let result = EpisodeResult {
        target: setup.target.clone(),
        world_seed: world.seed,
        episode_seed: setup.seed,
        success,
        false_positive_stop: stopped && !success,
        outcome,
        steps: trace.len(),
        path_length: moved_steps as f64 * policy.forward_step,
        shortest_path: shortest,
        final_distance,
        start: prep.start,
        weights: explorer.weights(),
        trace,
    };
    Ok((result, explorer))
}

/// Where an episode's world came from, so a trace can be replayed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WorldSource {
    Generated { spec: super::world::GenerationSpec, seed: u64 },
    File { path: String },
}

impl WorldSource {
    pub fn load(&self, kb: &KnowledgeBase) -> Result<World> {
        match self {
            WorldSource::Generated { spec, seed } => super::world::generate_world(spec, kb, *seed),
            WorldSource::File { path } => World::load(Path::new(path)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub world: WorldSource,
    pub setup: EpisodeSetup,
    pub weights: CueWeights,
    /// Knowledge file, when not the bundled one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge: Option<String>,
}

const TRACE_COLUMNS: &str = "step\tphase\taction\tx\ty\theading\tgoal_x\tgoal_y\tmoved";

/// Trace file text: a `# episode` JSON header, a column line, then one
/// tab-separated line per step.
pub fn format_trace(header: &TraceHeader, steps: &[TraceStep]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# episode {}", serde_json::to_string(header).expect("header serializes"));
    let _ = writeln!(out, "{TRACE_COLUMNS}");
    for s in steps {
        let (gx, gy) = match s.goal {
            Some(g) => (format!("{:.4}", g.x), format!("{:.4}", g.y)),
            None => ("-".to_string(), "-".to_string()),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
            s.step,
            s.phase,
            s.action,
            s.pose.x,
            s.pose.y,
            s.pose.heading,
            gx,
            gy,
            u8::from(s.moved)
        );
    }
    out
}

/// Parsed trace: header plus the raw step lines.
#[derive(Clone, Debug)]
pub struct Trace {
    pub header: TraceHeader,
    pub lines: Vec<String>,
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| NavError::Trace("empty trace file".into()))?;
    let json = first.strip_prefix("# episode ").ok_or_else(|| NavError::Trace("missing `# episode` header".into()))?;
    let header: TraceHeader =
        serde_json::from_str(json).map_err(|source| NavError::Parse { what: "trace header".into(), source })?;
    match lines.next() {
        Some(cols) if cols == TRACE_COLUMNS => {}
        _ => return Err(NavError::Trace("missing column line".into())),
    }
    Ok(Trace { header, lines: lines.map(str::to_string).collect() })
}

impl Trace {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NavError::io(path, e))?;
        parse_trace(&text)
    }

    /// Re-runs the episode up to `step` and checks that the replayed
    /// actions match the recorded ones.
    pub fn replay(&self, kb: &KnowledgeBase, step: usize) -> Result<Explorer> {
        if step > self.lines.len() {
            return Err(NavError::Trace(format!("step {step} is beyond the trace length {}", self.lines.len())));
        }
        let world = self.header.world.load(kb)?;
        let (result, explorer) = run_episode_until(&world, kb, &self.header.setup, Some(step))?;
        let replayed = format_trace(&self.header, &result.trace);
        let replayed: Vec<&str> = replayed.lines().skip(2).collect();
        if replayed.len() != step || replayed.iter().zip(&self.lines).any(|(a, b)| a != b) {
            return Err(NavError::Trace("replay diverged from the recorded trace".into()));
        }
        Ok(explorer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::{generate_world, GenerationSpec};

    fn world(seed: u64) -> (World, KnowledgeBase) {
        let kb = KnowledgeBase::bundled();
        (generate_world(&GenerationSpec::default(), &kb, seed).unwrap(), kb)
    }

    #[test]
    fn deterministic_episode() {
        let (w, kb) = world(11);
        let setup = EpisodeSetup::new("bed", 5);
        let a = run_episode(&w, &kb, &setup).unwrap();
        let b = run_episode(&w, &kb, &setup).unwrap();
        assert_eq!(a, b);
        assert!(a.steps <= setup.policy.max_steps);
    }

    #[test]
    fn path_length_counts_executed_moves() {
        let (w, kb) = world(12);
        let r = run_episode(&w, &kb, &EpisodeSetup::new("tv", 1)).unwrap();
        let moved = r.trace.iter().filter(|s| s.moved).count();
        assert!(r.trace.iter().all(|s| !s.moved || s.action == Action::Forward));
        assert_eq!(r.path_length, moved as f64 * 0.2);
        for pair in r.trace.windows(2) {
            let shifted = pair[0].pose.position().distance(pair[1].pose.position()) > 1e-9;
            assert_eq!(shifted, pair[0].moved);
        }
    }

    #[test]
    fn single_step_budget_fails() {
        let (w, kb) = world(13);
        let mut setup = EpisodeSetup::new("toilet", 2);
        setup.policy.max_steps = 1;
        let r = run_episode(&w, &kb, &setup).unwrap();
        assert!(!r.success);
        assert_eq!(r.steps, 1);
        assert_eq!(r.spl_term(), 0.0);
    }

    #[test]
    fn spawn_next_to_target_succeeds_immediately() {
        let (w, kb) = world(14);
        let obj = w.objects_of("bed").next().unwrap().clone();
        let mut setup = EpisodeSetup::new("bed", 3);
        setup.oracle = OracleConfig::noiseless();
        setup.policy.vote_min = 1;
        setup.start = Some(Pose::new(obj.position.x, obj.position.y, 0.0));
        let r = run_episode(&w, &kb, &setup).unwrap();
        assert!(r.success, "{:?}", r.outcome);
        assert_eq!(r.path_length, 0.0);
        assert_eq!(r.shortest_path, 0.0);
        assert_eq!(r.spl_term(), 1.0);
    }

    #[test]
    fn missing_target_is_reported_before_running() {
        let (mut w, kb) = world(15);
        w.objects.retain(|o| o.class_name != "couch");
        let err = run_episode(&w, &kb, &EpisodeSetup::new("couch", 1)).unwrap_err();
        assert!(matches!(err, NavError::Episode(_)));
        let err = run_episode(&w, &kb, &EpisodeSetup::new("piano", 1)).unwrap_err();
        assert!(matches!(err, NavError::UnknownTarget(_)));
    }

    #[test]
    fn trace_round_trip_and_replay() {
        let kb = KnowledgeBase::bundled();
        let spec = GenerationSpec::default();
        let w = generate_world(&spec, &kb, 21).unwrap();
        let setup = EpisodeSetup::new("chair", 4);
        let r = run_episode(&w, &kb, &setup).unwrap();
        let header = TraceHeader {
            world: WorldSource::Generated { spec, seed: 21 },
            setup,
            weights: r.weights,
            knowledge: None,
        };
        let text = format_trace(&header, &r.trace);
        let trace = parse_trace(&text).unwrap();
        assert_eq!(trace.header, header);
        assert_eq!(trace.lines.len(), r.trace.len());
        let k = r.trace.len().min(25);
        let ex = trace.replay(&kb, k).unwrap();
        assert_eq!(ex.state().steps_taken, k);
        assert!(trace.replay(&kb, r.trace.len() + 1).is_err());
    }
}
