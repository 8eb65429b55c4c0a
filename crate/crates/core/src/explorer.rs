//! The navigation policy.
//!
//! The agent starts with an in-place rotation, then tours all frontiers
//! (geometry phase) until some frontier's fused semantic score reaches
//! `tau_sem`, after which it greedily pursues the best-scoring frontier
//! (semantic phase). A confident target detection at any time opens a
//! candidate that is checked from several viewpoints before the agent
//! approaches it and stops.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::PolicyConfig;
use crate::context::ContextField;
use crate::error::Result;
use crate::fusion::CueSources;
use crate::geometry::{angle_diff, Point, Pose};
use crate::knowledge::{CueWeights, TargetKnowledge};
use crate::observation::{Action, Detection, Observation};
use crate::raycast::{line_of_sight, RayWalk};
use crate::sim::SensorConfig;
use crate::tour::plan_open_tour;
use crate::value_map::{occlusion_mask, Channel, ConeObservation, ValueLayer};
use crate::world_model::{extract_frontiers, CellState, Frontier, GeoMap, PathPlanner};

/// Why an episode ended without a confirmed target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    StepBudget,
    ExplorationExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// A candidate was confirmed, approached, and the agent stopped.
    Success,
    Failure(FailureKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initializing,
    GeometryExplore,
    SemanticExplore,
    Verifying,
    Done(Outcome),
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Initializing => "initializing",
            Phase::GeometryExplore => "geometry",
            Phase::SemanticExplore => "semantic",
            Phase::Verifying => "verifying",
            Phase::Done(Outcome::Success) => "done_success",
            Phase::Done(Outcome::Failure(FailureKind::StepBudget)) => "done_step_budget",
            Phase::Done(Outcome::Failure(FailureKind::ExplorationExhausted)) => "done_exhausted",
        }
    }

    /// The documented state machine. Semantic exploration never falls back
    /// to the geometry phase, and only verification ends in success.
    pub fn allows(&self, next: &Phase) -> bool {
        use Phase::*;
        match (self, next) {
            (Done(_), _) => false,
            (_, Done(Outcome::Failure(FailureKind::StepBudget))) => true,
            (Initializing, GeometryExplore | Verifying) => true,
            (GeometryExplore, SemanticExplore | Verifying) => true,
            (GeometryExplore | SemanticExplore, Done(Outcome::Failure(FailureKind::ExplorationExhausted))) => true,
            (SemanticExplore, Verifying) => true,
            (Verifying, GeometryExplore | SemanticExplore | Done(Outcome::Success)) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Pending,
    Confirmed,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub viewpoint: usize,
    pub class_name: String,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateTarget {
    pub center: Point,
    /// One slot per planned viewpoint; `None` when no reachable free cell
    /// with a view of the candidate exists near the ideal spot.
    pub viewpoints: Vec<Option<Pose>>,
    pub votes: Vec<Vote>,
    pub status: CandidateStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub phase: Phase,
    pub current_goal: Option<Point>,
    pub tour: Option<Vec<Point>>,
    pub candidate: Option<CandidateTarget>,
    pub steps_taken: usize,
}

/// Rotations that make one full turn in place.
pub fn initialize_actions(turn_angle: f64) -> Vec<Action> {
    let n = (TAU / turn_angle - 1e-9).ceil() as usize;
    vec![Action::RotateLeft; n]
}

/// Switch test with latch: once switched, always switched.
pub fn should_switch_to_semantic(latched: bool, frontier_scores: &[f64], tau_sem: f64) -> bool {
    latched || frontier_scores.iter().any(|&s| s >= tau_sem)
}

/// Open tour over the reachable frontiers starting at the agent, using
/// geodesic distances on `map`. Returns indices into `frontiers`, or
/// `None` when no frontier is reachable.
pub fn plan_geometry_tour(
    frontiers: &[Frontier],
    map: &GeoMap,
    pose: &Pose,
    planner: &mut PathPlanner,
) -> Option<Vec<usize>> {
    let start = map.cell_of(pose.position())?;
    let start = map.index(start.0, start.1);
    let cells: Vec<usize> = frontiers.iter().map(|f| cell_index(map, f)).collect();
    let from_agent = planner.distances_to(map, start, &cells);
    let reachable: Vec<usize> = (0..frontiers.len()).filter(|&i| from_agent[i].is_some()).collect();
    if reachable.is_empty() {
        return None;
    }
    let targets: Vec<usize> = reachable.iter().map(|&i| cells[i]).collect();
    let n = reachable.len() + 1;
    let mut dist = vec![vec![0.0; n]; n];
    for (a, &fa) in reachable.iter().enumerate() {
        dist[0][a + 1] = from_agent[fa].expect("reachable");
        dist[a + 1][0] = dist[0][a + 1];
        let row = planner.distances_to(map, cells[fa], &targets);
        for b in 0..reachable.len() {
            if a != b {
                dist[a + 1][b + 1] = row[b].unwrap_or(f64::INFINITY);
            }
        }
    }
    Some(plan_open_tour(&dist).into_iter().map(|k| reachable[k - 1]).collect())
}

/// Index of the best frontier: highest score, then shorter distance, then
/// lower id. Frontiers with no distance (unreachable) are skipped.
pub fn select_semantic_frontier(frontiers: &[Frontier], scores: &[f64], distances: &[Option<f64>]) -> Option<usize> {
    (0..frontiers.len()).filter(|&i| distances[i].is_some()).min_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(distances[a].unwrap().total_cmp(&distances[b].unwrap()))
            .then(frontiers[a].id.cmp(&frontiers[b].id))
    })
}

/// Counts viewpoints that saw the target class with enough confidence.
pub fn verify_candidate(candidate: &CandidateTarget, target: &str, vote_min: usize, conf_min: f64) -> CandidateStatus {
    let mut voters: Vec<usize> = candidate
        .votes
        .iter()
        .filter(|v| v.class_name == target && v.confidence >= conf_min)
        .map(|v| v.viewpoint)
        .collect();
    voters.sort_unstable();
    voters.dedup();
    if voters.len() >= vote_min {
        CandidateStatus::Confirmed
    } else {
        CandidateStatus::Rejected
    }
}

fn cell_index(map: &GeoMap, f: &Frontier) -> usize {
    map.index(f.center_cell.0, f.center_cell.1)
}

const FRONTIER_ARRIVAL: f64 = 0.3;
const VIEWPOINT_ARRIVAL: f64 = 0.25;
const LOOKAHEAD: f64 = 0.4;
const VOTE_RADIUS: f64 = 0.75;
const ABANDON_RADIUS: f64 = 0.5;
const GOAL_STEP_LIMIT: usize = 150;
const BUMP_LIMIT: usize = 4;

#[derive(Clone, Debug, Default)]
struct VerifyProgress {
    index: usize,
    steps: usize,
}

/// The policy together with everything it has built from observations.
#[derive(Clone, Debug)]
pub struct Explorer {
    config: PolicyConfig,
    sensor: SensorConfig,
    knowledge: TargetKnowledge,
    weights: CueWeights,
    map: GeoMap,
    target_layer: ValueLayer,
    room_layer: ValueLayer,
    context: ContextField,
    planner: PathPlanner,
    state: PolicyState,
    latched: bool,
    rotations_left: usize,
    resume: Phase,
    blacklist: Vec<Point>,
    abandoned: Vec<Point>,
    frontiers: Vec<Frontier>,
    tour_frontier_count: usize,
    since_select: usize,
    goal_steps: usize,
    bumps: usize,
    progress: VerifyProgress,
    last: Option<(Action, Pose)>,
    transitions: Vec<(Phase, Phase)>,
    proposals: Vec<Point>,
}

impl Explorer {
    /// `map` is the agent's blank occupancy grid.
    pub fn new(config: PolicyConfig, sensor: SensorConfig, knowledge: TargetKnowledge, map: GeoMap) -> Self {
        let weights = config.weights_for(&knowledge);
        let rotations_left = initialize_actions(config.turn_angle()).len();
        Self {
            target_layer: ValueLayer::new(Channel::Target, &map),
            room_layer: ValueLayer::new(Channel::Room, &map),
            context: ContextField::new(config.context),
            planner: PathPlanner::new(),
            state: PolicyState {
                phase: Phase::Initializing,
                current_goal: None,
                tour: None,
                candidate: None,
                steps_taken: 0,
            },
            latched: false,
            rotations_left,
            resume: Phase::GeometryExplore,
            blacklist: Vec::new(),
            abandoned: Vec::new(),
            frontiers: Vec::new(),
            tour_frontier_count: 0,
            since_select: 0,
            goal_steps: 0,
            bumps: 0,
            progress: VerifyProgress::default(),
            last: None,
            transitions: Vec::new(),
            proposals: Vec::new(),
            config,
            sensor,
            knowledge,
            weights,
            map,
        }
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn weights(&self) -> CueWeights {
        self.weights
    }

    pub fn map(&self) -> &GeoMap {
        &self.map
    }

    pub fn target_layer(&self) -> &ValueLayer {
        &self.target_layer
    }

    pub fn room_layer(&self) -> &ValueLayer {
        &self.room_layer
    }

    pub fn context(&self) -> &ContextField {
        &self.context
    }

    pub fn knowledge(&self) -> &TargetKnowledge {
        &self.knowledge
    }

    pub fn cues(&self) -> CueSources<'_> {
        CueSources { map: &self.map, target: &self.target_layer, room: &self.room_layer, context: &self.context }
    }

    /// Frontiers from the most recent exploration step.
    pub fn frontiers(&self) -> &[Frontier] {
        &self.frontiers
    }

    /// Every phase change so far, in order.
    pub fn transitions(&self) -> &[(Phase, Phase)] {
        &self.transitions
    }

    /// Centers of all candidates proposed so far.
    pub fn proposals(&self) -> &[Point] {
        &self.proposals
    }

    pub fn blacklist(&self) -> &[Point] {
        &self.blacklist
    }

    pub fn is_done(&self) -> bool {
        matches!(self.state.phase, Phase::Done(_))
    }

    /// Fused score at each frontier center.
    pub fn frontier_scores(&self, frontiers: &[Frontier]) -> Vec<f64> {
        let cues = self.cues();
        frontiers.iter().map(|f| cues.fuse(self.weights, f.center).map(|r| r.v_sem).unwrap_or(0.0)).collect()
    }

    fn transition(&mut self, next: Phase) {
        let prev = self.state.phase;
        if prev == next {
            return;
        }
        debug_assert!(prev.allows(&next), "undocumented transition {prev} -> {next}");
        self.transitions.push((prev, next));
        self.state.phase = next;
    }

    /// Integrates `obs` and returns the next action, or `None` once the
    /// episode is over without a stop (step budget or nothing left to
    /// explore).
    pub fn step(&mut self, obs: &Observation) -> Result<Option<Action>> {
        if self.is_done() {
            return Ok(None);
        }
        self.integrate(obs)?;
        if self.state.steps_taken >= self.config.max_steps {
            self.transition(Phase::Done(Outcome::Failure(FailureKind::StepBudget)));
            return Ok(None);
        }
        let action = self.decide(obs);
        if let Some(a) = action {
            self.state.steps_taken += 1;
            self.last = Some((a, obs.pose));
        }
        Ok(action)
    }

    fn integrate(&mut self, obs: &Observation) -> Result<()> {
        let pose = obs.pose;
        if let Some((Action::Forward, before)) = self.last {
            if before.position().distance(pose.position()) < 1e-9 {
                self.bumps += 1;
                self.mark_bump(&pose);
            } else {
                self.bumps = 0;
            }
        }
        self.map.integrate_observation(&pose, &obs.scan)?;
        let mask = occlusion_mask(&pose, self.sensor.fov, self.sensor.max_depth, &self.map);
        let cone = |score| ConeObservation { pose, fov: self.sensor.fov, range: self.sensor.max_depth, score };
        self.target_layer.apply_to_cells(&cone(obs.target_score), &self.map, &mask);
        self.room_layer.apply_to_cells(&cone(obs.room_score), &self.map, &mask);
        for d in &obs.detections {
            if d.class_name != self.knowledge.target {
                self.context.register_detection(pose, d.position, &d.class_name, d.confidence, &self.knowledge);
            }
        }
        Ok(())
    }

    /// A forward move was blocked by something the depth sensor could not
    /// see. Marks the first unconfirmed cell ahead as occupied.
    fn mark_bump(&mut self, pose: &Pose) {
        let Some(home) = self.map.cell_of(pose.position()) else {
            return;
        };
        let ahead: Vec<(usize, usize)> =
            RayWalk::new(self.map.frame(), pose.position(), pose.heading, self.config.forward_step)
                .map(|c| (c.col, c.row))
                .filter(|&c| c != home)
                .collect();
        let pick = ahead.iter().find(|&&(c, r)| self.map.state(c, r) != CellState::Free).or(ahead.last()).copied();
        if let Some((c, r)) = pick {
            self.map.mark_occupied(c, r);
        }
    }

    fn decide(&mut self, obs: &Observation) -> Option<Action> {
        match self.state.phase {
            Phase::Done(_) => None,
            Phase::Verifying => self.verify_step(obs),
            Phase::Initializing => {
                if self.try_propose(obs) {
                    return self.verify_step(obs);
                }
                if self.rotations_left > 0 {
                    self.rotations_left -= 1;
                    return Some(Action::RotateLeft);
                }
                self.transition(Phase::GeometryExplore);
                self.explore_step(obs)
            }
            Phase::GeometryExplore | Phase::SemanticExplore => {
                if self.try_propose(obs) {
                    return self.verify_step(obs);
                }
                self.explore_step(obs)
            }
        }
    }

    fn blacklisted(&self, p: Point) -> bool {
        self.blacklist.iter().any(|b| b.distance(p) <= self.config.blacklist_radius)
    }

    fn try_propose(&mut self, obs: &Observation) -> bool {
        let best = obs
            .detections
            .iter()
            .filter(|d| d.class_name == self.knowledge.target && d.confidence >= self.config.conf_min)
            .filter(|d| !self.blacklisted(d.position))
            .fold(None::<&Detection>, |best, d| match best {
                Some(b) if b.confidence >= d.confidence => Some(b),
                _ => Some(d),
            });
        let Some(det) = best else {
            return false;
        };
        let center = det.position;
        let viewpoints = self.plan_viewpoints(center, &obs.pose);
        let mut candidate = CandidateTarget { center, viewpoints, votes: Vec::new(), status: CandidateStatus::Pending };
        if self.config.vote_min <= 1 {
            candidate.votes.push(Vote { viewpoint: 0, class_name: det.class_name.clone(), confidence: det.confidence });
            candidate.status = CandidateStatus::Confirmed;
        }
        self.resume = if self.latched { Phase::SemanticExplore } else { Phase::GeometryExplore };
        self.proposals.push(center);
        self.state.candidate = Some(candidate);
        self.state.current_goal = None;
        self.progress = VerifyProgress::default();
        self.transition(Phase::Verifying);
        true
    }

    /// `K` poses on a circle around `center`, the first on the agent's side,
    /// each snapped to the closest reachable free cell that sees `center`.
    fn plan_viewpoints(&mut self, center: Point, pose: &Pose) -> Vec<Option<Pose>> {
        let k = self.config.viewpoints;
        let radius = self.config.viewpoint_radius;
        let field = self.map.cell_of(pose.position()).map(|(c, r)| {
            let start = self.map.index(c, r);
            self.planner.cost_field(&self.map, start)
        });
        let base = center.bearing_to(pose.position());
        let res = self.map.resolution();
        let window = (1.0 / res).ceil() as i64;
        (0..k)
            .map(|i| {
                let ideal = center.offset(base + i as f64 * TAU / k as f64, radius);
                let field = field.as_ref()?;
                let (ic, ir) = self.map.cell_of(ideal).or_else(|| self.map.cell_of(center))?;
                let mut best: Option<(f64, usize)> = None;
                for dr in -window..=window {
                    for dc in -window..=window {
                        let (c, r) = (ic as i64 + dc, ir as i64 + dr);
                        if c < 0 || r < 0 || c as usize >= self.map.width() || r as usize >= self.map.height() {
                            continue;
                        }
                        let (c, r) = (c as usize, r as usize);
                        let idx = self.map.index(c, r);
                        if self.map.state(c, r) != CellState::Free || field.get(idx).is_none() {
                            continue;
                        }
                        let p = self.map.cell_center(c, r);
                        let d = p.distance(ideal);
                        if d > 1.0 || p.distance(center) < 0.5 {
                            continue;
                        }
                        if !line_of_sight(self.map.frame(), p, center, |c, r| self.map.is_occupied(c, r)) {
                            continue;
                        }
                        if best.is_none_or(|(bd, bi)| d < bd || (d == bd && idx < bi)) {
                            best = Some((d, idx));
                        }
                    }
                }
                best.map(|(_, idx)| {
                    let (c, r) = self.map.coords(idx);
                    let p = self.map.cell_center(c, r);
                    Pose::new(p.x, p.y, p.bearing_to(center))
                })
            })
            .collect()
    }

    fn verify_step(&mut self, obs: &Observation) -> Option<Action> {
        let target = self.knowledge.target.clone();
        loop {
            let cand = self.state.candidate.as_mut().expect("verifying without a candidate");
            match cand.status {
                CandidateStatus::Confirmed => return self.approach_step(obs),
                CandidateStatus::Rejected => unreachable!("rejected candidates are cleared"),
                CandidateStatus::Pending => {}
            }
            let k = cand.viewpoints.len();
            if self.progress.index >= k {
                cand.status = verify_candidate(cand, &target, self.config.vote_min, self.config.conf_min);
                if cand.status == CandidateStatus::Confirmed {
                    continue;
                }
                self.blacklist.push(cand.center);
                self.state.candidate = None;
                self.state.current_goal = None;
                self.state.tour = None;
                self.transition(self.resume);
                return self.explore_step(obs);
            }
            let index = self.progress.index;
            let center = cand.center;
            let Some(vp) = cand.viewpoints[index] else {
                self.next_viewpoint();
                continue;
            };
            if self.progress.steps >= self.config.viewpoint_budget {
                self.next_viewpoint();
                continue;
            }
            let pose = obs.pose;
            if pose.position().distance(vp.position()) <= VIEWPOINT_ARRIVAL {
                let err = pose.relative_bearing(center);
                if err.abs() > self.config.turn_angle() / 2.0 + 1e-9 {
                    self.progress.steps += 1;
                    return Some(if err > 0.0 { Action::RotateLeft } else { Action::RotateRight });
                }
                if let Some(vote) = best_vote(&obs.detections, center, &target, index) {
                    cand.votes.push(vote);
                }
                self.next_viewpoint();
                continue;
            }
            self.state.current_goal = Some(vp.position());
            match self.navigate_to(obs, vp.position()) {
                Some(a) if self.bumps < BUMP_LIMIT => {
                    self.progress.steps += 1;
                    return Some(a);
                }
                _ => {
                    self.bumps = 0;
                    self.next_viewpoint();
                }
            }
        }
    }

    fn next_viewpoint(&mut self) {
        self.progress.index += 1;
        self.progress.steps = 0;
    }

    fn approach_step(&mut self, obs: &Observation) -> Option<Action> {
        let center = self.state.candidate.as_ref().map(|c| c.center).expect("candidate");
        self.state.current_goal = Some(center);
        if obs.pose.position().distance(center) <= self.config.success_distance {
            self.transition(Phase::Done(Outcome::Success));
            return Some(Action::Stop);
        }
        match self.navigate_to(obs, center) {
            Some(a) if self.bumps < BUMP_LIMIT => Some(a),
            _ => {
                // closest reachable spot: stop here
                self.transition(Phase::Done(Outcome::Success));
                Some(Action::Stop)
            }
        }
    }

    fn refresh_frontiers(&mut self) {
        let mut frontiers = extract_frontiers(&self.map, self.config.min_frontier_cells);
        frontiers.retain(|f| !self.abandoned.iter().any(|a| a.distance(f.center) <= ABANDON_RADIUS));
        self.frontiers = frontiers;
    }

    fn goal_alive(&self, goal: Point) -> bool {
        let r2 = FRONTIER_ARRIVAL * FRONTIER_ARRIVAL;
        self.frontiers.iter().any(|f| {
            f.cells.iter().any(|&i| {
                let (c, r) = self.map.coords(i);
                self.map.cell_center(c, r).distance_sq(goal) <= r2
            })
        })
    }

    fn abandon_goal(&mut self) {
        if let Some(g) = self.state.current_goal.take() {
            self.abandoned.push(g);
        }
        self.state.tour = None;
        self.goal_steps = 0;
        self.bumps = 0;
    }

    fn explore_step(&mut self, obs: &Observation) -> Option<Action> {
        self.since_select += 1;
        for _ in 0..64 {
            self.refresh_frontiers();
            if self.frontiers.is_empty() {
                self.state.current_goal = None;
                self.state.tour = None;
                self.transition(Phase::Done(Outcome::Failure(FailureKind::ExplorationExhausted)));
                return None;
            }
            let scores = self.frontier_scores(&self.frontiers);
            if !self.latched && should_switch_to_semantic(false, &scores, self.config.tau_sem) {
                self.latched = true;
                self.state.tour = None;
                self.state.current_goal = None;
                self.transition(Phase::SemanticExplore);
            }
            let alive = self.state.current_goal.is_some_and(|g| self.goal_alive(g));
            let reselect = if self.latched {
                !alive || self.since_select >= self.config.replan_interval
            } else {
                !alive || self.state.tour.is_none() || self.tour_frontier_count != self.frontiers.len()
            };
            if reselect && !self.select_goal(obs, &scores) {
                self.state.current_goal = None;
                self.state.tour = None;
                self.transition(Phase::Done(Outcome::Failure(FailureKind::ExplorationExhausted)));
                return None;
            }
            let goal = self.state.current_goal.expect("goal selected");
            if obs.pose.position().distance(goal) <= FRONTIER_ARRIVAL || self.goal_steps >= GOAL_STEP_LIMIT {
                self.abandon_goal();
                continue;
            }
            match self.navigate_to(obs, goal) {
                Some(a) if self.bumps < BUMP_LIMIT => {
                    self.goal_steps += 1;
                    return Some(a);
                }
                _ => self.abandon_goal(),
            }
        }
        Some(Action::RotateLeft)
    }

    /// Picks the next frontier goal for the current phase. Returns false
    /// when no frontier is reachable.
    fn select_goal(&mut self, obs: &Observation, scores: &[f64]) -> bool {
        let previous = self.state.current_goal;
        if self.latched {
            let Some((c, r)) = self.map.cell_of(obs.pose.position()) else {
                return false;
            };
            let field = self.planner.cost_field(&self.map, self.map.index(c, r));
            let distances: Vec<Option<f64>> =
                self.frontiers.iter().map(|f| field.get(cell_index(&self.map, f))).collect();
            let Some(best) = select_semantic_frontier(&self.frontiers, scores, &distances) else {
                return false;
            };
            self.state.current_goal = Some(self.frontiers[best].center);
            self.since_select = 0;
        } else {
            let Some(order) = plan_geometry_tour(&self.frontiers, &self.map, &obs.pose, &mut self.planner) else {
                return false;
            };
            let tour: Vec<Point> = order.iter().map(|&i| self.frontiers[i].center).collect();
            self.state.current_goal = tour.first().copied();
            self.state.tour = Some(tour);
            self.tour_frontier_count = self.frontiers.len();
        }
        if self.state.current_goal != previous {
            self.goal_steps = 0;
        }
        true
    }

    /// One control action toward `goal` along a planned path, or `None`
    /// when the goal cannot be reached on the current map.
    fn navigate_to(&mut self, obs: &Observation, goal: Point) -> Option<Action> {
        let pose = obs.pose;
        let (sc, sr) = self.map.cell_of(pose.position())?;
        let start = self.map.index(sc, sr);
        let (goal_idx, goal_point) = self.snap_free(goal)?;
        let path = self.planner.plan(&self.map, start, goal_idx, true)?;
        let waypoint = if pose.position().distance(goal_point) <= LOOKAHEAD {
            goal_point
        } else {
            path.iter()
                .skip(1)
                .map(|&i| {
                    let (c, r) = self.map.coords(i);
                    self.map.cell_center(c, r)
                })
                .find(|p| p.distance(pose.position()) >= LOOKAHEAD)
                .unwrap_or(goal_point)
        };
        let turn = self.config.turn_angle();
        let err = pose.relative_bearing(waypoint);
        // Headings reachable by whole turns, tried in order of how far they
        // point from the waypoint; the first one with a clear step wins.
        let n = (TAU / turn).round().max(1.0) as i64;
        let mut options: Vec<(i64, f64)> =
            (-(n / 2)..=(n - 1) / 2).map(|k| (k, angle_diff(err, k as f64 * turn).abs())).collect();
        options.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.abs().cmp(&b.0.abs())));
        let k = options
            .iter()
            .map(|&(k, _)| k)
            .find(|&k| self.step_clear(&pose.rotated(k as f64 * turn)))
            .unwrap_or_else(|| (err / turn).round() as i64);
        Some(match k.cmp(&0) {
            std::cmp::Ordering::Equal => Action::Forward,
            std::cmp::Ordering::Greater => Action::RotateLeft,
            std::cmp::Ordering::Less => Action::RotateRight,
        })
    }

    /// Whether a forward step from `pose` stays off known obstacles.
    fn step_clear(&self, pose: &Pose) -> bool {
        RayWalk::new(self.map.frame(), pose.position(), pose.heading, self.config.forward_step)
            .all(|c| self.map.state(c.col, c.row) != CellState::Occupied)
    }

    /// The goal itself when its cell is free, else the nearest free cell
    /// center within one meter.
    fn snap_free(&self, goal: Point) -> Option<(usize, Point)> {
        let (gc, gr) = self.map.cell_of(goal)?;
        if self.map.state(gc, gr) == CellState::Free {
            return Some((self.map.index(gc, gr), goal));
        }
        let window = (1.0 / self.map.resolution()).ceil() as i64;
        let mut best: Option<(f64, usize)> = None;
        for dr in -window..=window {
            for dc in -window..=window {
                let (c, r) = (gc as i64 + dc, gr as i64 + dr);
                if c < 0 || r < 0 || c as usize >= self.map.width() || r as usize >= self.map.height() {
                    continue;
                }
                let (c, r) = (c as usize, r as usize);
                if self.map.state(c, r) != CellState::Free {
                    continue;
                }
                let d = self.map.cell_center(c, r).distance(goal);
                let idx = self.map.index(c, r);
                if d <= 1.0 && best.is_none_or(|(bd, bi)| d < bd || (d == bd && idx < bi)) {
                    best = Some((d, idx));
                }
            }
        }
        best.map(|(_, idx)| {
            let (c, r) = self.map.coords(idx);
            (idx, self.map.cell_center(c, r))
        })
    }
}

/// The detection a viewpoint contributes: the nearest target-class
/// detection near the candidate, else the nearest detection of any class.
fn best_vote(detections: &[Detection], center: Point, target: &str, viewpoint: usize) -> Option<Vote> {
    let nearest = |on_target: bool| {
        detections
            .iter()
            .filter(|d| d.position.distance(center) <= VOTE_RADIUS)
            .filter(|d| !on_target || d.class_name == target)
            .min_by(|a, b| a.position.distance(center).total_cmp(&b.position.distance(center)))
    };
    nearest(true).or_else(|| nearest(false)).map(|d| Vote {
        viewpoint,
        class_name: d.class_name.clone(),
        confidence: d.confidence,
    })
}
