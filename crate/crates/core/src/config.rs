//! Policy parameters with their defaults and range checks.

use serde::{Deserialize, Serialize};

use crate::context::ContextParams;
use crate::error::{NavError, Result};
use crate::knowledge::{weights_for, CueWeights, TargetKnowledge};
use crate::world_model::DEFAULT_MIN_FRONTIER_CELLS;

/// How the room and object cues are weighted against each other.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    /// `ω_room = 1 − H`, `ω_object = H` from the target's entropy.
    Adaptive,
    Fixed {
        room: f64,
        object: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Frontier score that latches semantic exploration.
    pub tau_sem: f64,
    /// Verification viewpoints per candidate.
    pub viewpoints: usize,
    /// Distance of each viewpoint from the candidate, meters.
    pub viewpoint_radius: f64,
    pub vote_min: usize,
    pub conf_min: f64,
    /// Step budget `T`.
    pub max_steps: usize,
    /// Success radius `d_s`, meters.
    pub success_distance: f64,
    /// Semantic goal re-selection period, steps.
    pub replan_interval: usize,
    pub forward_step: f64,
    /// Rotation per turn action, degrees.
    pub turn_angle_deg: f64,
    pub min_frontier_cells: usize,
    /// Rejected candidates block new proposals within this radius, meters.
    pub blacklist_radius: f64,
    /// Steps allowed for reaching and using one viewpoint.
    pub viewpoint_budget: usize,
    pub context: ContextParams,
    pub weights: WeightMode,
    pub use_rooms: bool,
    pub use_objects: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            tau_sem: 0.5,
            viewpoints: 3,
            viewpoint_radius: 1.0,
            vote_min: 2,
            conf_min: 0.5,
            max_steps: 500,
            success_distance: 0.2,
            replan_interval: 10,
            forward_step: 0.2,
            turn_angle_deg: 30.0,
            min_frontier_cells: DEFAULT_MIN_FRONTIER_CELLS,
            blacklist_radius: 1.0,
            viewpoint_budget: 60,
            context: ContextParams::default(),
            weights: WeightMode::Adaptive,
            use_rooms: true,
            use_objects: true,
        }
    }
}

impl PolicyConfig {
    pub fn turn_angle(&self) -> f64 {
        self.turn_angle_deg.to_radians()
    }

    /// Cue weights for `target` after applying the mode and channel switches.
    pub fn weights_for(&self, target: &TargetKnowledge) -> CueWeights {
        let mut w = match self.weights {
            WeightMode::Adaptive => weights_for(target),
            WeightMode::Fixed { room, object } => CueWeights { room, object },
        };
        if !self.use_rooms {
            w.room = 0.0;
        }
        if !self.use_objects {
            w.object = 0.0;
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NavError::Config(msg));
        if !(self.tau_sem.is_finite() && self.tau_sem >= 0.0) {
            return bad(format!("tau_sem must be non-negative, got {}", self.tau_sem));
        }
        if self.viewpoints == 0 {
            return bad("viewpoints must be at least 1".into());
        }
        if self.vote_min == 0 || self.vote_min > self.viewpoints {
            return bad(format!("vote_min must lie in 1..={}, got {}", self.viewpoints, self.vote_min));
        }
        if !(0.0..=1.0).contains(&self.conf_min) {
            return bad(format!("conf_min must lie in [0, 1], got {}", self.conf_min));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        for (name, v) in [
            ("viewpoint_radius", self.viewpoint_radius),
            ("success_distance", self.success_distance),
            ("forward_step", self.forward_step),
            ("turn_angle_deg", self.turn_angle_deg),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.turn_angle_deg > 180.0 {
            return bad(format!("turn_angle_deg must not exceed 180, got {}", self.turn_angle_deg));
        }
        if !(self.blacklist_radius.is_finite() && self.blacklist_radius >= 0.0) {
            return bad(format!("blacklist_radius must be non-negative, got {}", self.blacklist_radius));
        }
        if self.replan_interval == 0 || self.viewpoint_budget == 0 {
            return bad("replan_interval and viewpoint_budget must be at least 1".into());
        }
        if !(self.context.base_amplitude > 0.0 && self.context.base_sigma > 0.0) {
            return bad("context amplitude and sigma must be positive".into());
        }
        if let WeightMode::Fixed { room, object } = self.weights {
            if !(room.is_finite() && object.is_finite() && room >= 0.0 && object >= 0.0) {
                return bad(format!("fixed weights must be non-negative, got ({room}, {object})"));
            }
        }
        Ok(())
    }
}
