//! What the agent receives each step and what it may do.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Pose};
use crate::world_model::DepthScan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Forward,
    RotateLeft,
    RotateRight,
    Stop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Forward => "forward",
            Action::RotateLeft => "rotate_left",
            Action::RotateRight => "rotate_right",
            Action::Stop => "stop",
        })
    }
}

impl std::str::FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" => Ok(Action::Forward),
            "rotate_left" => Ok(Action::RotateLeft),
            "rotate_right" => Ok(Action::RotateRight),
            "stop" => Ok(Action::Stop),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

/// An object detection projected to the map plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_name: String,
    pub position: Point,
    pub confidence: f64,
}

/// Everything the perception stack reports for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub pose: Pose,
    pub scan: DepthScan,
    /// Image-text similarity for the target prompt.
    pub target_score: f64,
    /// Image-text similarity for the contextual-room prompt.
    pub room_score: f64,
    pub detections: Vec<Detection>,
}
