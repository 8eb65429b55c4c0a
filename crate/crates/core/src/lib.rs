//! Object-goal navigation with context-adaptive semantic value maps.
//!
//! An agent explores an unknown indoor environment looking for an object
//! class. Three cues are fused into one score per map cell: image-text
//! similarity to the target, similarity to the room the target usually
//! occupies, and Gaussian fields around detected co-occurring objects. The
//! room and object cues are weighted by the normalized entropy of the
//! target's room distribution, so room-predictable targets lean on rooms
//! and room-agnostic ones lean on nearby objects.
//!
//! The crate also ships a deterministic gridworld simulator with a
//! synthetic perception oracle, an episode runner and SR/SPL metrics.

pub mod batch;
pub mod config;
pub mod context;
pub mod error;
pub mod explorer;
pub mod fusion;
pub mod geometry;
pub mod knowledge;
pub mod metrics;
pub mod observation;
pub mod raycast;
pub mod sim;
pub mod tour;
pub mod value_map;
pub mod world_model;

pub use batch::{run_batch, run_batch_sequential, run_batch_with_workers, BatchEpisode, BatchSpec, BatchWorlds};
pub use config::{PolicyConfig, WeightMode};
pub use error::{NavError, Result};
pub use explorer::{Explorer, Outcome, Phase};
pub use geometry::{Point, Pose};
pub use knowledge::{CueWeights, KnowledgeBase, TargetKnowledge};
pub use metrics::{compute_metrics, Metrics};
pub use observation::{Action, Detection, Observation};
