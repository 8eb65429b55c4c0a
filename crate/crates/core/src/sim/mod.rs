//! Deterministic gridworld: procedural worlds, synthetic perception and the
//! episode loop.

pub mod episode;
pub mod oracle;
pub mod world;

pub use episode::{
    distance_to_target, format_trace, parse_trace, run_episode, run_episode_until, shortest_path_to_target,
    Environment, EpisodeResult, EpisodeSetup, SimEnvironment, Trace, TraceHeader, TraceStep, WorldSource,
};
pub use oracle::{
    detect, object_visible, perceive, render_view, vlm_similarity, OracleConfig, Prompt, SensorConfig, View,
};
pub use world::{
    generate_world, CellRect, GenerationSpec, PlacementRule, PlacementTable, Room, World, WorldObject,
    WORLD_SCHEMA_VERSION,
};
