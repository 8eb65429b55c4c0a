//! Batches of independent episodes. Each episode derives its world and
//! episode seeds from the batch seed and its index, so results do not
//! depend on scheduling.

use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PolicyConfig;
use crate::error::{NavError, Result};
use crate::knowledge::KnowledgeBase;
use crate::sim::{
    format_trace, generate_world, run_episode, EpisodeResult, EpisodeSetup, GenerationSpec, OracleConfig, SensorConfig,
    TraceHeader, World, WorldSource,
};

/// Worlds for a batch: one generated world per episode, or one shared file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BatchWorlds {
    Generated { spec: GenerationSpec },
    File { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub worlds: BatchWorlds,
    pub targets: Vec<String>,
    pub episodes: usize,
    pub seed: u64,
    pub policy: PolicyConfig,
    pub oracle: OracleConfig,
    pub sensor: SensorConfig,
    /// Knowledge file recorded in trace headers; `None` for the bundled one.
    #[serde(default)]
    pub knowledge_path: Option<String>,
}

impl BatchSpec {
    pub fn generated(targets: &[&str], episodes: usize, seed: u64) -> Self {
        Self {
            worlds: BatchWorlds::Generated { spec: GenerationSpec::default() },
            targets: targets.iter().map(|t| t.to_string()).collect(),
            episodes,
            seed,
            policy: PolicyConfig::default(),
            oracle: OracleConfig::default(),
            sensor: SensorConfig::default(),
            knowledge_path: None,
        }
    }

    pub fn validate(&self, kb: &KnowledgeBase) -> Result<()> {
        if self.targets.is_empty() {
            return Err(NavError::Config("at least one target is required".into()));
        }
        for t in &self.targets {
            kb.target(t)?;
        }
        if self.episodes == 0 {
            return Err(NavError::Config("episode count must be at least 1".into()));
        }
        self.policy.validate()?;
        self.oracle.validate()?;
        self.sensor.validate()
    }
}

/// One finished episode with the header needed to replay it.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEpisode {
    pub header: TraceHeader,
    pub result: EpisodeResult,
}

impl BatchEpisode {
    pub fn trace_text(&self) -> String {
        format_trace(&self.header, &self.result.trace)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// World and episode seeds of episode `index`.
pub fn episode_seeds(batch_seed: u64, index: usize) -> (u64, u64) {
    let base = splitmix64(batch_seed ^ splitmix64(index as u64));
    (base, splitmix64(base ^ 0x5EED))
}

enum Worlds {
    Generated(GenerationSpec),
    Shared(World, String),
}

fn prepare(kb: &KnowledgeBase, spec: &BatchSpec) -> Result<Worlds> {
    spec.validate(kb)?;
    Ok(match &spec.worlds {
        BatchWorlds::Generated { spec } => Worlds::Generated(spec.clone()),
        BatchWorlds::File { path } => Worlds::Shared(World::load(Path::new(path))?, path.clone()),
    })
}

fn run_one(kb: &KnowledgeBase, spec: &BatchSpec, worlds: &Worlds, index: usize) -> Result<BatchEpisode> {
    let (world_seed, episode_seed) = episode_seeds(spec.seed, index);
    let target = spec.targets[index % spec.targets.len()].clone();
    let setup = EpisodeSetup {
        target,
        seed: episode_seed,
        start: None,
        policy: spec.policy.clone(),
        oracle: spec.oracle,
        sensor: spec.sensor,
    };
    let (result, source) = match worlds {
        Worlds::Generated(gen) => {
            let world = generate_world(gen, kb, world_seed)?;
            (run_episode(&world, kb, &setup)?, WorldSource::Generated { spec: gen.clone(), seed: world_seed })
        }
        Worlds::Shared(world, path) => (run_episode(world, kb, &setup)?, WorldSource::File { path: path.clone() }),
    };
    let header = TraceHeader { world: source, setup, weights: result.weights, knowledge: spec.knowledge_path.clone() };
    Ok(BatchEpisode { header, result })
}

/// Runs every episode on the calling thread.
pub fn run_batch_sequential(kb: &KnowledgeBase, spec: &BatchSpec) -> Result<Vec<BatchEpisode>> {
    let worlds = prepare(kb, spec)?;
    (0..spec.episodes).map(|i| run_one(kb, spec, &worlds, i)).collect()
}

/// Runs episodes across the current rayon pool. Output order follows the
/// episode index.
#[cfg(feature = "parallel")]
pub fn run_batch_parallel(kb: &KnowledgeBase, spec: &BatchSpec) -> Result<Vec<BatchEpisode>> {
    let worlds = prepare(kb, spec)?;
    (0..spec.episodes).into_par_iter().map(|i| run_one(kb, spec, &worlds, i)).collect()
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn run_batch(kb: &KnowledgeBase, spec: &BatchSpec) -> Result<Vec<BatchEpisode>> {
    #[cfg(feature = "parallel")]
    {
        run_batch_parallel(kb, spec)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(kb, spec)
    }
}

/// Runs on a dedicated pool of `workers` threads, or on the global pool
/// when `None`. Without the `parallel` feature the batch runs on the
/// calling thread whatever the worker count.
pub fn run_batch_with_workers(
    kb: &KnowledgeBase,
    spec: &BatchSpec,
    workers: Option<usize>,
) -> Result<Vec<BatchEpisode>> {
    if workers == Some(0) {
        return Err(NavError::Config("worker count must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        match workers {
            Some(1) => run_batch_sequential(kb, spec),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| NavError::Config(format!("cannot start worker pool: {e}")))?
                .install(|| run_batch_parallel(kb, spec)),
            None => run_batch_parallel(kb, spec),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(kb, spec)
    }
}
