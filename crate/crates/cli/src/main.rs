use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ctxnav_core::batch::{run_batch_with_workers, BatchSpec, BatchWorlds};
use ctxnav_core::knowledge::KnowledgeBase;
use ctxnav_core::sim::{generate_world, GenerationSpec, OracleConfig, SensorConfig, Trace};
use ctxnav_core::value_map::{grid_csv, write_grid_png};
use ctxnav_core::{compute_metrics, NavError, PolicyConfig, WeightMode};
use serde::Deserialize;

mod dump;

#[derive(Parser)]
#[command(name = "ctxnav", version, about = "Object-goal navigation with context-adaptive semantic value maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of episodes and write metrics and traces.
    Run(Box<RunArgs>),
    /// Generate a world file.
    GenWorld(GenWorldArgs),
    /// Check a knowledge file and print every violation.
    ValidateKnowledge { path: PathBuf },
    /// Replay a trace to a step and write the map layers.
    DumpMaps(DumpArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "CTXNAV_OUT_DIR")]
    out: Option<PathBuf>,
    /// Use this world file for every episode instead of generated worlds.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Knowledge file; the bundled one when absent.
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Comma-separated target classes, cycled over episodes.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    tau_sem: Option<f64>,
    #[arg(long)]
    viewpoints: Option<usize>,
    #[arg(long)]
    vote_min: Option<usize>,
    #[arg(long)]
    conf_min: Option<f64>,
    #[arg(long)]
    success_distance: Option<f64>,
    #[arg(long)]
    replan_interval: Option<usize>,
    /// Gaussian base amplitude of object cues.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Gaussian base standard deviation of object cues, meters.
    #[arg(long)]
    sigma: Option<f64>,
    /// Fixed `room,object` weights instead of entropy-adaptive ones.
    #[arg(long, value_parser = parse_weights)]
    fixed_weights: Option<(f64, f64)>,
    /// Drop the contextual-room cue.
    #[arg(long)]
    no_rooms: bool,
    /// Drop the contextual-object cue.
    #[arg(long)]
    no_objects: bool,
    #[arg(long)]
    fp_rate: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    detect_prob: Option<f64>,
    /// Skip writing per-episode trace files.
    #[arg(long)]
    no_traces: bool,
}

#[derive(Args)]
struct GenWorldArgs {
    #[arg(long)]
    seed: u64,
    /// Output world file.
    #[arg(long)]
    out: PathBuf,
    /// TOML file with a `[generation]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Also print an ASCII plan of the world.
    #[arg(long)]
    ascii: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Number of executed steps to replay.
    #[arg(long)]
    step: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_weights(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `room,object`")?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// The `[run]` table of a config file.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    episodes: Option<usize>,
    seed: Option<u64>,
    targets: Option<Vec<String>>,
    world: Option<PathBuf>,
    knowledge: Option<PathBuf>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    traces: Option<bool>,
}

/// A run configuration file.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    run: RunSection,
    policy: PolicyConfig,
    oracle: OracleConfig,
    sensor: SensorConfig,
    generation: GenerationSpec,
}

const DEFAULT_TARGETS: [&str; 6] = ["toilet", "bed", "couch", "tv", "chair", "potted plant"];

fn read_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_knowledge(path: Option<&Path>) -> Result<KnowledgeBase> {
    match path {
        Some(p) => KnowledgeBase::load(p).with_context(|| format!("loading knowledge file {}", p.display())),
        None => Ok(KnowledgeBase::bundled()),
    }
}

struct ResolvedRun {
    spec: BatchSpec,
    out: PathBuf,
    workers: Option<usize>,
    traces: bool,
    kb: KnowledgeBase,
}

fn resolve_run(args: RunArgs) -> Result<ResolvedRun> {
    let mut cfg = read_config(args.config.as_deref())?;
    let run = &mut cfg.run;
    let policy = &mut cfg.policy;
    let oracle = &mut cfg.oracle;

    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(policy.max_steps, args.max_steps);
    set!(policy.tau_sem, args.tau_sem);
    set!(policy.viewpoints, args.viewpoints);
    set!(policy.vote_min, args.vote_min);
    set!(policy.conf_min, args.conf_min);
    set!(policy.success_distance, args.success_distance);
    set!(policy.replan_interval, args.replan_interval);
    set!(policy.context.base_amplitude, args.amplitude);
    set!(policy.context.base_sigma, args.sigma);
    if let Some((room, object)) = args.fixed_weights {
        policy.weights = WeightMode::Fixed { room, object };
    }
    if args.no_rooms {
        policy.use_rooms = false;
    }
    if args.no_objects {
        policy.use_objects = false;
    }
    set!(oracle.false_positive_rate, args.fp_rate);
    set!(oracle.noise_std, args.noise_std);
    set!(oracle.detect_prob, args.detect_prob);

    let knowledge = args.knowledge.or(run.knowledge.take());
    let kb = load_knowledge(knowledge.as_deref())?;
    let out = args.out.or(run.out.take()).unwrap_or_else(|| PathBuf::from("runs"));
    let world = args.world.or(run.world.take());
    let targets =
        args.targets.or(run.targets.take()).unwrap_or_else(|| DEFAULT_TARGETS.iter().map(|t| t.to_string()).collect());
    let worlds = match world {
        Some(p) => BatchWorlds::File { path: p.to_string_lossy().into_owned() },
        None => BatchWorlds::Generated { spec: cfg.generation },
    };
    let spec = BatchSpec {
        worlds,
        targets,
        episodes: args.episodes.or(run.episodes).unwrap_or(10),
        seed: args.seed.or(run.seed).unwrap_or(1),
        policy: cfg.policy,
        oracle: cfg.oracle,
        sensor: cfg.sensor,
        knowledge_path: knowledge.map(|p| p.to_string_lossy().into_owned()),
    };
    spec.validate(&kb)?;
    let workers = args.workers.or(run.workers);
    if workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    Ok(ResolvedRun { spec, out, workers, traces: run.traces.unwrap_or(true) && !args.no_traces, kb })
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let r = resolve_run(args)?;
    let episodes = run_batch_with_workers(&r.kb, &r.spec, r.workers)?;
    let results: Vec<_> = episodes.iter().map(|e| e.result.clone()).collect();
    let metrics = compute_metrics(&results)?;

    std::fs::create_dir_all(&r.out).with_context(|| format!("creating {}", r.out.display()))?;
    write(&r.out.join("metrics.json"), metrics.to_json())?;
    let summaries: Vec<serde_json::Value> = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let res = &e.result;
            serde_json::json!({
                "episode": i,
                "target": res.target,
                "world_seed": res.world_seed,
                "episode_seed": res.episode_seed,
                "success": res.success,
                "false_positive_stop": res.false_positive_stop,
                "outcome": res.outcome,
                "steps": res.steps,
                "path_length": res.path_length,
                "shortest_path": res.shortest_path,
                "spl": res.spl_term(),
                "weights": res.weights,
            })
        })
        .collect();
    write(&r.out.join("episodes.json"), serde_json::to_string_pretty(&summaries)? + "\n")?;
    if r.traces {
        let dir = r.out.join("traces");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, e) in episodes.iter().enumerate() {
            write(&dir.join(format!("episode_{i:04}.tsv")), e.trace_text())?;
        }
    }
    let m = &metrics.overall;
    println!("episodes {}  SR {:.3}  SPL {:.3}", m.episodes, m.sr, m.spl);
    for (target, t) in &metrics.per_target {
        println!("  {target:<14} n={:<4} SR {:.3}  SPL {:.3}", t.episodes, t.sr, t.spl);
    }
    println!("wrote {}", r.out.join("metrics.json").display());
    Ok(())
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct GenerationFile {
    generation: GenerationSpec,
}

fn cmd_gen_world(args: GenWorldArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<GenerationFile>(&text).with_context(|| format!("parsing {}", p.display()))?.generation
        }
        None => GenerationSpec::default(),
    };
    if let Some(r) = args.rows {
        spec.rows = r;
    }
    if let Some(c) = args.cols {
        spec.cols = c;
    }
    let kb = load_knowledge(args.knowledge.as_deref())?;
    let world = generate_world(&spec, &kb, args.seed)?;
    write(&args.out, world.to_json())?;
    if args.ascii {
        print!("{}", world.render_ascii());
    }
    let (w, h) = world.extent();
    println!(
        "world seed {} : {} rooms, {} objects, {:.1} x {:.1} m -> {}",
        args.seed,
        world.rooms.len(),
        world.objects.len(),
        w,
        h,
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<bool> {
    match KnowledgeBase::load(path) {
        Ok(kb) => {
            println!("{}: valid ({} targets, {} rooms)", path.display(), kb.targets.len(), kb.catalog.len());
            for name in kb.target_names() {
                let t = &kb.targets[name];
                println!("  {name:<14} H = {:.3}  contextual room: {}", t.entropy, t.contextual_room);
            }
            Ok(true)
        }
        Err(NavError::Knowledge(violations)) => {
            eprintln!("{}: {} violation(s)", path.display(), violations.len());
            for v in violations {
                eprintln!("  - {v}");
            }
            Ok(false)
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            Ok(false)
        }
    }
}

fn cmd_dump(args: DumpArgs) -> Result<()> {
    let trace = Trace::load(&args.trace)?;
    let kb = load_knowledge(trace.header.knowledge.as_deref().map(Path::new))?;
    let explorer = trace.replay(&kb, args.step)?;
    let files = dump::layer_files(&explorer, trace.header.setup.policy.min_frontier_cells);
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (w, h) = (explorer.map().width(), explorer.map().height());
    for (name, data) in &files.layers {
        write(&args.out.join(format!("{name}.csv")), grid_csv(w, h, data))?;
        let scale = data.iter().cloned().fold(1.0, f64::max);
        write_grid_png(&args.out.join(format!("{name}.png")), w, h, data, scale)?;
    }
    write(&args.out.join("geomap.txt"), explorer.map().to_text())?;
    write(&args.out.join("frontiers.csv"), files.frontiers)?;
    write(&args.out.join("context_nodes.csv"), explorer.context().to_csv())?;
    println!("wrote step {} layers to {}", args.step, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(*a).map(|_| true),
        Command::GenWorld(a) => cmd_gen_world(a).map(|_| true),
        Command::ValidateKnowledge { path } => cmd_validate(&path),
        Command::DumpMaps(a) => cmd_dump(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
