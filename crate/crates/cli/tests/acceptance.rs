//! Release acceptance checks. Prints one `[PASS]` or `[FAIL]` line per
//! criterion and exits non-zero if any of them failed.
//!
//! The batch-level checks drive the real `ctxnav` binary so they cover the
//! same code path a user runs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ctxnav_core::context::{gaussian_score, ContextField, ContextParams};
use ctxnav_core::explorer::{select_semantic_frontier, FailureKind};
use ctxnav_core::fusion::CueSources;
use ctxnav_core::knowledge::{compute_entropy, weights_from_entropy};
use ctxnav_core::sim::EpisodeResult;
use ctxnav_core::tour::{nearest_neighbor, plan_open_tour, tour_cost};
use ctxnav_core::value_map::{blend, pixel_confidence, Channel, ConeObservation, ValueLayer};
use ctxnav_core::world_model::{extract_frontiers, CellState, Frontier, GeoMap};
use ctxnav_core::{compute_metrics, KnowledgeBase, Metrics, Outcome, Point, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LOW_ENTROPY: [&str; 3] = ["toilet", "bed", "couch"];
const HIGH_ENTROPY: [&str; 3] = ["tv", "chair", "potted plant"];
const ABLATION_EPISODES: usize = 240;
const ABLATION_SEED: u64 = 11;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, started: Instant, budget: Duration, result: Result<String, String>) {
        let elapsed = started.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("[PASS] {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                self.failures += 1;
                println!("[FAIL] {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{what}: got {got}, want {want} ± {tol}"))
}

fn formulas() -> Result<String, String> {
    let fov = 79f64.to_radians();
    close(pixel_confidence(0.0, fov).unwrap(), 1.0, 1e-12, "confidence on axis")?;
    close(pixel_confidence(fov / 2.0, fov).unwrap(), 0.0, 1e-12, "confidence at edge")?;
    close(pixel_confidence(-fov / 2.0, fov).unwrap(), 0.0, 1e-12, "confidence at left edge")?;
    close(pixel_confidence(fov / 4.0, fov).unwrap(), 0.5, 1e-12, "confidence halfway")?;
    ensure(pixel_confidence(fov, fov).is_err(), || "bearing outside the cone accepted".into())?;

    let (v, c) = blend((0.8, 1.0), (0.4, 0.5)).unwrap();
    close(v, 2.0 / 3.0, 1e-9, "blended value")?;
    close(c, 5.0 / 6.0, 1e-9, "blended confidence")?;

    let params = ContextParams::default();
    let center = Point::new(2.0, 3.0);
    for cor in [0.2, 0.5, 0.9] {
        close(gaussian_score(center, cor, &params, center), params.base_amplitude * cor, 1e-12, "cue peak")?;
        let sigma = params.base_sigma + cor;
        let one_sigma = Point::new(center.x + sigma, center.y);
        let want = params.base_amplitude * cor * (-0.5f64).exp();
        close(gaussian_score(center, cor, &params, one_sigma), want, 1e-12, "cue at one sigma")?;
    }

    close(compute_entropy(&[0.1; 10]).unwrap(), 1.0, 1e-12, "uniform entropy")?;
    let mut one_hot = [0.0; 10];
    one_hot[3] = 1.0;
    close(compute_entropy(&one_hot).unwrap(), 0.0, 1e-12, "one-hot entropy")?;

    for k in 0..=1000 {
        let h = k as f64 / 1000.0;
        let w = weights_from_entropy(h);
        ensure(w.room + w.object == 1.0, || format!("weights at H={h} sum to {}", w.room + w.object))?;
    }
    Ok("confidence, blend, cue, entropy and weight formulas hold".into())
}

fn reference_entropies() -> Result<String, String> {
    let kb = KnowledgeBase::bundled();
    let reference =
        [("toilet", 0.043), ("bed", 0.124), ("couch", 0.203), ("tv", 0.462), ("chair", 0.883), ("potted plant", 0.915)];
    let mut worst: f64 = 0.0;
    for (name, want) in reference {
        let t = kb.target(name).map_err(|e| e.to_string())?;
        let h = compute_entropy(&t.room_dist).map_err(|e| e.to_string())?;
        close(h, want, 1e-3, name)?;
        worst = worst.max((h - want).abs());
    }
    Ok(format!("six targets, worst deviation {worst:.2e}"))
}

fn random_map(rng: &mut ChaCha8Rng) -> GeoMap {
    let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
    let mut map = GeoMap::new(w, h, 0.1, Point::new(0.0, 0.0));
    let p_free = rng.random_range(0.2..0.7);
    for r in 0..h {
        for c in 0..w {
            let u: f64 = rng.random();
            let state = if u < p_free {
                CellState::Free
            } else if u < p_free + (1.0 - p_free) / 2.0 {
                CellState::Unexplored
            } else {
                CellState::Occupied
            };
            map.set_state(c, r, state);
        }
    }
    map
}

fn reference_frontiers(map: &GeoMap) -> BTreeSet<Vec<usize>> {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let at = |c: i64, r: i64| (c >= 0 && r >= 0 && c < w && r < h).then(|| map.state(c as usize, r as usize));
    let boundary = |c: i64, r: i64| {
        at(c, r) == Some(CellState::Free)
            && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(dc, dr)| at(c + dc, r + dr) == Some(CellState::Unexplored))
    };
    let mut seen = vec![false; (w * h) as usize];
    let mut groups = BTreeSet::new();
    for r in 0..h {
        for c in 0..w {
            if seen[(r * w + c) as usize] || !boundary(c, r) {
                continue;
            }
            seen[(r * w + c) as usize] = true;
            let mut queue = VecDeque::from([(c, r)]);
            let mut group = Vec::new();
            while let Some((c, r)) = queue.pop_front() {
                group.push((r * w + c) as usize);
                for (dc, dr) in (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b))) {
                    let (nc, nr) = (c + dc, r + dr);
                    if at(nc, nr).is_some() && !seen[(nr * w + nc) as usize] && boundary(nc, nr) {
                        seen[(nr * w + nc) as usize] = true;
                        queue.push_back((nc, nr));
                    }
                }
            }
            group.sort_unstable();
            groups.insert(group);
        }
    }
    groups
}

fn frontier_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0);
    let mut total = 0;
    for case in 0..200 {
        let map = random_map(&mut rng);
        let got: BTreeSet<Vec<usize>> = extract_frontiers(&map, 1).into_iter().map(|f| f.cells).collect();
        let want = reference_frontiers(&map);
        ensure(got == want, || {
            format!(
                "map {case} ({}x{}): {} groups vs {} expected\n{}",
                map.width(),
                map.height(),
                got.len(),
                want.len(),
                map.to_text()
            )
        })?;
        total += want.len();
    }
    Ok(format!("200 maps, {total} frontiers, exact match"))
}

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn tour_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x75);
    let mut near_optimal = 0;
    let mut worst_ratio: f64 = 1.0;
    for case in 0..100 {
        let n = rng.random_range(1..=8);
        let points: Vec<(f64, f64)> =
            (0..=n).map(|_| (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0))).collect();
        let dist: Vec<Vec<f64>> =
            points.iter().map(|a| points.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect()).collect();

        let order = plan_open_tour(&dist);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        ensure(sorted == (1..=n).collect::<Vec<_>>(), || format!("instance {case}: {order:?} is not a permutation"))?;
        let cost = tour_cost(&dist, &order);
        let nn = tour_cost(&dist, &nearest_neighbor(&dist));
        ensure(cost <= nn + 1e-9, || format!("instance {case}: improved tour {cost} longer than greedy {nn}"))?;

        let mut best = f64::INFINITY;
        permutations(&mut (1..=n).collect(), 0, &mut |p| best = best.min(tour_cost(&dist, p)));
        let ratio = if best > 0.0 { cost / best } else { 1.0 };
        worst_ratio = worst_ratio.max(ratio);
        near_optimal += usize::from(ratio <= 1.10);
    }
    ensure(near_optimal >= 95, || format!("only {near_optimal}/100 within 10% of optimal"))?;
    Ok(format!("{near_optimal}/100 within 10% of optimal, worst ratio {worst_ratio:.3}"))
}

fn value_map_invariants() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4A);
    let cases = 2000;
    for case in 0..cases {
        let (v1, v2): (f64, f64) = (rng.random(), rng.random());
        let (c1, c2) = (rng.random_range(1e-6..=1.0), rng.random_range(1e-6..=1.0));
        let (v, c) = blend((v1, c1), (v2, c2)).ok_or_else(|| format!("case {case}: no result"))?;
        let tag = || format!("case {case}: ({v1},{c1}) + ({v2},{c2}) -> ({v},{c})");
        ensure((0.0..=1.0).contains(&v) && (0.0..=1.0).contains(&c), || format!("{} left [0,1]", tag()))?;
        ensure(v >= v1.min(v2) - 1e-12 && v <= v1.max(v2) + 1e-12, || format!("{} not convex", tag()))?;
        ensure(c >= c1.min(c2) - 1e-12 && c <= c1.max(c2) + 1e-12, || format!("{} confidence out of range", tag()))?;
        ensure(c >= (c1 + c2) / 2.0 - 1e-12, || format!("{} confidence below mean", tag()))?;

        let truth: f64 = rng.random();
        let seen = rng.random_range(0.05..=1.0);
        let (mut value, mut conf) = (rng.random::<f64>(), rng.random_range(1e-3..=1.0));
        let mut gap = (value - truth).abs();
        for _ in 0..20 {
            (value, conf) = blend((truth, seen), (value, conf)).unwrap();
            let next = (value - truth).abs();
            ensure(next <= gap + 1e-12, || format!("case {case}: gap grew {gap} -> {next}"))?;
            gap = next;
        }
    }
    Ok(format!("{cases} random cases"))
}

fn open_map(width: usize, height: usize) -> GeoMap {
    let mut map = GeoMap::new(width, height, 0.1, Point::new(0.0, 0.0));
    for r in 0..height {
        for c in 0..width {
            map.set_state(c, r, CellState::Free);
        }
    }
    map
}

fn single_frontier(id: usize, map: &GeoMap, at: Point) -> Frontier {
    let (c, r) = map.cell_of(at).unwrap();
    Frontier { id, center: map.cell_center(c, r), center_cell: (c, r), cells: vec![map.index(c, r)] }
}

fn argmax_crossover() -> Result<String, String> {
    let map = open_map(80, 30);
    let kb = KnowledgeBase::bundled();
    let chair = kb.target("chair").map_err(|e| e.to_string())?;
    let (room_side, object_side) = (Point::new(1.05, 1.55), Point::new(7.05, 1.55));
    let frontiers = [single_frontier(0, &map, room_side), single_frontier(1, &map, object_side)];

    let target = ValueLayer::new(Channel::Target, &map);
    let mut room = ValueLayer::new(Channel::Room, &map);
    let obs = ConeObservation { pose: Pose::new(room_side.x, room_side.y, 0.0), fov: 1.0, range: 1.0, score: 0.9 };
    room.apply_to_cells(&obs, &map, &frontiers[0].cells);
    let mut context = ContextField::new(ContextParams::default());
    let class = &chair.contextual_objects[0].name;
    context.register_detection(Pose::new(6.0, 1.5, 0.0), object_side, class, 1.0, chair);

    let cues = CueSources { map: &map, target: &target, room: &room, context: &context };
    let distances = [Some(3.0), Some(3.0)];
    let mut picks = Vec::new();
    for k in 0..=10 {
        let weights = weights_from_entropy(k as f64 / 10.0);
        let scores: Vec<f64> = frontiers
            .iter()
            .map(|f| cues.fuse(weights, f.center).map(|q| q.v_sem))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        picks.push(select_semantic_frontier(&frontiers, &scores, &distances).ok_or("no frontier selected")?);
    }
    let switches = picks.windows(2).filter(|w| w[0] != w[1]).count();
    let shape = picks.iter().map(|&p| if p == 0 { 'R' } else { 'O' }).collect::<String>();
    ensure(switches == 1 && picks[0] == 0 && picks[10] == 1, || format!("selection over H = 0..1 was {shape}"))?;
    Ok(format!("selection over H = 0..1: {shape}"))
}

fn synthetic(success: bool, path_length: f64, shortest_path: f64) -> EpisodeResult {
    EpisodeResult {
        target: "bed".into(),
        world_seed: 0,
        episode_seed: 0,
        success,
        false_positive_stop: false,
        outcome: if success { Outcome::Success } else { Outcome::Failure(FailureKind::StepBudget) },
        steps: 1,
        path_length,
        shortest_path,
        final_distance: 0.0,
        start: Pose::new(0.0, 0.0, 0.0),
        weights: weights_from_entropy(0.5),
        trace: Vec::new(),
    }
}

fn spl_cases() -> Result<String, String> {
    close(synthetic(true, 4.0, 4.0).spl_term(), 1.0, 1e-12, "p = l")?;
    close(synthetic(true, 8.0, 4.0).spl_term(), 0.5, 1e-12, "p = 2l")?;
    close(synthetic(false, 4.0, 4.0).spl_term(), 0.0, 0.0, "failure")?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x59);
    for batch in 0..200 {
        let results: Vec<EpisodeResult> = (0..rng.random_range(1..30))
            .map(|_| {
                let l = rng.random_range(0.0..10.0);
                synthetic(rng.random_bool(0.6), l + rng.random_range(0.0..10.0), l)
            })
            .collect();
        let m = compute_metrics(&results).map_err(|e| e.to_string())?;
        ensure(m.overall.spl <= m.overall.sr + 1e-12, || {
            format!("batch {batch}: SPL {} > SR {}", m.overall.spl, m.overall.sr)
        })?;
        for (t, row) in &m.per_target {
            ensure(row.spl <= row.sr + 1e-12, || format!("batch {batch} {t}: SPL {} > SR {}", row.spl, row.sr))?;
        }
    }
    Ok("hand cases exact, SPL <= SR over 200 random batches".into())
}

fn ctxnav(out: &Path, args: &[&str]) -> Result<Metrics, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_ctxnav"))
        .arg("run")
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("CTXNAV_OUT_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("ctxnav {args:?} failed: {}", String::from_utf8_lossy(&o.stderr)))?;
    let text = std::fs::read_to_string(out.join("metrics.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn ablation(scratch: &Path) -> Result<String, String> {
    let episodes = ABLATION_EPISODES.to_string();
    let seed = ABLATION_SEED.to_string();
    let settings: [(&str, Option<&str>); 4] =
        [("adaptive", None), ("room only", Some("1,0")), ("even", Some("0.5,0.5")), ("object only", Some("0,1"))];
    let mut rows = BTreeMap::new();
    for (i, (name, weights)) in settings.iter().enumerate() {
        let mut args = vec!["--episodes", &episodes, "--seed", &seed, "--no-traces"];
        if let Some(w) = weights {
            args.extend(["--fixed-weights", w]);
        }
        let m = ctxnav(&scratch.join(format!("ablation{i}")), &args)?;
        ensure(m.overall.episodes >= 200, || format!("{name} ran only {} episodes", m.overall.episodes))?;
        rows.insert(*name, (m.overall.sr, m.sr_over(&LOW_ENTROPY), m.sr_over(&HIGH_ENTROPY)));
    }
    let summary = rows
        .iter()
        .map(|(k, (sr, lo, hi))| format!("{k} SR {:.1} (low {:.1}, high {:.1})", sr * 100.0, lo * 100.0, hi * 100.0))
        .collect::<Vec<_>>()
        .join("; ");
    println!("       {summary}");

    let adaptive = rows["adaptive"].0;
    let margins: Vec<String> = ["room only", "even", "object only"]
        .iter()
        .filter(|k| adaptive - rows[*k].0 < 0.02 - 1e-12)
        .map(|k| format!("{k} margin {:+.1} points", (adaptive - rows[k].0) * 100.0))
        .collect();
    let mut problems = Vec::new();
    if !margins.is_empty() {
        problems.push(format!("adaptive is not 2 points ahead: {}", margins.join(", ")));
    }
    if rows["room only"].1 < rows["object only"].1 {
        problems.push("room-only trails object-only on low-entropy targets".into());
    }
    if rows["object only"].2 < rows["room only"].2 {
        problems.push("object-only trails room-only on high-entropy targets".into());
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!("{} episodes per setting, all orderings hold", ABLATION_EPISODES))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(scratch: &Path) -> Result<String, String> {
    let (a, b) = (scratch.join("repeat_a"), scratch.join("repeat_b"));
    let args = ["--episodes", "20", "--seed", "5"];
    ctxnav(&a, &args)?;
    ctxnav(&b, &args)?;
    let (fa, fb) = (files_under(&a), files_under(&b));
    ensure(fa == fb, || "the two runs wrote different file sets".into())?;
    ensure(fa.iter().filter(|p| p.starts_with("traces")).count() == 20, || "expected 20 trace files".into())?;
    for rel in &fa {
        let same = std::fs::read(a.join(rel)).ok() == std::fs::read(b.join(rel)).ok();
        ensure(same, || format!("{} differs between runs", rel.display()))?;
    }
    Ok(format!("{} files byte-identical", fa.len()))
}

fn multi_view(scratch: &Path) -> Result<String, String> {
    let base = ["--episodes", "60", "--seed", "3", "--fp-rate", "0.3", "--no-traces"];
    let mut stops = Vec::new();
    for votes in ["1", "2"] {
        let mut args = base.to_vec();
        args.extend(["--vote-min", votes]);
        stops.push(ctxnav(&scratch.join(format!("votes{votes}")), &args)?.overall.false_positive_stops);
    }
    ensure(stops[1] < stops[0], || format!("false-positive stops: {} with one view, {} with two", stops[0], stops[1]))?;
    Ok(format!("false-positive stops drop from {} to {} on 60 matched episodes", stops[0], stops[1]))
}

fn main() {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let mut report = Report { failures: 0 };
    let secs = Duration::from_secs;

    type Check<'a> = Box<dyn Fn() -> Result<String, String> + 'a>;
    let checks: Vec<(&str, Duration, Check)> = vec![
        ("formula suite", secs(1), Box::new(formulas)),
        ("reference entropies", secs(1), Box::new(reference_entropies)),
        ("frontier extraction vs brute force", secs(10), Box::new(frontier_oracle)),
        ("tour quality vs brute force", secs(30), Box::new(tour_oracle)),
        ("value-map update invariants", secs(5), Box::new(value_map_invariants)),
        ("frontier choice crosses over once with entropy", secs(1), Box::new(argmax_crossover)),
        ("SPL hand cases and SPL <= SR", secs(1), Box::new(spl_cases)),
        ("cue-weight ablation", secs(600), Box::new(|| ablation(scratch.path()))),
        ("repeat runs are byte-identical", secs(60), Box::new(|| determinism(scratch.path()))),
        ("multi-view voting cuts false-positive stops", secs(120), Box::new(|| multi_view(scratch.path()))),
    ];
    for (name, budget, check) in checks {
        let started = Instant::now();
        let result = check();
        report.check(name, started, budget, result);
    }

    println!("{} failed", report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
