use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctxnav_core::world_model::{CellState, GeoMap};
use serde_json::Value;

fn ctxnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxnav")).args(args).env_remove("CTXNAV_OUT_DIR").output().expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let defaults = [("--episodes", "6"), ("--seed", "1"), ("--max-steps", "60"), ("--workers", "1")];
    let mut args = vec!["run", "--out", path_arg(out)];
    for (flag, value) in defaults {
        if !extra.contains(&flag) {
            args.extend([flag, value]);
        }
    }
    args.extend_from_slice(extra);
    ctxnav(&args)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn read_csv(p: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(p).unwrap().lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

fn write_bundled_with(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut doc: Value = serde_json::from_str(ctxnav_core::KnowledgeBase::bundled_json()).unwrap();
    edit(&mut doc);
    let path = dir.join("knowledge.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

#[test]
fn run_writes_metrics_with_per_target_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = small_run(&out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let m = read_json(&out.join("metrics.json"));
    assert_eq!(m["episodes"], 6);
    let (sr, spl) = (m["sr"].as_f64().unwrap(), m["spl"].as_f64().unwrap());
    assert!((0.0..=1.0).contains(&sr) && spl <= sr + 1e-12);
    let per_target = m["per_target"].as_object().unwrap();
    assert_eq!(per_target.len(), 6);
    for row in per_target.values() {
        assert_eq!(row["episodes"], 1);
        assert!(row.get("sr").is_some() && row.get("spl").is_some());
    }
    assert_eq!(read_json(&out.join("episodes.json")).as_array().unwrap().len(), 6);
    assert!(out.join("traces/episode_0000.tsv").exists());
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_run(&a, &[]).status.success());
    assert!(small_run(&b, &["--workers", "2"]).status.success());
    for file in ["metrics.json", "episodes.json", "traces/episode_0003.tsv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn fixed_weights_override_every_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(small_run(&out, &["--fixed-weights", "0.5,0.5", "--max-steps", "5"]).status.success());
    for ep in read_json(&out.join("episodes.json")).as_array().unwrap() {
        assert_eq!(ep["weights"]["room"], 0.5);
        assert_eq!(ep["weights"]["object"], 0.5);
    }
}

#[test]
fn output_directory_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_ctxnav"))
        .args(["run", "--episodes", "1", "--max-steps", "5", "--no-traces"])
        .env("CTXNAV_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("metrics.json").exists());
    assert!(!out.join("traces").exists());
}

#[test]
fn invalid_input_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad_knowledge = write_bundled_with(dir.path(), |d| d["targets"][0]["entropy"] = 0.9.into());
    let cases: Vec<Vec<&str>> = vec![
        vec!["--fixed-weights", "0.5"],
        vec!["--episodes", "zero"],
        vec!["--targets", "unicorn"],
        vec!["--tau-sem", "-1"],
        vec!["--knowledge", path_arg(&bad_knowledge)],
        vec!["--bogus-flag"],
    ];
    for (i, extra) in cases.iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = small_run(&out, extra);
        assert!(!o.status.success(), "{extra:?} was accepted: {}", String::from_utf8_lossy(&o.stdout));
        assert!(!o.stderr.is_empty());
        assert!(!out.exists(), "{extra:?} left output behind");
    }
}

#[test]
fn validate_knowledge_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("bundled.json");
    std::fs::write(&good, ctxnav_core::KnowledgeBase::bundled_json()).unwrap();
    let o = ctxnav(&["validate-knowledge", path_arg(&good)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("potted plant"));

    let short = write_bundled_with(dir.path(), |d| {
        let dist = d["targets"][1]["room_distribution"].as_object_mut().unwrap();
        let p = dist["bedroom"].as_f64().unwrap();
        dist.insert("bedroom".into(), (p - 0.1).into());
    });
    let o = ctxnav(&["validate-knowledge", path_arg(&short)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`bed`") && err.contains("room_distribution"), "{err}");

    let drift = write_bundled_with(dir.path(), |d| {
        let h = d["targets"][3]["entropy"].as_f64().unwrap();
        d["targets"][3]["entropy"] = (h + 2e-6).into();
    });
    let o = ctxnav(&["validate-knowledge", path_arg(&drift)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("entropy"));

    let o = ctxnav(&["validate-knowledge", path_arg(&dir.path().join("missing.json"))]);
    assert!(!o.status.success());
}

#[test]
fn gen_world_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    assert!(ctxnav(&["gen-world", "--seed", "9", "--out", path_arg(&a)]).status.success());
    assert!(ctxnav(&["gen-world", "--seed", "9", "--out", path_arg(&b)]).status.success());
    assert!(ctxnav(&["gen-world", "--seed", "10", "--out", path_arg(&c)]).status.success());
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn run_on_a_saved_world() {
    let dir = tempfile::tempdir().unwrap();
    let world = dir.path().join("world.json");
    assert!(ctxnav(&["gen-world", "--seed", "4", "--rows", "3", "--cols", "3", "--out", path_arg(&world)])
        .status
        .success());
    let out = dir.path().join("out");
    let o = small_run(&out, &["--world", path_arg(&world), "--episodes", "2", "--targets", "bed"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("metrics.json"))["episodes"], 2);
}

fn dump(trace: &Path, step: usize, out: &Path) -> Output {
    ctxnav(&["dump-maps", "--trace", path_arg(trace), "--step", &step.to_string(), "--out", path_arg(out)])
}

#[test]
fn dump_maps_layers_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(small_run(&run, &["--episodes", "1", "--targets", "chair"]).status.success());
    let trace = run.join("traces/episode_0000.tsv");
    let ep = &read_json(&run.join("episodes.json"))[0];
    let steps = ep["steps"].as_u64().unwrap() as usize;
    let (wr, wo) = (ep["weights"]["room"].as_f64().unwrap(), ep["weights"]["object"].as_f64().unwrap());

    let fresh = dir.path().join("step0");
    assert!(dump(&trace, 0, &fresh).status.success());
    for layer in ["v_target", "v_room", "v_object", "v_sem"] {
        let max = read_csv(&fresh.join(format!("{layer}.csv"))).into_iter().flatten().fold(0.0, f64::max);
        assert!(max < 1e-9, "{layer} at step 0 has {max}");
    }

    let later = dir.path().join("later");
    let o = dump(&trace, steps.min(40), &later);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(later.join("geomap.txt")).unwrap();
    let map = GeoMap::from_text(&text).unwrap();
    assert_eq!(map.to_text(), text);

    let [t, r, obj, sem] =
        ["v_target", "v_room", "v_object", "v_sem"].map(|l| read_csv(&later.join(format!("{l}.csv"))));
    assert_eq!(sem.len(), map.height());
    let mut nonzero = false;
    for row in 0..map.height() {
        assert_eq!(sem[row].len(), map.width());
        for col in 0..map.width() {
            let expect = if map.state(col, row) == CellState::Occupied {
                0.0
            } else {
                t[row][col] + wr * r[row][col] + wo * obj[row][col]
            };
            assert!((sem[row][col] - expect).abs() < 5e-6, "cell ({col},{row})");
            nonzero |= sem[row][col] > 0.0;
        }
    }
    assert!(nonzero);
    for png in ["v_target.png", "v_sem.png"] {
        assert!(later.join(png).exists());
    }
    assert!(std::fs::read_to_string(later.join("frontiers.csv")).unwrap().starts_with("id,x,y,cells,v_sem"));
}

#[test]
fn dump_maps_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(small_run(&run, &["--episodes", "1", "--max-steps", "10"]).status.success());
    let trace = run.join("traces/episode_0000.tsv");
    let out = dir.path().join("dump");
    assert!(!dump(&trace, 500, &out).status.success());
    assert!(!dump(&dir.path().join("nope.tsv"), 0, &out).status.success());
    assert!(!out.exists());
}
