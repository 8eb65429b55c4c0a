//! The knowledge file is the hand-off point between the offline extractor and
//! the navigator. These tests pin the schema from the consumer's side.

use ctxnav_core::knowledge::{compute_entropy, weights_for, Violation};
use ctxnav_core::{KnowledgeBase, NavError};
use serde_json::{json, Value};

const PUBLISHED: [(&str, f64); 6] =
    [("toilet", 0.043), ("bed", 0.124), ("couch", 0.203), ("tv", 0.462), ("chair", 0.883), ("potted plant", 0.915)];

fn bundled_value() -> Value {
    serde_json::from_str(KnowledgeBase::bundled_json()).unwrap()
}

fn target_mut<'a>(doc: &'a mut Value, name: &str) -> &'a mut Value {
    doc["targets"].as_array_mut().unwrap().iter_mut().find(|t| t["target"] == name).unwrap()
}

fn violations_of(doc: &Value) -> Vec<Violation> {
    match KnowledgeBase::from_json_str(&doc.to_string()) {
        Err(NavError::Knowledge(v)) => v,
        Err(other) => panic!("expected validation failure, got {other}"),
        Ok(_) => panic!("mutated file was accepted"),
    }
}

fn has(violations: &[Violation], target: &str, field: &str) -> bool {
    violations.iter().any(|v| v.target.as_deref() == Some(target) && v.field == field)
}

/// What an extractor writes: no fit block, a model name in provenance,
/// and probabilities in whatever key order it happened to produce.
fn emitted_file() -> Value {
    let rooms = [
        "bathroom",
        "bedroom",
        "living room",
        "kitchen",
        "dining room",
        "hallway",
        "office",
        "closet",
        "laundry room",
        "garage",
    ];
    type Answer<'a> = (&'a str, [f64; 10], &'a [(&'a str, f64)]);
    let answers: [Answer; 3] = [
        ("toilet", [0.94, 0.01, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.04, 0.0], &[("sink", 0.8), ("bathtub", 0.65)]),
        ("chair", [0.1; 10], &[("table", 0.9), ("desk", 0.7), ("tv", 0.3)]),
        ("tv", [0.0, 0.2, 0.5, 0.1, 0.05, 0.0, 0.1, 0.0, 0.0, 0.05], &[("tv stand", 0.9), ("couch", 0.6)]),
    ];
    let targets: Vec<Value> = answers
        .iter()
        .map(|(name, dist, objects)| {
            let best = dist.iter().enumerate().fold(0, |b, (k, &p)| if p > dist[b] { k } else { b });
            json!({
                "target": name,
                "room_distribution": rooms.iter().zip(dist).rev()
                    .map(|(r, p)| (r.to_string(), json!(p)))
                    .collect::<serde_json::Map<_, _>>(),
                "contextual_room": rooms[best],
                "contextual_objects": objects.iter()
                    .map(|(n, c)| json!({"name": n, "correlation": c}))
                    .collect::<Vec<_>>(),
                "entropy": compute_entropy(dist).unwrap(),
            })
        })
        .collect();
    json!({
        "schema_version": 1,
        "provenance": "replayed responses, model example-llm-2024",
        "rooms": rooms,
        "targets": targets,
    })
}

#[test]
fn bundled_file_validates_with_six_targets() {
    let kb = KnowledgeBase::from_json_str(KnowledgeBase::bundled_json()).unwrap();
    let names: Vec<&str> = PUBLISHED.iter().map(|(n, _)| *n).collect();
    assert_eq!(kb.target_names(), names.as_slice());
    assert_eq!(kb.catalog.len(), 10);
}

#[test]
fn bundled_entropies_match_recomputation_and_reference() {
    let kb = KnowledgeBase::bundled();
    for (name, reference) in PUBLISHED {
        let t = kb.target(name).unwrap();
        let h = compute_entropy(&t.room_dist).unwrap();
        assert!((h - t.entropy).abs() < 1e-9, "{name}: stored {} recomputed {h}", t.entropy);
        assert!((t.entropy - reference).abs() < 1e-3, "{name}: {} vs {reference}", t.entropy);
        let w = weights_for(t);
        assert_eq!(w.room + w.object, 1.0);
    }
}

#[test]
fn bundled_file_carries_every_schema_field() {
    let doc = bundled_value();
    for key in ["schema_version", "provenance", "rooms", "targets"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["schema_version"], 1);
    for t in doc["targets"].as_array().unwrap() {
        for key in ["target", "room_distribution", "contextual_room", "contextual_objects", "entropy"] {
            assert!(t.get(key).is_some(), "{} missing {key}", t["target"]);
        }
        assert!(t["contextual_objects"].as_array().unwrap().len() <= 8);
    }
}

#[test]
fn emitted_file_is_accepted_and_round_trips() {
    let doc = emitted_file();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("knowledge.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();

    let kb = KnowledgeBase::load(&path).unwrap();
    assert_eq!(kb.target_names(), ["toilet", "chair", "tv"]);
    assert!(kb.provenance.contains("example-llm-2024"));
    assert!((kb.target("chair").unwrap().entropy - 1.0).abs() < 1e-9);
    for name in kb.target_names() {
        let t = kb.target(name).unwrap();
        assert!((compute_entropy(&t.room_dist).unwrap() - t.entropy).abs() < 1e-9);
    }

    let again = KnowledgeBase::from_json_str(&kb.to_json()).unwrap();
    assert_eq!(again, kb);
    assert_eq!(again.to_json(), kb.to_json());
}

#[test]
fn distribution_not_summing_to_one_names_the_target() {
    let mut doc = bundled_value();
    let t = target_mut(&mut doc, "bed");
    let p = t["room_distribution"]["bedroom"].as_f64().unwrap();
    t["room_distribution"]["bedroom"] = json!(p - 0.1);
    let v = violations_of(&doc);
    assert!(has(&v, "bed", "room_distribution"), "{v:?}");
    let err = NavError::Knowledge(v).to_string();
    assert!(err.contains("bed") && err.contains("room_distribution"), "{err}");
}

#[test]
fn correlation_above_one_is_rejected() {
    let mut doc = bundled_value();
    target_mut(&mut doc, "chair")["contextual_objects"][0]["correlation"] = json!(1.3);
    assert!(has(&violations_of(&doc), "chair", "contextual_objects"));
}

#[test]
fn stale_entropy_is_rejected() {
    let mut doc = bundled_value();
    target_mut(&mut doc, "tv")["entropy"] = json!(0.5);
    assert!(has(&violations_of(&doc), "tv", "entropy"));
}

#[test]
fn wrong_contextual_room_is_rejected() {
    let mut doc = bundled_value();
    target_mut(&mut doc, "toilet")["contextual_room"] = json!("garage");
    assert!(has(&violations_of(&doc), "toilet", "contextual_room"));
}

#[test]
fn every_violation_is_reported_not_just_the_first() {
    let mut doc = bundled_value();
    target_mut(&mut doc, "couch")["entropy"] = json!(1.5);
    target_mut(&mut doc, "tv")["contextual_room"] = json!("attic");
    doc["schema_version"] = json!(99);
    let v = violations_of(&doc);
    assert!(has(&v, "couch", "entropy"));
    assert!(has(&v, "tv", "contextual_room"));
    assert!(v.iter().any(|x| x.target.is_none() && x.field == "schema_version"));
}

#[test]
fn self_listing_and_oversized_lists_are_rejected() {
    let mut doc = bundled_value();
    let objects: Vec<Value> = (0..9).map(|i| json!({"name": format!("thing {i}"), "correlation": 0.5})).collect();
    target_mut(&mut doc, "bed")["contextual_objects"] = json!(objects);
    target_mut(&mut doc, "couch")["contextual_objects"] = json!([{"name": "couch", "correlation": 1.0}]);
    let v = violations_of(&doc);
    assert!(has(&v, "bed", "contextual_objects"));
    assert!(has(&v, "couch", "contextual_objects"));
}

#[test]
fn unknown_room_and_malformed_text_fail() {
    let mut doc = bundled_value();
    target_mut(&mut doc, "tv")["room_distribution"]["attic"] = json!(0.0);
    assert!(has(&violations_of(&doc), "tv", "room_distribution"));

    let err = KnowledgeBase::from_json_str("{\"schema_version\": 1").unwrap_err();
    assert!(matches!(err, NavError::Parse { .. }));
}
