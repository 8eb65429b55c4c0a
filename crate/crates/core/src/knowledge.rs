//! Offline commonsense knowledge about search targets.
//!
//! For every target the knowledge file carries a probability distribution
//! over room categories, the contextual room (the most likely one), a short
//! list of co-located contextual objects with correlation scores, and the
//! normalized entropy of the room distribution. Loading validates every
//! record and reports all violations at once.
//!
//! Entropy uses the natural logarithm; the normalization by `ln n` makes
//! the base irrelevant.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_CONTEXTUAL_OBJECTS: usize = 8;
const SUM_TOLERANCE: f64 = 1e-6;
const ENTROPY_TOLERANCE: f64 = 1e-6;

static BUNDLED: &str = include_str!("../data/knowledge.json");

/// Normalized Shannon entropy `-Σ p ln p / ln n` with `0 ln 0 = 0`.
pub fn compute_entropy(dist: &[f64]) -> Result<f64> {
    let n = dist.len();
    if n < 2 {
        return Err(NavError::Distribution(format!("need at least 2 categories, got {n}")));
    }
    if let Some(p) = dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(NavError::Distribution(format!("invalid probability {p}")));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(NavError::Distribution(format!("probabilities sum to {sum}, expected 1")));
    }
    let h: f64 = dist.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    Ok((h / (n as f64).ln()).clamp(0.0, 1.0))
}

/// Fits `p_k ∝ affinity_k^β` so that the normalized entropy equals
/// `target_entropy`. Returns the distribution and the exponent.
///
/// Entropy is non-increasing in β for this family, so bisection converges.
pub fn fit_power_distribution(affinity: &[f64], target_entropy: f64) -> Result<(Vec<f64>, f64)> {
    if affinity.len() < 2 || affinity.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(NavError::Distribution("affinities must be positive and at least 2".into()));
    }
    if !(0.0..=1.0).contains(&target_entropy) {
        return Err(NavError::Distribution(format!("entropy {target_entropy} outside [0,1]")));
    }
    let dist_for = |beta: f64| -> Vec<f64> {
        let logs: Vec<f64> = affinity.iter().map(|a| beta * a.ln()).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    };
    let entropy_at = |beta: f64| compute_entropy(&dist_for(beta)).unwrap_or(0.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while entropy_at(hi) > target_entropy {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(NavError::Distribution("entropy target unreachable for these affinities".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy_at(mid) > target_entropy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok((dist_for(beta), beta))
}

/// Fusion weights for the room and contextual-object channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueWeights {
    pub room: f64,
    pub object: f64,
}

impl CueWeights {
    pub const fn new(room: f64, object: f64) -> Self {
        Self { room, object }
    }
}

/// `ω_room = 1 − H`, `ω_object = H`.
pub fn weights_for(target: &TargetKnowledge) -> CueWeights {
    weights_from_entropy(target.entropy)
}

pub fn weights_from_entropy(entropy: f64) -> CueWeights {
    let h = entropy.clamp(0.0, 1.0);
    CueWeights { room: 1.0 - h, object: h }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomCatalog {
    rooms: Vec<String>,
}

impl RoomCatalog {
    pub fn new(rooms: Vec<String>) -> Result<Self> {
        let mut violations = Vec::new();
        check_catalog(&rooms, &mut violations);
        if violations.is_empty() {
            Ok(Self { rooms })
        } else {
            Err(NavError::Knowledge(violations))
        }
    }

    pub fn rooms(&self) -> &[String] {
        &self.rooms
    }

    pub fn len(&self) -> usize {
        self.rooms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rooms.is_empty()
    }

    pub fn index_of(&self, room: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r == room)
    }

    pub fn contains(&self, room: &str) -> bool {
        self.index_of(room).is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextualObject {
    pub name: String,
    pub correlation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetKnowledge {
    pub target: String,
    /// `P(room | target)` in catalog order.
    pub room_dist: Vec<f64>,
    pub contextual_room: String,
    pub contextual_objects: Vec<ContextualObject>,
    pub entropy: f64,
}

impl TargetKnowledge {
    /// Correlation of `class` with the target; the target itself scores 1.
    pub fn correlation(&self, class: &str) -> Option<f64> {
        if class == self.target {
            return Some(1.0);
        }
        self.contextual_objects.iter().find(|o| o.name == class).map(|o| o.correlation)
    }

    /// Target plus contextual object classes, in file order.
    pub fn classes_of_interest(&self) -> Vec<String> {
        std::iter::once(self.target.clone()).chain(self.contextual_objects.iter().map(|o| o.name.clone())).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeBase {
    pub catalog: RoomCatalog,
    pub targets: BTreeMap<String, TargetKnowledge>,
    pub provenance: String,
    pub fit_method: Option<String>,
    order: Vec<String>,
    fits: BTreeMap<String, FitRecord>,
}

/// One validation failure, scoped to a target when it belongs to one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub target: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            Some(t) => write!(f, "target `{}`, field `{}`: {}", t, self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

/// Provenance of a fitted distribution, kept so the file is reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub affinity: BTreeMap<String, f64>,
    pub exponent: f64,
    pub published_entropy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct KnowledgeFile {
    schema_version: u32,
    provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit_method: Option<String>,
    rooms: Vec<String>,
    targets: Vec<TargetRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TargetRecord {
    target: String,
    room_distribution: BTreeMap<String, f64>,
    contextual_room: String,
    contextual_objects: Vec<ContextualObject>,
    entropy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit: Option<FitRecord>,
}

fn check_catalog(rooms: &[String], out: &mut Vec<Violation>) {
    let v = |m: String| Violation { target: None, field: "rooms".into(), message: m };
    if rooms.len() < 2 {
        out.push(v(format!("catalog needs at least 2 rooms, found {}", rooms.len())));
    }
    let mut seen = HashSet::new();
    for r in rooms {
        if r.trim().is_empty() {
            out.push(v("empty room name".into()));
        } else if !seen.insert(r.as_str()) {
            out.push(v(format!("duplicate room `{r}`")));
        }
    }
}

fn check_target(rec: &TargetRecord, rooms: &[String], out: &mut Vec<Violation>) -> Option<TargetKnowledge> {
    let start = out.len();
    let mut push = |field: &str, message: String| {
        out.push(Violation { target: Some(rec.target.clone()), field: field.into(), message })
    };
    if rec.target.trim().is_empty() {
        push("target", "empty target name".into());
    }

    let mut dist = vec![0.0; rooms.len()];
    for (room, &p) in &rec.room_distribution {
        match rooms.iter().position(|r| r == room) {
            Some(k) => dist[k] = p,
            None => push("room_distribution", format!("room `{room}` is not in the catalog")),
        }
        if !p.is_finite() || p < 0.0 {
            push("room_distribution", format!("probability for `{room}` is {p}, must be >= 0"));
        }
    }
    let sum: f64 = rec.room_distribution.values().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        push("room_distribution", format!("probabilities sum to {sum}, expected 1 within {SUM_TOLERANCE}"));
    }

    // argmax with ties broken by catalog order
    let argmax = dist
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (k, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((k, p)),
        })
        .map(|(k, _)| k);
    match rooms.iter().position(|r| *r == rec.contextual_room) {
        None => push("contextual_room", format!("room `{}` is not in the catalog", rec.contextual_room)),
        Some(k) if Some(k) != argmax => push(
            "contextual_room",
            format!(
                "`{}` is not the most likely room (expected `{}`)",
                rec.contextual_room,
                argmax.map(|a| rooms[a].as_str()).unwrap_or("?")
            ),
        ),
        Some(_) => {}
    }

    if rec.contextual_objects.len() > MAX_CONTEXTUAL_OBJECTS {
        push(
            "contextual_objects",
            format!("{} entries exceed the cap of {MAX_CONTEXTUAL_OBJECTS}", rec.contextual_objects.len()),
        );
    }
    let mut names = HashSet::new();
    for obj in &rec.contextual_objects {
        if obj.name == rec.target {
            push("contextual_objects", "the target may not list itself".into());
        }
        if obj.name.trim().is_empty() {
            push("contextual_objects", "empty object name".into());
        } else if !names.insert(obj.name.as_str()) {
            push("contextual_objects", format!("duplicate object `{}`", obj.name));
        }
        if !(obj.correlation > 0.0 && obj.correlation <= 1.0) {
            push(
                "contextual_objects",
                format!("correlation of `{}` is {}, must lie in (0, 1]", obj.name, obj.correlation),
            );
        }
    }

    if !(0.0..=1.0).contains(&rec.entropy) {
        push("entropy", format!("{} outside [0, 1]", rec.entropy));
    }
    if out.len() == start {
        match compute_entropy(&dist) {
            Ok(h) if (h - rec.entropy).abs() > ENTROPY_TOLERANCE => {
                out.push(Violation {
                    target: Some(rec.target.clone()),
                    field: "entropy".into(),
                    message: format!("stored {} but distribution gives {h}", rec.entropy),
                });
            }
            Ok(_) => {}
            Err(e) => out.push(Violation {
                target: Some(rec.target.clone()),
                field: "room_distribution".into(),
                message: e.to_string(),
            }),
        }
    }
    (out.len() == start).then(|| TargetKnowledge {
        target: rec.target.clone(),
        room_dist: dist,
        contextual_room: rec.contextual_room.clone(),
        contextual_objects: rec.contextual_objects.clone(),
        entropy: rec.entropy,
    })
}

impl KnowledgeBase {
    /// The knowledge file shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED).expect("bundled knowledge file is valid")
    }

    pub fn bundled_json() -> &'static str {
        BUNDLED
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NavError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: KnowledgeFile =
            serde_json::from_str(text).map_err(|source| NavError::Parse { what: "knowledge file".into(), source })?;
        let mut violations = Vec::new();
        if file.schema_version != SCHEMA_VERSION {
            violations.push(Violation {
                target: None,
                field: "schema_version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
            });
        }
        check_catalog(&file.rooms, &mut violations);
        let mut targets = BTreeMap::new();
        let mut order = Vec::new();
        let mut fits = BTreeMap::new();
        for rec in &file.targets {
            if targets.contains_key(&rec.target) {
                violations.push(Violation {
                    target: Some(rec.target.clone()),
                    field: "target".into(),
                    message: "duplicate target entry".into(),
                });
                continue;
            }
            if let Some(tk) = check_target(rec, &file.rooms, &mut violations) {
                order.push(tk.target.clone());
                if let Some(fit) = &rec.fit {
                    fits.insert(tk.target.clone(), fit.clone());
                }
                targets.insert(tk.target.clone(), tk);
            }
        }
        if !violations.is_empty() {
            return Err(NavError::Knowledge(violations));
        }
        Ok(Self {
            catalog: RoomCatalog { rooms: file.rooms },
            targets,
            provenance: file.provenance,
            fit_method: file.fit_method,
            order,
            fits,
        })
    }

    /// Assembles a knowledge base from already-validated parts.
    pub fn from_parts(
        catalog: RoomCatalog,
        targets: Vec<TargetKnowledge>,
        provenance: impl Into<String>,
        fit_method: Option<String>,
        fits: BTreeMap<String, FitRecord>,
    ) -> Result<Self> {
        let kb = Self {
            catalog,
            order: targets.iter().map(|t| t.target.clone()).collect(),
            targets: targets.into_iter().map(|t| (t.target.clone(), t)).collect(),
            provenance: provenance.into(),
            fit_method,
            fits,
        };
        // Round-trip through the file format so the same checks apply.
        Self::from_json_str(&kb.to_json())
    }

    pub fn to_json(&self) -> String {
        let file = KnowledgeFile {
            schema_version: SCHEMA_VERSION,
            provenance: self.provenance.clone(),
            fit_method: self.fit_method.clone(),
            rooms: self.catalog.rooms.clone(),
            targets: self
                .target_names()
                .iter()
                .map(|name| {
                    let t = &self.targets[name];
                    TargetRecord {
                        target: t.target.clone(),
                        room_distribution: self
                            .catalog
                            .rooms
                            .iter()
                            .cloned()
                            .zip(t.room_dist.iter().cloned())
                            .collect(),
                        contextual_room: t.contextual_room.clone(),
                        contextual_objects: t.contextual_objects.clone(),
                        entropy: t.entropy,
                        fit: self.fits.get(name).cloned(),
                    }
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("knowledge file serializes");
        s.push('\n');
        s
    }

    pub fn target(&self, name: &str) -> Result<&TargetKnowledge> {
        self.targets.get(name).ok_or_else(|| NavError::UnknownTarget(name.to_string()))
    }

    /// Target names in file order.
    pub fn target_names(&self) -> &[String] {
        &self.order
    }

    pub fn fit(&self, target: &str) -> Option<&FitRecord> {
        self.fits.get(target)
    }
}
