//! Contextual-object value field.
//!
//! Each detected contextual object contributes a Gaussian bump centered on
//! its projected position. Amplitude is `A0 · cor` and spread
//! `σ0 + cor` meters, so strongly correlated objects both weigh more and
//! reach further. Overlapping bumps combine by max.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::{Point, Pose};
use crate::knowledge::TargetKnowledge;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextParams {
    /// Base amplitude `A0`.
    pub base_amplitude: f64,
    /// Base standard deviation `σ0`, meters.
    pub base_sigma: f64,
    /// Same-class detections closer than this merge into one node.
    pub dedup_radius: f64,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self { base_amplitude: 1.0, base_sigma: 0.5, dedup_radius: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionNode {
    pub id: usize,
    /// Camera pose when the detection was made.
    pub pose: Pose,
    /// Object position projected onto the map.
    pub center: Point,
    pub class_name: String,
    pub detector_confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextNode {
    pub node: DetectionNode,
    pub correlation: f64,
    /// Sum of detector confidences merged into this node.
    pub weight: f64,
}

/// `A0·cor · exp(−d² / (2(σ0 + cor)²))`.
pub fn gaussian_score(center: Point, correlation: f64, params: &ContextParams, query: Point) -> f64 {
    let amplitude = params.base_amplitude * correlation;
    let sigma = params.base_sigma + correlation;
    amplitude * (-center.distance_sq(query) / (2.0 * sigma * sigma)).exp()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextField {
    pub params: ContextParams,
    nodes: Vec<ContextNode>,
    next_id: usize,
}

impl ContextField {
    pub fn new(params: ContextParams) -> Self {
        Self { params, nodes: Vec::new(), next_id: 0 }
    }

    pub fn nodes(&self) -> &[ContextNode] {
        &self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Max over node contributions, 0 with no nodes.
    pub fn evaluate(&self, query: Point) -> f64 {
        self.nodes.iter().map(|n| gaussian_score(n.node.center, n.correlation, &self.params, query)).fold(0.0, f64::max)
    }

    /// Adds a contextual-object detection. Classes outside the target's
    /// contextual list are ignored. A same-class detection within the
    /// dedup radius of an existing node moves that node to the
    /// confidence-weighted mean of the two centers instead of adding one.
    /// Returns the id of the node touched, if any.
    pub fn register_detection(
        &mut self,
        pose: Pose,
        center: Point,
        class_name: &str,
        detector_confidence: f64,
        knowledge: &TargetKnowledge,
    ) -> Option<usize> {
        let correlation = knowledge.contextual_objects.iter().find(|o| o.name == class_name).map(|o| o.correlation)?;
        let conf = detector_confidence.clamp(0.0, 1.0);
        let radius = self.params.dedup_radius;
        let nearest = self
            .nodes
            .iter_mut()
            .filter(|n| n.node.class_name == class_name)
            .map(|n| {
                let d = n.node.center.distance(center);
                (n, d)
            })
            .filter(|(_, d)| *d < radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((node, _)) = nearest {
            let total = node.weight + conf;
            if total > 0.0 {
                let c = node.node.center;
                node.node.center = Point::new(
                    (c.x * node.weight + center.x * conf) / total,
                    (c.y * node.weight + center.y * conf) / total,
                );
            }
            node.weight = total;
            node.node.detector_confidence = node.node.detector_confidence.max(conf);
            return Some(node.node.id);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.push(ContextNode {
            node: DetectionNode { id, pose, center, class_name: class_name.to_string(), detector_confidence: conf },
            correlation,
            weight: conf,
        });
        Some(id)
    }

    /// `id,class,x,y,cor` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,class,x,y,cor\n");
        for n in &self.nodes {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                n.node.id, n.node.class_name, n.node.center.x, n.node.center.y, n.correlation
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| NavError::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| NavError::io(path, e))
    }
}
