//! Unified semantic value: `v_sem = v_target + ω_room·v_room + ω_object·v_object`.

use serde::{Deserialize, Serialize};

use crate::context::ContextField;
use crate::error::{NavError, Result};
use crate::geometry::Point;
use crate::knowledge::CueWeights;
use crate::value_map::ValueLayer;
use crate::world_model::{CellState, GeoMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticQueryResult {
    pub v_target: f64,
    pub v_room: f64,
    pub v_object: f64,
    pub v_sem: f64,
    pub weights: CueWeights,
}

impl SemanticQueryResult {
    pub fn from_components(v_target: f64, v_room: f64, v_object: f64, weights: CueWeights) -> Self {
        let v_sem = v_target + weights.room * v_room + weights.object * v_object;
        Self { v_target, v_room, v_object, v_sem, weights }
    }
}

/// Borrowed view of the three stateful cue sources.
#[derive(Clone, Copy)]
pub struct CueSources<'a> {
    pub map: &'a GeoMap,
    pub target: &'a ValueLayer,
    pub room: &'a ValueLayer,
    pub context: &'a ContextField,
}

impl CueSources<'_> {
    /// Fused value at `query`. Unobserved cells contribute 0 for the target
    /// and room channels.
    pub fn fuse(&self, weights: CueWeights, query: Point) -> Result<SemanticQueryResult> {
        let (c, r) = self.map.cell_of(query).ok_or(NavError::OutOfBounds {
            x: query.x,
            y: query.y,
            width: self.map.width(),
            height: self.map.height(),
        })?;
        Ok(self.fuse_cell(weights, self.map.index(c, r), query))
    }

    fn fuse_cell(&self, weights: CueWeights, index: usize, query: Point) -> SemanticQueryResult {
        SemanticQueryResult::from_components(
            self.target.value_or_zero(index),
            self.room.value_or_zero(index),
            self.context.evaluate(query),
            weights,
        )
    }

    /// `v_sem` for every cell, evaluated at cell centers; occupied cells are 0.
    pub fn render(&self, weights: CueWeights) -> Vec<f64> {
        let map = self.map;
        (0..map.width() * map.height())
            .map(|i| {
                let (c, r) = map.coords(i);
                if map.state(c, r) == CellState::Occupied {
                    0.0
                } else {
                    self.fuse_cell(weights, i, map.cell_center(c, r)).v_sem
                }
            })
            .collect()
    }

    /// The contextual-object field rasterized at cell centers.
    pub fn render_context(&self) -> Vec<f64> {
        let map = self.map;
        (0..map.width() * map.height())
            .map(|i| {
                let (c, r) = map.coords(i);
                self.context.evaluate(map.cell_center(c, r))
            })
            .collect()
    }
}

pub fn fuse(
    target: &ValueLayer,
    room: &ValueLayer,
    context: &ContextField,
    map: &GeoMap,
    weights: CueWeights,
    query: Point,
) -> Result<SemanticQueryResult> {
    CueSources { map, target, room, context }.fuse(weights, query)
}

pub fn render_semantic_map(
    target: &ValueLayer,
    room: &ValueLayer,
    context: &ContextField,
    map: &GeoMap,
    weights: CueWeights,
) -> Vec<f64> {
    CueSources { map, target, room, context }.render(weights)
}
