//! Per-cue value layers updated with a confidence-weighted running average.
//!
//! Each observation projects a single similarity score onto every visible
//! cell of the view cone. Cells near the optical axis get confidence close
//! to one, cells at the edge of the field of view close to zero. A cell seen
//! for the first time takes the score outright; afterwards the stored value
//! and confidence are blended with the new ones.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::{Point, Pose};
use crate::raycast::visible_cone_cells;
use crate::world_model::GeoMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Target,
    Room,
}

/// A single-frame similarity observation over the view cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeObservation {
    pub pose: Pose,
    pub fov: f64,
    pub range: f64,
    pub score: f64,
}

/// Confidence of a cell at bearing `theta` off the optical axis:
/// `cos²((θ / (fov/2)) · π/2)`.
pub fn pixel_confidence(theta: f64, fov: f64) -> Result<f64> {
    let half = fov / 2.0;
    if theta.abs() > half + 1e-12 {
        return Err(NavError::OutsideCone { theta, half_fov: half });
    }
    let ratio = (theta / half).clamp(-1.0, 1.0);
    Ok((ratio * FRAC_PI_2).cos().powi(2))
}

/// Confidence-weighted blend of the stored `(value, confidence)` with the
/// current observation. Returns `None` when both confidences are zero.
pub fn blend(current: (f64, f64), previous: (f64, f64)) -> Option<(f64, f64)> {
    let (v_cur, c_cur) = current;
    let (v_prev, c_prev) = previous;
    let total = c_cur + c_prev;
    if total <= 0.0 {
        return None;
    }
    if c_prev == 0.0 {
        return Some((v_cur, c_cur));
    }
    let value = (c_cur * v_cur + c_prev * v_prev) / total;
    let confidence = (c_cur * c_cur + c_prev * c_prev) / total;
    Some((value.clamp(0.0, 1.0), confidence.clamp(0.0, 1.0)))
}

/// Cells visible from `pose` inside the cone, by line of sight against the
/// map's occupied cells.
pub fn occlusion_mask(pose: &Pose, fov: f64, range: f64, map: &GeoMap) -> Vec<usize> {
    visible_cone_cells(map.frame(), pose, fov, range, |c, r| map.is_occupied(c, r))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueLayer {
    channel: Channel,
    width: usize,
    height: usize,
    value: Vec<f64>,
    confidence: Vec<f64>,
}

impl ValueLayer {
    pub fn new(channel: Channel, map: &GeoMap) -> Self {
        let n = map.width() * map.height();
        Self { channel, width: map.width(), height: map.height(), value: vec![0.0; n], confidence: vec![0.0; n] }
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidence
    }

    pub fn value(&self, index: usize) -> f64 {
        self.value[index]
    }

    pub fn confidence(&self, index: usize) -> f64 {
        self.confidence[index]
    }

    pub fn observed(&self, index: usize) -> bool {
        self.confidence[index] > 0.0
    }

    /// Value at a cell, 0 where the channel has never observed it.
    pub fn value_or_zero(&self, index: usize) -> f64 {
        if self.observed(index) {
            self.value[index]
        } else {
            0.0
        }
    }

    /// Projects `obs` over the visible part of the cone.
    pub fn apply_cone(&mut self, obs: &ConeObservation, map: &GeoMap) {
        let cells = occlusion_mask(&obs.pose, obs.fov, obs.range, map);
        self.apply_to_cells(obs, map, &cells);
    }

    /// Same as [`apply_cone`](Self::apply_cone) with a precomputed mask, so
    /// several channels can share one visibility pass.
    pub fn apply_to_cells(&mut self, obs: &ConeObservation, map: &GeoMap, cells: &[usize]) {
        assert_eq!((self.width, self.height), (map.width(), map.height()), "layer/map size mismatch");
        let score = obs.score.clamp(0.0, 1.0);
        let origin = obs.pose.position();
        let home = map.cell_of(origin).map(|(c, r)| map.index(c, r));
        for &i in cells {
            let (c, r) = map.coords(i);
            let theta = if Some(i) == home { 0.0 } else { obs.pose.relative_bearing(map.cell_center(c, r)) };
            let Ok(c_cur) = pixel_confidence(theta, obs.fov) else {
                continue;
            };
            if let Some((v, conf)) = blend((score, c_cur), (self.value[i], self.confidence[i])) {
                self.value[i] = v;
                self.confidence[i] = conf;
            }
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_grid_csv(path, self.width, self.height, &self.value)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        write_grid_png(path, self.width, self.height, &self.value, 1.0)
    }
}

/// Row-major CSV, one grid row per line, row 0 first.
pub fn grid_csv(width: usize, height: usize, data: &[f64]) -> String {
    let mut out = String::new();
    for row in 0..height {
        let line: Vec<String> = data[row * width..(row + 1) * width].iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_grid_csv(path: &Path, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| NavError::io(path, e))?;
    f.write_all(grid_csv(width, height, data).as_bytes()).map_err(|e| NavError::io(path, e))
}

/// 8-bit grayscale rendering, `round(value / scale · 255)`, top row first.
pub fn grid_gray_pixels(width: usize, height: usize, data: &[f64], scale: f64) -> Vec<u8> {
    let mut pixels = Vec::with_capacity(width * height);
    for row in (0..height).rev() {
        for v in &data[row * width..(row + 1) * width] {
            let norm = if scale > 0.0 { (v / scale).clamp(0.0, 1.0) } else { 0.0 };
            pixels.push((norm * 255.0).round() as u8);
        }
    }
    pixels
}

pub fn write_grid_png(path: &Path, width: usize, height: usize, data: &[f64], scale: f64) -> Result<()> {
    let pixels = grid_gray_pixels(width, height, data, scale);
    image::save_buffer(path, &pixels, width as u32, height as u32, image::ExtendedColorType::L8)?;
    Ok(())
}

/// Convenience for callers that only need a point lookup.
pub fn layer_value_at(layer: &ValueLayer, map: &GeoMap, p: Point) -> Option<f64> {
    map.cell_of(p).map(|(c, r)| layer.value_or_zero(map.index(c, r)))
}
