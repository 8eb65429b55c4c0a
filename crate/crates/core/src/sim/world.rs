//! Procedural indoor worlds: a grid of typed rectangular rooms separated by
//! one-cell walls, connected through door gaps, furnished from a placement
//! table. Generation is a pure function of the spec and the seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::Point;
use crate::knowledge::KnowledgeBase;
use crate::raycast::GridFrame;
use crate::world_model::{CellState, GeoMap};

pub const WORLD_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub col: usize,
    pub row: usize,
    pub width: usize,
    pub height: usize,
}

impl CellRect {
    pub fn contains(&self, col: usize, row: usize) -> bool {
        col >= self.col && col < self.col + self.width && row >= self.row && row < self.row + self.height
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row..self.row + self.height).flat_map(move |r| (self.col..self.col + self.width).map(move |c| (c, r)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: usize,
    pub room_type: String,
    /// Interior (floor) cells.
    pub rect: CellRect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: usize,
    pub class_name: String,
    pub position: Point,
    /// Footprint radius, meters.
    pub radius: f64,
    /// Perception range multiplier: the object is perceptible out to
    /// `salience · detect_range`, capped by the sensor range.
    pub salience: f64,
    pub room: usize,
}

/// Where instances of one class go.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementRule {
    pub class_name: String,
    pub count: usize,
    /// Relative weights over room types. Empty means any room.
    #[serde(default)]
    pub rooms: BTreeMap<String, f64>,
    /// Place each instance near an already placed instance of this class,
    /// falling back to `rooms` when none exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<String>,
    #[serde(default = "default_near_range")]
    pub near_range: (f64, f64),
    pub radius: f64,
    pub salience: f64,
}

fn default_near_range() -> (f64, f64) {
    (0.6, 1.2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementTable {
    pub rules: Vec<PlacementRule>,
}

impl PlacementTable {
    /// Furnishing used by the default worlds. Target rooms follow the
    /// knowledge base's room distributions. Objects that co-occur with
    /// room-predictable targets (sinks, towels, lamps, dressers) are common
    /// throughout the house, while the companions of room-agnostic targets
    /// (tables, tv stands, vases) sit next to them.
    pub fn standard(kb: &KnowledgeBase) -> Self {
        let mut rules = Vec::new();
        // (footprint radius, salience) by physical size
        let shape = |name: &str| -> (f64, f64) {
            match name {
                "toilet" => (0.25, 1.0),
                "bed" => (0.8, 1.3),
                "couch" => (0.7, 1.3),
                "tv" => (0.3, 1.0),
                "chair" => (0.25, 0.8),
                "potted plant" => (0.2, 0.7),
                _ => (0.3, 1.0),
            }
        };
        for name in kb.target_names() {
            let t = &kb.targets[name];
            let (radius, salience) = shape(name);
            rules.push(PlacementRule {
                class_name: name.clone(),
                count: 1,
                rooms: kb.catalog.rooms().iter().cloned().zip(t.room_dist.iter().copied()).collect(),
                near: None,
                near_range: default_near_range(),
                radius,
                salience,
            });
        }
        let rooms = |pairs: &[(&str, f64)]| -> BTreeMap<String, f64> {
            pairs.iter().map(|(r, w)| (r.to_string(), *w)).collect()
        };
        let mut rule =
            |class: &str, count: usize, near: Option<(&str, f64, f64)>, rw: &[(&str, f64)], radius: f64, sal: f64| {
                rules.push(PlacementRule {
                    class_name: class.into(),
                    count,
                    rooms: rooms(rw),
                    near: near.map(|n| n.0.to_string()),
                    near_range: near.map(|n| (n.1, n.2)).unwrap_or_else(default_near_range),
                    radius,
                    salience: sal,
                });
            };
        let anywhere: &[(&str, f64)] = &[];
        // companions of room-agnostic targets
        rule("table", 1, Some(("chair", 0.8, 1.4)), anywhere, 0.5, 1.6);
        rule("desk", 1, Some(("chair", 1.0, 1.6)), anywhere, 0.5, 1.6);
        rule("tv stand", 1, Some(("tv", 0.4, 0.6)), anywhere, 0.4, 1.6);
        rule("vase", 1, Some(("potted plant", 1.0, 1.6)), anywhere, 0.15, 1.6);
        rule("bookshelf", 1, Some(("potted plant", 1.0, 1.8)), anywhere, 0.4, 1.6);
        // companions of room-predictable targets, spread through the house
        rule("sink", 1, Some(("toilet", 0.7, 1.2)), anywhere, 0.25, 1.3);
        rule("sink", 2, None, &[("kitchen", 1.0), ("laundry room", 1.0), ("garage", 1.0), ("bedroom", 0.5)], 0.25, 1.3);
        rule("bathtub", 1, None, &[("bathroom", 1.0)], 0.6, 1.3);
        rule(
            "towel",
            2,
            None,
            &[("bedroom", 1.0), ("laundry room", 1.0), ("kitchen", 1.0), ("hallway", 0.5)],
            0.2,
            1.3,
        );
        rule("nightstand", 1, Some(("bed", 1.0, 1.4)), anywhere, 0.25, 1.3);
        rule("nightstand", 1, None, &[("living room", 1.0), ("office", 1.0), ("hallway", 1.0)], 0.25, 1.3);
        rule("dresser", 2, None, &[("hallway", 1.0), ("closet", 1.0), ("office", 1.0)], 0.4, 1.3);
        rule("lamp", 2, None, &[("living room", 1.0), ("office", 1.0), ("dining room", 1.0)], 0.2, 1.3);
        rule("coffee table", 1, Some(("couch", 1.0, 1.3)), anywhere, 0.4, 1.3);
        rule("coffee table", 2, None, &[("office", 1.0), ("bedroom", 1.0), ("dining room", 1.0)], 0.4, 1.3);
        PlacementTable { rules }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSpec {
    pub rows: usize,
    pub cols: usize,
    /// Room side lengths are drawn uniformly from this range, meters.
    pub room_size: (f64, f64),
    pub resolution: f64,
    pub door_width: f64,
    /// Probability of a door on each room adjacency beyond the spanning tree.
    pub extra_door_prob: f64,
    /// Largest allowed world side, meters.
    pub max_extent: f64,
    pub required_rooms: Vec<String>,
    /// `None` uses [`PlacementTable::standard`].
    pub placement: Option<PlacementTable>,
}

impl Default for GenerationSpec {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            room_size: (3.5, 5.0),
            resolution: 0.1,
            door_width: 1.0,
            extra_door_prob: 0.25,
            max_extent: 20.0,
            required_rooms: ["bathroom", "bedroom", "living room", "kitchen", "dining room", "office"]
                .map(String::from)
                .to_vec(),
            placement: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct World {
    pub schema_version: u32,
    pub seed: u64,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub rooms: Vec<Room>,
    pub walls: Vec<CellRect>,
    pub doors: Vec<CellRect>,
    pub objects: Vec<WorldObject>,
    #[serde(skip)]
    occupancy: Vec<bool>,
    #[serde(skip)]
    room_of: Vec<Option<usize>>,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.to_json() == other.to_json()
    }
}

impl World {
    fn rebuild(&mut self) {
        let n = self.width * self.height;
        self.occupancy = vec![false; n];
        for w in &self.walls {
            for (c, r) in w.cells() {
                self.occupancy[r * self.width + c] = true;
            }
        }
        for d in &self.doors {
            for (c, r) in d.cells() {
                self.occupancy[r * self.width + c] = false;
            }
        }
        self.room_of = vec![None; n];
        for room in &self.rooms {
            for (c, r) in room.rect.cells() {
                self.room_of[r * self.width + c] = Some(room.id);
            }
        }
    }

    pub fn frame(&self) -> GridFrame {
        GridFrame { width: self.width, height: self.height, resolution: self.resolution, origin: Point::new(0.0, 0.0) }
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    pub fn is_wall(&self, col: usize, row: usize) -> bool {
        self.occupancy[row * self.width + col]
    }

    pub fn is_free_at(&self, p: Point) -> bool {
        self.frame().cell_of(p).is_some_and(|(c, r)| !self.is_wall(c, r))
    }

    pub fn room_at_cell(&self, col: usize, row: usize) -> Option<&Room> {
        self.room_of[row * self.width + col].map(|i| &self.rooms[i])
    }

    pub fn room_at(&self, p: Point) -> Option<&Room> {
        self.frame().cell_of(p).and_then(|(c, r)| self.room_at_cell(c, r))
    }

    pub fn objects_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a WorldObject> + 'a {
        self.objects.iter().filter(move |o| o.class_name == class)
    }

    pub fn has_room_type(&self, room_type: &str) -> bool {
        self.rooms.iter().any(|r| r.room_type == room_type)
    }

    /// Fully known occupancy map of the world.
    pub fn truth_map(&self) -> GeoMap {
        let mut map = GeoMap::new(self.width, self.height, self.resolution, Point::new(0.0, 0.0));
        for r in 0..self.height {
            for c in 0..self.width {
                map.set_state(c, r, if self.is_wall(c, r) { CellState::Occupied } else { CellState::Free });
            }
        }
        map
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("world serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut world: World =
            serde_json::from_str(text).map_err(|source| NavError::Parse { what: "world file".into(), source })?;
        if world.schema_version != WORLD_SCHEMA_VERSION {
            return Err(NavError::Generation(format!("unsupported world schema version {}", world.schema_version)));
        }
        let fits = |r: &CellRect| r.col + r.width <= world.width && r.row + r.height <= world.height;
        if !world.walls.iter().chain(&world.doors).chain(world.rooms.iter().map(|r| &r.rect)).all(fits) {
            return Err(NavError::Generation("world rectangles exceed the grid".into()));
        }
        world.rebuild();
        if world.objects.iter().any(|o| world.room_at(o.position).map(|r| r.id) != Some(o.room)) {
            return Err(NavError::Generation("object lies outside its room".into()));
        }
        Ok(world)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NavError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| NavError::io(path, e))
    }

    /// ASCII plan: `#` wall, room-type initial on floor, object class
    /// initial in upper case, top row first.
    pub fn render_ascii(&self) -> String {
        let mut grid: Vec<Vec<char>> = (0..self.height)
            .map(|r| {
                (0..self.width)
                    .map(|c| {
                        if self.is_wall(c, r) {
                            '#'
                        } else {
                            self.room_at_cell(c, r).and_then(|room| room.room_type.chars().next()).unwrap_or(' ')
                        }
                    })
                    .collect()
            })
            .collect();
        for o in &self.objects {
            if let Some((c, r)) = self.frame().cell_of(o.position) {
                grid[r][c] = o.class_name.chars().next().unwrap_or('?').to_ascii_uppercase();
            }
        }
        grid.iter().rev().map(|row| row.iter().collect::<String>() + "\n").collect()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = i;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

fn weighted_pick<'a, R: Rng>(rng: &mut R, items: &'a [(String, f64)]) -> Option<&'a str> {
    let total: f64 = items.iter().map(|(_, w)| w.max(0.0)).sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for (name, w) in items {
        let w = w.max(0.0);
        if x < w {
            return Some(name);
        }
        x -= w;
    }
    items.iter().rev().find(|(_, w)| *w > 0.0).map(|(n, _)| n.as_str())
}

/// Generates a world. Identical `(spec, kb, seed)` yields an identical world.
pub fn generate_world(spec: &GenerationSpec, kb: &KnowledgeBase, seed: u64) -> Result<World> {
    if spec.rows * spec.cols == 0 {
        return Err(NavError::Generation("at least one room is required".into()));
    }
    let (lo, hi) = spec.room_size;
    if !(lo > 0.0 && hi >= lo) || spec.resolution <= 0.0 {
        return Err(NavError::Generation("room size range must be positive and ordered".into()));
    }
    for r in &spec.required_rooms {
        if !kb.catalog.contains(r) {
            return Err(NavError::Generation(format!("required room `{r}` is not in the catalog")));
        }
    }
    if spec.required_rooms.len() > spec.rows * spec.cols {
        return Err(NavError::Generation("more required rooms than room slots".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = spec.resolution;
    let to_cells = |m: f64| (m / res).round().max(1.0) as usize;

    let col_sizes: Vec<usize> = (0..spec.cols).map(|_| to_cells(rng.random_range(lo..=hi))).collect();
    let row_sizes: Vec<usize> = (0..spec.rows).map(|_| to_cells(rng.random_range(lo..=hi))).collect();
    let width = 1 + col_sizes.iter().map(|s| s + 1).sum::<usize>();
    let height = 1 + row_sizes.iter().map(|s| s + 1).sum::<usize>();
    if width as f64 * res > spec.max_extent + 1e-9 || height as f64 * res > spec.max_extent + 1e-9 {
        return Err(NavError::Generation(format!(
            "layout of {:.1} x {:.1} m exceeds the {:.1} m bound",
            width as f64 * res,
            height as f64 * res,
            spec.max_extent
        )));
    }
    let door = to_cells(spec.door_width);
    let margin = 3;
    let min_side = col_sizes.iter().chain(&row_sizes).copied().min().unwrap_or(0);
    if (spec.rows > 1 || spec.cols > 1) && min_side < door + 2 * margin {
        return Err(NavError::Generation("rooms are too small to hold a door".into()));
    }

    // Wall lines sit at the cumulative offsets; room interiors between them.
    let col_start: Vec<usize> = col_sizes
        .iter()
        .scan(1, |x, s| {
            let start = *x;
            *x += s + 1;
            Some(start)
        })
        .collect();
    let row_start: Vec<usize> = row_sizes
        .iter()
        .scan(1, |y, s| {
            let start = *y;
            *y += s + 1;
            Some(start)
        })
        .collect();

    let mut slots: Vec<String> = spec.required_rooms.clone();
    while slots.len() < spec.rows * spec.cols {
        let k = rng.random_range(0..kb.catalog.len());
        slots.push(kb.catalog.rooms()[k].clone());
    }
    slots.shuffle(&mut rng);

    let mut rooms = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let id = r * spec.cols + c;
            rooms.push(Room {
                id,
                room_type: slots[id].clone(),
                rect: CellRect { col: col_start[c], row: row_start[r], width: col_sizes[c], height: row_sizes[r] },
            });
        }
    }

    let mut walls = vec![
        CellRect { col: 0, row: 0, width, height: 1 },
        CellRect { col: 0, row: height - 1, width, height: 1 },
        CellRect { col: 0, row: 0, width: 1, height },
        CellRect { col: width - 1, row: 0, width: 1, height },
    ];
    for &c in &col_start[1..spec.cols] {
        walls.push(CellRect { col: c - 1, row: 0, width: 1, height });
    }
    for &r in &row_start[1..spec.rows] {
        walls.push(CellRect { col: 0, row: r - 1, width, height: 1 });
    }

    // Adjacencies between neighboring rooms; a random spanning tree gets
    // doors, the rest get one with `extra_door_prob`.
    let mut edges = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let id = r * spec.cols + c;
            if c + 1 < spec.cols {
                edges.push((id, id + 1));
            }
            if r + 1 < spec.rows {
                edges.push((id, id + spec.cols));
            }
        }
    }
    edges.shuffle(&mut rng);
    let mut uf = UnionFind((0..rooms.len()).collect());
    let mut doors = Vec::new();
    for (a, b) in edges {
        let tree_edge = uf.union(a, b);
        let extra = rng.random::<f64>() < spec.extra_door_prob;
        if !(tree_edge || extra) {
            continue;
        }
        let (ra, rb) = (&rooms[a].rect, &rooms[b].rect);
        if rb.col > ra.col {
            let span = ra.height;
            let off = rng.random_range(margin..=span - door - margin);
            doors.push(CellRect { col: rb.col - 1, row: ra.row + off, width: 1, height: door });
        } else {
            let span = ra.width;
            let off = rng.random_range(margin..=span - door - margin);
            doors.push(CellRect { col: ra.col + off, row: rb.row - 1, width: door, height: 1 });
        }
    }

    let mut world = World {
        schema_version: WORLD_SCHEMA_VERSION,
        seed,
        resolution: res,
        width,
        height,
        rooms,
        walls,
        doors,
        objects: Vec::new(),
        occupancy: Vec::new(),
        room_of: Vec::new(),
    };
    world.rebuild();

    let standard;
    let table = match &spec.placement {
        Some(t) => t,
        None => {
            standard = PlacementTable::standard(kb);
            &standard
        }
    };
    for rule in &table.rules {
        for _ in 0..rule.count {
            if let Some(obj) = place_object(&world, rule, &mut rng) {
                world.objects.push(obj);
            } else {
                return Err(NavError::Generation(format!("could not place `{}`", rule.class_name)));
            }
        }
    }
    Ok(world)
}

fn place_object(world: &World, rule: &PlacementRule, rng: &mut ChaCha8Rng) -> Option<WorldObject> {
    let res = world.resolution;
    let clearance = rule.radius.max(0.2) + 0.15;
    let fits = |room: &Room, p: Point, world: &World| -> bool {
        let r = room.rect;
        let x0 = r.col as f64 * res + clearance;
        let x1 = (r.col + r.width) as f64 * res - clearance;
        let y0 = r.row as f64 * res + clearance;
        let y1 = (r.row + r.height) as f64 * res - clearance;
        p.x >= x0
            && p.x <= x1
            && p.y >= y0
            && p.y <= y1
            && world.objects.iter().all(|o| o.position.distance(p) >= o.radius.min(rule.radius) + 0.1)
    };
    let make = |room: &Room, p: Point| WorldObject {
        id: world.objects.len(),
        class_name: rule.class_name.clone(),
        position: p,
        radius: rule.radius,
        salience: rule.salience,
        room: room.id,
    };

    if let Some(anchor_class) = &rule.near {
        let anchors: Vec<&WorldObject> = world.objects_of(anchor_class).collect();
        if !anchors.is_empty() {
            let anchor = anchors[rng.random_range(0..anchors.len())];
            let room = &world.rooms[anchor.room];
            let (dmin, dmax) = rule.near_range;
            for _ in 0..200 {
                let d = rng.random_range(dmin..=dmax.max(dmin));
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let p = anchor.position.offset(a, d);
                if fits(room, p, world) {
                    return Some(make(room, p));
                }
            }
        }
    }

    let present: Vec<(String, f64)> = if rule.rooms.is_empty() {
        Vec::new()
    } else {
        rule.rooms.iter().filter(|(t, _)| world.has_room_type(t)).map(|(t, w)| (t.clone(), *w)).collect()
    };
    for _ in 0..50 {
        let candidates: Vec<&Room> = match weighted_pick(rng, &present) {
            Some(t) => world.rooms.iter().filter(|r| r.room_type == t).collect(),
            None => world.rooms.iter().collect(),
        };
        let room = candidates[rng.random_range(0..candidates.len())];
        for _ in 0..40 {
            let r = room.rect;
            let p = Point::new(
                rng.random_range(r.col as f64 * res..(r.col + r.width) as f64 * res),
                rng.random_range(r.row as f64 * res..(r.row + r.height) as f64 * res),
            );
            if fits(room, p, world) {
                return Some(make(room, p));
            }
        }
    }
    None
}
