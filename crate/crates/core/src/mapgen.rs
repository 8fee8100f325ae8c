//! Seeded map generators.
//!
//! Room maps are built by recursive binary space partition: each split lays a
//! one-cell wall (or a corridor bounded by two walls) across the region and
//! punches doors through it. Split positions never land in front of a door of
//! an enclosing wall, so every room stays reachable. Both generators finish
//! with a connectivity repair that fills any pocket outside the largest free
//! component.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Cell, GridMap};

pub const MIN_GEN_SIDE: usize = 10;
pub const MAX_GEN_SIDE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomGenParams {
    pub min_room_side: usize,
    pub max_room_side: usize,
    /// Inclusive range of corridor widths.
    pub corridor_width_range: (usize, usize),
    /// Maximum door width; each door is sampled in `1..=door_width`.
    pub door_width: usize,
    /// Probability that a split becomes a corridor instead of a single wall.
    pub corridor_probability: f64,
    pub seed: u64,
}

impl Default for RoomGenParams {
    fn default() -> Self {
        Self {
            min_room_side: 3,
            max_room_side: 8,
            corridor_width_range: (1, 3),
            door_width: 2,
            corridor_probability: 0.3,
            seed: 0,
        }
    }
}

impl RoomGenParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (cmin, cmax) = self.corridor_width_range;
        if self.min_room_side == 0 || self.door_width == 0 || cmin == 0 {
            return Err(invalid("room sides, door and corridor widths must be >= 1"));
        }
        if self.min_room_side > self.max_room_side {
            return Err(invalid("min_room_side exceeds max_room_side"));
        }
        if cmin > cmax {
            return Err(invalid("corridor width range is inverted"));
        }
        if !(0.0..=1.0).contains(&self.corridor_probability) {
            return Err(invalid("corridor_probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    let ok = |s: usize| (MIN_GEN_SIDE..=MAX_GEN_SIDE).contains(&s);
    if !ok(width) || !ok(height) {
        return Err(invalid(format!("map size {width}x{height} outside [{MIN_GEN_SIDE}, {MAX_GEN_SIDE}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    /// Wall is a vertical line at a fixed x.
    Vertical,
    /// Wall is a horizontal line at a fixed y.
    Horizontal,
}

/// Inclusive rectangle of free cells plus the door positions on its border
/// walls that new walls must not block.
#[derive(Debug, Clone)]
struct Region {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    /// Columns holding doors in the walls above/below this region.
    blocked_x: Vec<usize>,
    /// Rows holding doors in the walls left/right of this region.
    blocked_y: Vec<usize>,
}

impl Region {
    fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    fn len(&self, axis: Axis) -> usize {
        match axis {
            Axis::Vertical => self.width(),
            Axis::Horizontal => self.height(),
        }
    }

    /// (start, end) of the coordinate the wall position is chosen along.
    fn span(&self, axis: Axis) -> (usize, usize) {
        match axis {
            Axis::Vertical => (self.x0, self.x1),
            Axis::Horizontal => (self.y0, self.y1),
        }
    }

    fn blocked(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::Vertical => &self.blocked_x,
            Axis::Horizontal => &self.blocked_y,
        }
    }

    /// Sub-region on one side of the band `lo..=hi` (the band is walls + corridor).
    fn split_side(&self, axis: Axis, lo: usize, hi: usize, near_doors: &[usize], far: bool) -> Region {
        let mut r = self.clone();
        match axis {
            Axis::Vertical => {
                if far {
                    r.x0 = hi + 1;
                } else {
                    r.x1 = lo - 1;
                }
                r.blocked_x.retain(|&x| x >= r.x0 && x <= r.x1);
                r.blocked_y.extend_from_slice(near_doors);
            }
            Axis::Horizontal => {
                if far {
                    r.y0 = hi + 1;
                } else {
                    r.y1 = lo - 1;
                }
                r.blocked_y.retain(|&y| y >= r.y0 && y <= r.y1);
                r.blocked_x.extend_from_slice(near_doors);
            }
        }
        r
    }
}

struct RoomBuilder<'a> {
    params: &'a RoomGenParams,
    rng: ChaCha8Rng,
    width: usize,
    obstacles: Vec<bool>,
}

impl RoomBuilder<'_> {
    fn set_wall(&mut self, axis: Axis, at: usize, region: &Region) {
        match axis {
            Axis::Vertical => {
                for y in region.y0..=region.y1 {
                    self.obstacles[y * self.width + at] = true;
                }
            }
            Axis::Horizontal => {
                for x in region.x0..=region.x1 {
                    self.obstacles[at * self.width + x] = true;
                }
            }
        }
    }

    fn clear(&mut self, axis: Axis, wall_at: usize, along: usize) {
        let i = match axis {
            Axis::Vertical => along * self.width + wall_at,
            Axis::Horizontal => wall_at * self.width + along,
        };
        self.obstacles[i] = false;
    }

    /// Punches one door through a wall; returns the cells (along the wall) it occupies.
    fn carve_door(&mut self, axis: Axis, wall_at: usize, region: &Region) -> Vec<usize> {
        let (lo, hi) = match axis {
            Axis::Vertical => (region.y0, region.y1),
            Axis::Horizontal => (region.x0, region.x1),
        };
        let span = hi - lo + 1;
        let w = self.rng.gen_range(1..=self.params.door_width).min(span);
        let start = self.rng.gen_range(lo..=hi + 1 - w);
        let cells: Vec<usize> = (start..start + w).collect();
        for &c in &cells {
            self.clear(axis, wall_at, c);
        }
        cells
    }

    fn split(&mut self, region: Region) {
        let p = self.params;
        let min = p.min_room_side;
        let splittable = |r: &Region, a: Axis| r.len(a) > 2 * min;

        let must = region.width() > p.max_room_side || region.height() > p.max_room_side;
        let any = splittable(&region, Axis::Vertical) || splittable(&region, Axis::Horizontal);
        if !any || (!must && self.rng.gen_bool(0.5)) {
            return;
        }

        let axis = match (splittable(&region, Axis::Vertical), splittable(&region, Axis::Horizontal)) {
            (true, false) => Axis::Vertical,
            (false, true) => Axis::Horizontal,
            _ if region.width() > region.height() => Axis::Vertical,
            _ if region.height() > region.width() => Axis::Horizontal,
            _ if self.rng.gen_bool(0.5) => Axis::Vertical,
            _ => Axis::Horizontal,
        };

        let (s0, s1) = region.span(axis);
        let len = region.len(axis);
        let (cmin, cmax) = p.corridor_width_range;
        // Band = [wall][corridor cells][wall] or a single wall.
        let mut band = 1;
        if len >= 2 * min + 2 + cmin && self.rng.gen_bool(p.corridor_probability) {
            let cw = self.rng.gen_range(cmin..=cmax).min(len - 2 * min - 2);
            band = cw + 2;
        }
        let valid: Vec<usize> = (s0 + min..=s1 + 1 - min - band)
            .filter(|&lo| [lo, lo + band - 1].iter().all(|w| !region.blocked(axis).contains(w)))
            .collect();
        if valid.is_empty() {
            return;
        }
        let lo = valid[self.rng.gen_range(0..valid.len())];
        let hi = lo + band - 1;

        self.set_wall(axis, lo, &region);
        let near = self.carve_door(axis, lo, &region);
        let far = if band > 1 {
            self.set_wall(axis, hi, &region);
            self.carve_door(axis, hi, &region)
        } else {
            near.clone()
        };

        let first = region.split_side(axis, lo, hi, &near, false);
        let second = region.split_side(axis, lo, hi, &far, true);
        self.split(first);
        self.split(second);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Room,
    Random,
}

/// Dispatches to the room or random generator. `density` only applies to random maps.
pub fn generate_map(kind: MapKind, width: usize, height: usize, density: f64, seed: u64) -> Result<GridMap> {
    match kind {
        MapKind::Room => generate_room_map(width, height, &RoomGenParams::with_seed(seed)),
        MapKind::Random => generate_random_map(width, height, density, seed),
    }
}

/// Generates a room-like map: rooms separated by one-cell walls with narrow
/// doors, plus corridors of sampled width.
pub fn generate_room_map(width: usize, height: usize, params: &RoomGenParams) -> Result<GridMap> {
    check_dims(width, height)?;
    params.validate()?;
    let mut builder = RoomBuilder {
        params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        width,
        obstacles: vec![false; width * height],
    };
    let root = Region { x0: 0, y0: 0, x1: width - 1, y1: height - 1, blocked_x: Vec::new(), blocked_y: Vec::new() };
    builder.split(root);
    let map = GridMap::from_obstacles(width, height, &builder.obstacles)?;
    Ok(map.keep_largest_component())
}

/// Places `round(density * area)` obstacles uniformly at random, then fills
/// any free pocket cut off from the largest free component.
pub fn generate_random_map(width: usize, height: usize, density: f64, seed: u64) -> Result<GridMap> {
    check_dims(width, height)?;
    if !(0.0..=0.5).contains(&density) {
        return Err(invalid(format!("density {density} outside [0, 0.5]")));
    }
    let area = width * height;
    let count = (density * area as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = vec![Cell::Free; area];
    for i in index::sample(&mut rng, area, count).into_iter() {
        cells[i] = Cell::Obstacle;
    }
    Ok(GridMap::from_cells(width, height, cells)?.keep_largest_component())
}
