//! Occupancy grid and its text/JSON encodings.
//!
//! Coordinates are `(x = column, y = row)` with the origin at the top-left
//! cell. The text format has one line per row, `.` for a free cell and `#`
//! for an obstacle; every line has the same length.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Grid coordinate, serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    /// Ordering key used wherever a deterministic scan order is needed.
    pub fn row_major(self) -> (i32, i32) {
        (self.y, self.x)
    }
}

impl From<(i32, i32)> for Coord {
    fn from((x, y): (i32, i32)) -> Self {
        Self::new(x, y)
    }
}

impl From<Coord> for (i32, i32) {
    fn from(c: Coord) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Obstacle,
}

/// 4-neighbourhood offsets in expansion order: up, down, left, right.
pub const NEIGHBORS4: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

/// 8-neighbourhood offsets, row-major.
pub const NEIGHBORS8: [(i32, i32); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Immutable 2D occupancy grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    width: usize,
    height: usize,
    /// Row-major, index = y * width + x.
    cells: Vec<Cell>,
}

impl GridMap {
    pub const MIN_SIDE: usize = 1;

    pub fn from_cells(width: usize, height: usize, cells: Vec<Cell>) -> Result<Self> {
        if width < Self::MIN_SIDE || height < Self::MIN_SIDE {
            return Err(invalid(format!("map dimensions {width}x{height} are empty")));
        }
        if cells.len() != width * height {
            return Err(invalid(format!(
                "expected {} cells for {width}x{height}, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self { width, height, cells })
    }

    /// Builds a map from a `width * height` row-major obstacle mask.
    pub fn from_obstacles(width: usize, height: usize, obstacles: &[bool]) -> Result<Self> {
        let cells = obstacles.iter().map(|&o| if o { Cell::Obstacle } else { Cell::Free }).collect();
        Self::from_cells(width, height, cells)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, cells: vec![Cell::Free; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn in_bounds(&self, c: Coord) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Row-major index; caller guarantees `c` is in bounds.
    pub fn index(&self, c: Coord) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn coord(&self, index: usize) -> Coord {
        Coord::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn get(&self, c: Coord) -> Option<Cell> {
        self.in_bounds(c).then(|| self.cells[self.index(c)])
    }

    /// Out-of-bounds cells count as not free.
    pub fn is_free(&self, c: Coord) -> bool {
        self.get(c) == Some(Cell::Free)
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Free).count()
    }

    pub fn obstacle_density(&self) -> f64 {
        (self.area() - self.free_count()) as f64 / self.area() as f64
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.cells.len()).filter(|&i| self.cells[i] == Cell::Free).map(|i| self.coord(i))
    }

    /// Free 4-neighbours of `c` in expansion order.
    pub fn free_neighbors4(&self, c: Coord) -> impl Iterator<Item = Coord> + '_ {
        NEIGHBORS4.iter().map(move |&(dx, dy)| c.offset(dx, dy)).filter(|&n| self.is_free(n))
    }

    pub fn with_cell(&self, c: Coord, cell: Cell) -> Self {
        let mut out = self.clone();
        let i = out.index(c);
        out.cells[i] = cell;
        out
    }

    /// Labels free cells by 4-connected component (`None` for obstacles).
    /// Labels are assigned in row-major discovery order.
    pub fn components4(&self) -> (Vec<Option<usize>>, usize) {
        let mut labels = vec![None; self.cells.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if self.cells[start] != Cell::Free || labels[start].is_some() {
                continue;
            }
            labels[start] = Some(count);
            stack.push(self.coord(start));
            while let Some(c) = stack.pop() {
                for n in self.free_neighbors4(c) {
                    let ni = self.index(n);
                    if labels[ni].is_none() {
                        labels[ni] = Some(count);
                        stack.push(n);
                    }
                }
            }
            count += 1;
        }
        (labels, count)
    }

    pub fn is_free_space_connected(&self) -> bool {
        self.components4().1 == 1
    }

    /// Turns every free cell outside the largest 4-connected component into
    /// an obstacle. Ties go to the component discovered first.
    pub fn keep_largest_component(&self) -> Self {
        let (labels, count) = self.components4();
        if count <= 1 {
            return self.clone();
        }
        let mut sizes = vec![0usize; count];
        for l in labels.iter().flatten() {
            sizes[*l] += 1;
        }
        let keep = (0..count).fold(0, |best, l| if sizes[l] > sizes[best] { l } else { best });
        let cells = labels.iter().map(|l| if *l == Some(keep) { Cell::Free } else { Cell::Obstacle }).collect();
        Self { width: self.width, height: self.height, cells }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
        let rows: Vec<&str> = match rows.iter().rposition(|r| !r.is_empty()) {
            Some(last) => rows[..=last].to_vec(),
            None => return Err(Error::Parse { row: 0, message: "empty map".into() }),
        };
        let width = rows[0].chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        for (row, line) in rows.iter().enumerate() {
            let len = line.chars().count();
            if len != width {
                return Err(Error::Parse { row, message: format!("ragged row: expected {width} cells, got {len}") });
            }
            for ch in line.chars() {
                cells.push(match ch {
                    '.' => Cell::Free,
                    '#' => Cell::Obstacle,
                    other => return Err(Error::Parse { row, message: format!("illegal character {other:?}") }),
                });
            }
        }
        if width == 0 {
            return Err(Error::Parse { row: 0, message: "empty row".into() });
        }
        Self::from_cells(width, rows.len(), cells)
    }

    /// Canonical text form: one line per row, each terminated by `\n`.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| match c {
                Cell::Free => '.',
                Cell::Obstacle => '#',
            }));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> MapJson {
        MapJson { width: self.width, height: self.height, rows: self.serialize().lines().map(str::to_owned).collect() }
    }

    pub fn from_json(json: &MapJson) -> Result<Self> {
        let map = Self::parse(&json.rows.join("\n"))?;
        if map.width != json.width || map.height != json.height {
            return Err(invalid(format!(
                "declared size {}x{} does not match rows {}x{}",
                json.width, json.height, map.width, map.height
            )));
        }
        Ok(map)
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// JSON form of a map: `{"width", "height", "rows": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapJson {
    pub width: usize,
    pub height: usize,
    pub rows: Vec<String>,
}
