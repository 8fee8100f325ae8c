//! Shortest-path primitives on the occupancy grid and on skeleton masks.
//!
//! All searches use unit move costs. Ties on `f` are expanded in row-major
//! `(y, x)` order, then FIFO, so outputs are reproducible bit for bit.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Coord, GridMap, NEIGHBORS4, NEIGHBORS8};

/// Cells from start to goal inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Coord>,
}

impl Path {
    /// Number of moves.
    pub fn len(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.len() <= 1
    }

    pub fn start(&self) -> Coord {
        self.cells[0]
    }

    pub fn goal(&self) -> Coord {
        *self.cells.last().expect("path has at least one cell")
    }
}

pub fn manhattan(a: Coord, b: Coord) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

pub fn chebyshev(a: Coord, b: Coord) -> u32 {
    a.x.abs_diff(b.x).max(a.y.abs_diff(b.y))
}

/// Rectangular mask of passable pixels for the generic search.
trait Passable {
    fn width(&self) -> usize;
    fn passable(&self, c: Coord) -> bool;
}

struct GridWithBlocks<'a> {
    map: &'a GridMap,
    blocked: &'a [Coord],
}

impl Passable for GridWithBlocks<'_> {
    fn width(&self) -> usize {
        self.map.width()
    }

    fn passable(&self, c: Coord) -> bool {
        self.map.is_free(c) && !self.blocked.contains(&c)
    }
}

/// Boolean pixel mask, row-major, as produced by thinning.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![false; width * height] }
    }

    pub fn get(&self, c: Coord) -> bool {
        c.x >= 0
            && c.y >= 0
            && (c.x as usize) < self.width
            && (c.y as usize) < self.height
            && self.pixels[c.y as usize * self.width + c.x as usize]
    }

    pub fn set(&mut self, c: Coord, v: bool) {
        let i = c.y as usize * self.width + c.x as usize;
        self.pixels[i] = v;
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        let w = self.width;
        self.pixels.iter().enumerate().filter(|(_, &p)| p).map(move |(i, _)| Coord::new((i % w) as i32, (i / w) as i32))
    }

    /// Number of set 8-neighbours of `c`.
    pub fn neighbor_count(&self, c: Coord) -> usize {
        NEIGHBORS8.iter().filter(|&&(dx, dy)| self.get(c.offset(dx, dy))).count()
    }
}

impl Passable for PixelMask {
    fn width(&self) -> usize {
        self.width
    }

    fn passable(&self, c: Coord) -> bool {
        self.get(c)
    }
}

fn astar<P: Passable>(
    space: &P,
    start: Coord,
    goal: Coord,
    moves: &[(i32, i32)],
    heuristic: fn(Coord, Coord) -> u32,
) -> Option<Path> {
    if start == goal {
        return Some(Path { cells: vec![start] });
    }
    let w = space.width();
    let idx = |c: Coord| c.y as usize * w + c.x as usize;
    let mut g: std::collections::HashMap<usize, (u32, Coord)> = std::collections::HashMap::new();
    let mut closed = std::collections::HashSet::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    g.insert(idx(start), (0, start));
    open.push(Reverse((heuristic(start, goal), start.y, start.x, seq, 0u32)));
    while let Some(Reverse((_, y, x, _, cost))) = open.pop() {
        let cur = Coord::new(x, y);
        if !closed.insert(idx(cur)) {
            continue;
        }
        if cur == goal {
            let mut cells = vec![cur];
            let mut c = cur;
            while c != start {
                c = g[&idx(c)].1;
                cells.push(c);
            }
            cells.reverse();
            return Some(Path { cells });
        }
        for &(dx, dy) in moves {
            let n = cur.offset(dx, dy);
            if !space.passable(n) || closed.contains(&idx(n)) {
                continue;
            }
            let ng = cost + 1;
            let better = g.get(&idx(n)).is_none_or(|&(old, _)| ng < old);
            if better {
                g.insert(idx(n), (ng, cur));
                seq += 1;
                open.push(Reverse((ng + heuristic(n, goal), n.y, n.x, seq, ng)));
            }
        }
    }
    None
}

/// Shortest 4-connected path between two free cells, or `None` if unreachable.
pub fn astar_grid4(map: &GridMap, start: Coord, goal: Coord) -> Result<Option<Path>> {
    for (name, c) in [("start", start), ("goal", goal)] {
        if !map.is_free(c) {
            return Err(invalid(format!("{name} {c} is blocked or out of bounds")));
        }
    }
    Ok(astar(&GridWithBlocks { map, blocked: &[] }, start, goal, &NEIGHBORS4, manhattan))
}

/// Like [`astar_grid4`] but treats `blocked` as extra obstacles. Returns
/// `None` (rather than an error) when an endpoint is blocked.
pub fn astar_grid4_avoiding(map: &GridMap, start: Coord, goal: Coord, blocked: &[Coord]) -> Option<Path> {
    let space = GridWithBlocks { map, blocked };
    if !space.passable(start) || !space.passable(goal) {
        return None;
    }
    astar(&space, start, goal, &NEIGHBORS4, manhattan)
}

/// Shortest 8-connected path confined to skeleton pixels; diagonal moves cost 1.
pub fn astar_skeleton8(skeleton: &PixelMask, start: Coord, goal: Coord) -> Result<Option<Path>> {
    for (name, c) in [("start", start), ("goal", goal)] {
        if !skeleton.get(c) {
            return Err(invalid(format!("{name} {c} is not a skeleton pixel")));
        }
    }
    Ok(astar(skeleton, start, goal, &NEIGHBORS8, chebyshev))
}

/// Single-source 4-connected BFS distances over free cells, indexed like the map.
pub fn bfs_distances(map: &GridMap, source: Coord) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.area()];
    if !map.is_free(source) {
        return dist;
    }
    dist[map.index(source)] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(c) = queue.pop_front() {
        let d = dist[map.index(c)].unwrap();
        for n in map.free_neighbors4(c) {
            let i = map.index(n);
            if dist[i].is_none() {
                dist[i] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}
