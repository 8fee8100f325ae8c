//! Free-space skeletons and the sparse map graph built on them.
//!
//! Two thinning routes are provided. [`thin_zhang_suen`] runs the classic
//! two-subpass Zhang-Suen test, but commits each candidate sequentially and
//! re-checks it against the already-thinned image, which keeps every
//! deletion a simple point: 8-connected components of free space never split
//! or vanish. [`thin_medial_axis`] first erodes free space in increasing
//! order of the chessboard distance transform while pinning ridge pixels of
//! that transform, then hands the result to the same Zhang-Suen cleanup.
//! Ridge pinning is what keeps the extra spurs into room corners that make
//! the medial-axis skeleton richer than the plain Zhang-Suen one.
//!
//! Both routes end with a pass that breaks any 2x2 block of skeleton pixels
//! by removing one pixel whose neighbours stay connected without it.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::grid::{Coord, GridMap, NEIGHBORS8};
use crate::pathfind::{astar_skeleton8, Path, PixelMask};

/// Zhang-Suen neighbour ring P2..P9: N, NE, E, SE, S, SW, W, NW.
const ZS_RING: [(i32, i32); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Counter-clockwise ring starting east, for the Yokoi connectivity number.
const YOKOI_RING: [(i32, i32); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum ThinningMethod {
    ZhangSuen,
    #[default]
    MedialAxis,
}

/// One-pixel-wide skeleton of a map's free space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Skeleton {
    pub mask: PixelMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Branch,
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MapNode {
    pub position: Coord,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapEdge {
    /// Node indices, `a < b`.
    pub a: usize,
    pub b: usize,
    pub path: Path,
}

impl MapEdge {
    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapGraph {
    pub skeleton: Skeleton,
    pub nodes: Vec<MapNode>,
    pub edges: Vec<MapEdge>,
}

fn ring_values(mask: &PixelMask, c: Coord, ring: &[(i32, i32); 8]) -> [bool; 8] {
    let mut v = [false; 8];
    for (k, &(dx, dy)) in ring.iter().enumerate() {
        v[k] = mask.get(c.offset(dx, dy));
    }
    v
}

/// Yokoi 8-connectivity number; a set pixel is simple iff this equals 1.
fn connectivity_number(mask: &PixelMask, c: Coord) -> u32 {
    let x = ring_values(mask, c, &YOKOI_RING).map(|b| !b as u32);
    [0usize, 2, 4, 6].iter().map(|&k| x[k] - x[k] * x[(k + 1) % 8] * x[(k + 2) % 8]).sum()
}

pub(crate) fn is_simple(mask: &PixelMask, c: Coord) -> bool {
    connectivity_number(mask, c) == 1
}

/// True when the set 8-neighbours of `c` form one 8-connected group inside
/// the 3x3 window. Removing such a pixel never splits a component, though it
/// may open a one-pixel background hole.
fn locally_connected(mask: &PixelMask, c: Coord) -> bool {
    let ring = ring_values(mask, c, &ZS_RING);
    let set: Vec<usize> = (0..8).filter(|&k| ring[k]).collect();
    if set.is_empty() {
        return false;
    }
    let pos = |k: usize| ZS_RING[k];
    let adjacent = |a: usize, b: usize| {
        let (pa, pb) = (pos(a), pos(b));
        (pa.0 - pb.0).abs() <= 1 && (pa.1 - pb.1).abs() <= 1
    };
    let mut seen = vec![set[0]];
    let mut frontier = vec![set[0]];
    while let Some(k) = frontier.pop() {
        for &j in &set {
            if !seen.contains(&j) && adjacent(k, j) {
                seen.push(j);
                frontier.push(j);
            }
        }
    }
    seen.len() == set.len()
}

/// True when removing `c` leaves its set 8-neighbours connected to each other
/// somewhere in the mask, possibly around a loop.
fn globally_connected_without(mask: &mut PixelMask, c: Coord) -> bool {
    let ring: Vec<Coord> = NEIGHBORS8.iter().map(|&(dx, dy)| c.offset(dx, dy)).filter(|&n| mask.get(n)).collect();
    let Some(&first) = ring.first() else {
        return false;
    };
    mask.set(c, false);
    let mut seen = HashSet::from([first]);
    let mut stack = vec![first];
    while let Some(p) = stack.pop() {
        for &(dx, dy) in &NEIGHBORS8 {
            let n = p.offset(dx, dy);
            if mask.get(n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    mask.set(c, true);
    ring.iter().all(|n| seen.contains(n))
}

fn zs_deletable(mask: &PixelMask, c: Coord, first: bool) -> bool {
    let p = ring_values(mask, c, &ZS_RING);
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
    let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
    if first {
        !(n && e && s) && !(e && s && w)
    } else {
        !(n && e && w) && !(n && s && w)
    }
}

/// One Zhang-Suen subpass: candidates are found on the current image, then
/// deleted one at a time while they still pass the test.
fn zs_subpass(mask: &mut PixelMask, first: bool) -> bool {
    let candidates: Vec<Coord> = mask.coords().filter(|&c| zs_deletable(mask, c, first)).collect();
    let mut changed = false;
    for c in candidates {
        if zs_deletable(mask, c, first) {
            mask.set(c, false);
            changed = true;
        }
    }
    changed
}

fn has_block_at(mask: &PixelMask, c: Coord) -> bool {
    mask.get(c) && mask.get(c.offset(1, 0)) && mask.get(c.offset(0, 1)) && mask.get(c.offset(1, 1))
}

/// Top-left corners of every fully set 2x2 block.
pub fn blocks_2x2(mask: &PixelMask) -> Vec<Coord> {
    mask.coords().filter(|&c| has_block_at(mask, c)).collect()
}

/// Removes one pixel from each 2x2 block while that can be done without
/// disconnecting the skeleton.
fn break_blocks(mask: &mut PixelMask) -> bool {
    let mut changed = false;
    loop {
        let mut progressed = false;
        for corner in blocks_2x2(mask) {
            if !has_block_at(mask, corner) {
                continue;
            }
            let members = [corner, corner.offset(1, 0), corner.offset(0, 1), corner.offset(1, 1)];
            let victim = members
                .iter()
                .find(|&&c| is_simple(mask, c))
                .or_else(|| members.iter().find(|&&c| locally_connected(mask, c)))
                .or_else(|| members.iter().find(|&&c| globally_connected_without(mask, c)));
            if let Some(&victim) = victim {
                mask.set(victim, false);
                progressed = true;
            }
        }
        if !progressed {
            return changed;
        }
        changed = true;
    }
}

fn zhang_suen_to_fixpoint(mask: &mut PixelMask) {
    loop {
        let mut changed = false;
        while zs_subpass(mask, true) | zs_subpass(mask, false) {
            changed = true;
        }
        changed |= break_blocks(mask);
        if !changed {
            break;
        }
    }
}

fn free_mask(map: &GridMap) -> PixelMask {
    PixelMask {
        width: map.width(),
        height: map.height(),
        pixels: map.cells().iter().map(|&c| c == crate::grid::Cell::Free).collect(),
    }
}

pub fn thin_zhang_suen(map: &GridMap) -> Skeleton {
    let mut mask = free_mask(map);
    zhang_suen_to_fixpoint(&mut mask);
    Skeleton { mask }
}

/// Chessboard distance from each free cell to the nearest obstacle or to
/// the outside of the map; 0 on obstacles.
pub fn chessboard_distance(map: &GridMap) -> Vec<u32> {
    let (w, h) = (map.width() as i32, map.height() as i32);
    let mut d: Vec<u32> =
        map.cells().iter().map(|&c| if c == crate::grid::Cell::Free { u32::MAX } else { 0 }).collect();
    let at = |d: &Vec<u32>, x: i32, y: i32| -> u32 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0
        } else {
            d[(y * w + x) as usize]
        }
    };
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if d[i] == 0 {
                continue;
            }
            let m = [(-1, -1), (0, -1), (1, -1), (-1, 0)].iter().map(|&(dx, dy)| at(&d, x + dx, y + dy)).min().unwrap();
            d[i] = d[i].min(m.saturating_add(1));
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = (y * w + x) as usize;
            if d[i] == 0 {
                continue;
            }
            let m = [(1, 1), (0, 1), (-1, 1), (1, 0)].iter().map(|&(dx, dy)| at(&d, x + dx, y + dy)).min().unwrap();
            d[i] = d[i].min(m.saturating_add(1));
        }
    }
    d
}

/// Ridge test: along some axis or diagonal the distance value is a local
/// maximum that strictly exceeds at least one side.
fn is_ridge(dist: &[u32], map: &GridMap, c: Coord) -> bool {
    let at = |c: Coord| if map.in_bounds(c) { dist[map.index(c)] } else { 0 };
    let v = at(c);
    [(1, 0), (0, 1), (1, 1), (1, -1)].iter().any(|&(dx, dy)| {
        let a = at(c.offset(dx, dy));
        let b = at(c.offset(-dx, -dy));
        v >= a && v >= b && v > a.min(b)
    })
}

pub fn thin_medial_axis(map: &GridMap) -> Skeleton {
    let dist = chessboard_distance(map);
    let mut mask = free_mask(map);
    let mut order: Vec<Coord> = mask.coords().collect();
    order.sort_by_key(|&c| (dist[map.index(c)], c.y, c.x));
    let anchored: Vec<bool> = (0..map.area()).map(|i| dist[i] > 0 && is_ridge(&dist, map, map.coord(i))).collect();
    loop {
        let mut changed = false;
        for &c in &order {
            if mask.get(c) && !anchored[map.index(c)] && mask.neighbor_count(c) >= 2 && is_simple(&mask, c) {
                mask.set(c, false);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    zhang_suen_to_fixpoint(&mut mask);
    Skeleton { mask }
}

pub fn thin(map: &GridMap, method: ThinningMethod) -> Skeleton {
    match method {
        ThinningMethod::ZhangSuen => thin_zhang_suen(map),
        ThinningMethod::MedialAxis => thin_medial_axis(map),
    }
}

/// Branch (>= 3 skeleton neighbours) and leaf (<= 1) pixels in row-major order.
pub fn extract_nodes(skeleton: &Skeleton) -> Vec<MapNode> {
    skeleton
        .mask
        .coords()
        .filter_map(|c| match skeleton.mask.neighbor_count(c) {
            0 | 1 => Some(MapNode { position: c, kind: NodeKind::Leaf }),
            2 => None,
            _ => Some(MapNode { position: c, kind: NodeKind::Branch }),
        })
        .collect()
}

/// Nodes reachable from `from` along the skeleton without stepping through
/// another node. Only these can share an edge with `from`.
fn node_neighbors(mask: &PixelMask, node_at: &[Option<usize>], from: usize, start: Coord) -> Vec<usize> {
    let idx = |c: Coord| c.y as usize * mask.width + c.x as usize;
    let mut seen = vec![false; mask.pixels.len()];
    let mut queue = VecDeque::from([start]);
    seen[idx(start)] = true;
    let mut found = Vec::new();
    while let Some(c) = queue.pop_front() {
        for &(dx, dy) in &NEIGHBORS8 {
            let n = c.offset(dx, dy);
            if !mask.get(n) || seen[idx(n)] {
                continue;
            }
            seen[idx(n)] = true;
            match node_at[idx(n)] {
                Some(j) if j != from => found.push(j),
                _ => queue.push_back(n),
            }
        }
    }
    found.sort_unstable();
    found
}

/// Connects node pairs whose 8-connected skeleton A* path has no other node
/// strictly inside it. Edges are unordered, deduplicated and sorted by `(a, b)`.
pub fn build_edges(skeleton: &Skeleton, nodes: &[MapNode]) -> Vec<MapEdge> {
    let mask = &skeleton.mask;
    let mut node_at = vec![None; mask.pixels.len()];
    for (i, n) in nodes.iter().enumerate() {
        node_at[n.position.y as usize * mask.width + n.position.x as usize] = Some(i);
    }
    let mut edges = Vec::new();
    for (a, node) in nodes.iter().enumerate() {
        for b in node_neighbors(mask, &node_at, a, node.position) {
            if b <= a {
                continue;
            }
            let path = astar_skeleton8(mask, node.position, nodes[b].position)
                .expect("nodes lie on the skeleton")
                .expect("candidate was reached by flood fill");
            let interior = &path.cells[1..path.cells.len() - 1];
            let clean = interior.iter().all(|c| node_at[c.y as usize * mask.width + c.x as usize].is_none());
            if clean {
                edges.push(MapEdge { a, b, path });
            }
        }
    }
    edges
}

pub fn extract_graph(map: &GridMap, method: ThinningMethod) -> MapGraph {
    let skeleton = thin(map, method);
    let nodes = extract_nodes(&skeleton);
    let edges = build_edges(&skeleton, &nodes);
    MapGraph { skeleton, nodes, edges }
}

/// Labels set pixels by 8-connected component.
pub fn components8(mask: &PixelMask) -> (Vec<Option<usize>>, usize) {
    let mut labels = vec![None; mask.pixels.len()];
    let mut count = 0;
    let w = mask.width;
    for start in 0..mask.pixels.len() {
        if !mask.pixels[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(count);
        let mut stack = vec![Coord::new((start % w) as i32, (start / w) as i32)];
        while let Some(c) = stack.pop() {
            for &(dx, dy) in &NEIGHBORS8 {
                let n = c.offset(dx, dy);
                if mask.get(n) {
                    let i = n.y as usize * w + n.x as usize;
                    if labels[i].is_none() {
                        labels[i] = Some(count);
                        stack.push(n);
                    }
                }
            }
        }
        count += 1;
    }
    (labels, count)
}

/// JSON dump: `{"nodes":[{"x","y","kind"}], "edges":[{"a","b","len"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub nodes: Vec<NodeDump>,
    pub edges: Vec<EdgeDump>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDump {
    pub x: i32,
    pub y: i32,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDump {
    pub a: usize,
    pub b: usize,
    pub len: usize,
}

impl MapGraph {
    pub fn dump(&self) -> GraphDump {
        GraphDump {
            nodes: self.nodes.iter().map(|n| NodeDump { x: n.position.x, y: n.position.y, kind: n.kind }).collect(),
            edges: self.edges.iter().map(|e| EdgeDump { a: e.a, b: e.b, len: e.len() }).collect(),
        }
    }

    pub fn node_positions(&self) -> Vec<Coord> {
        self.nodes.iter().map(|n| n.position).collect()
    }
}
