//! Augmented static graph: every map node, plus the ego agent and its goal,
//! tagged with how much detour reaching it costs relative to the ego's route.
//!
//! Per node `v` with agent `a` and goal `g` (all lengths are 4-connected
//! shortest-path move counts):
//!
//! ```text
//! accessibility  = len(a, v) - manhattan(a, v)
//! detour_to_goal = len(g, v) - manhattan(g, v)
//! off_route      = len(a, v) + len(g, v) - len(a, g)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Coord, GridMap};
use crate::pathfind::{astar_grid4, bfs_distances, manhattan};

pub const STATIC_FEATURE_DIM: usize = 5;

fn path_len(map: &GridMap, from: Coord, to: Coord) -> Result<u32> {
    astar_grid4(map, from, to)?
        .map(|p| p.len() as u32)
        .ok_or_else(|| Error::Unreachable(format!("no path from {from} to {to}")))
}

pub fn node_accessibility(map: &GridMap, agent: Coord, node: Coord) -> Result<u32> {
    Ok(path_len(map, agent, node)? - manhattan(agent, node))
}

pub fn detour_to_goal(map: &GridMap, goal: Coord, node: Coord) -> Result<u32> {
    Ok(path_len(map, goal, node)? - manhattan(goal, node))
}

pub fn off_route_degree(map: &GridMap, agent: Coord, goal: Coord, node: Coord) -> Result<u32> {
    Ok(path_len(map, agent, node)? + path_len(map, goal, node)? - path_len(map, agent, goal)?)
}

/// One row of the static graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticRow {
    pub position: Coord,
    /// Column divided by `width - 1`.
    pub x: f64,
    /// Row divided by `height - 1`.
    pub y: f64,
    pub accessibility: u32,
    pub detour_to_goal: u32,
    pub off_route: u32,
}

impl StaticRow {
    pub fn features(&self) -> [f64; STATIC_FEATURE_DIM] {
        [self.x, self.y, self.accessibility as f64, self.detour_to_goal as f64, self.off_route as f64]
    }
}

/// Map-node rows followed by the ego row and the goal row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticGraphObs {
    pub rows: Vec<StaticRow>,
    pub ego_index: usize,
    pub goal_index: usize,
    /// Map nodes dropped because the agent or goal cannot reach them.
    pub excluded: usize,
}

impl StaticGraphObs {
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.features().to_vec()).collect()
    }

    pub fn node_count(&self) -> usize {
        self.rows.len() - 2
    }
}

fn normalized(v: i32, extent: usize) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        v as f64 / (extent - 1) as f64
    }
}

/// Builds the static graph from one BFS rooted at the agent and one at the
/// goal. Nodes either endpoint cannot reach are skipped and counted in
/// `excluded`.
pub fn build_static_graph(map: &GridMap, nodes: &[Coord], agent: Coord, goal: Coord) -> Result<StaticGraphObs> {
    for (name, c) in [("agent", agent), ("goal", goal)] {
        if !map.is_free(c) {
            return Err(Error::InvalidArgument(format!("{name} {c} is not a free cell")));
        }
    }
    let from_agent = bfs_distances(map, agent);
    let from_goal = bfs_distances(map, goal);
    let direct = from_agent[map.index(goal)]
        .ok_or_else(|| Error::Unreachable(format!("goal {goal} unreachable from agent {agent}")))?;

    let row = |c: Coord, da: u32, dg: u32| StaticRow {
        position: c,
        x: normalized(c.x, map.width()),
        y: normalized(c.y, map.height()),
        accessibility: da - manhattan(agent, c),
        detour_to_goal: dg - manhattan(goal, c),
        off_route: da + dg - direct,
    };

    let mut rows = Vec::with_capacity(nodes.len() + 2);
    let mut excluded = 0;
    for &c in nodes {
        let i = map.index(c);
        match (map.is_free(c), from_agent[i], from_goal[i]) {
            (true, Some(da), Some(dg)) => rows.push(row(c, da, dg)),
            _ => excluded += 1,
        }
    }
    if excluded > 0 {
        log::warn!("static graph: {excluded} unreachable map nodes excluded");
    }
    let ego_index = rows.len();
    rows.push(row(agent, 0, direct));
    rows.push(row(goal, direct, 0));
    Ok(StaticGraphObs { rows, ego_index, goal_index: ego_index + 1, excluded })
}
