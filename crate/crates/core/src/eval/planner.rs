//! Prioritized planning: agents are planned one at a time with space-time A*
//! around the reservations of every agent planned before them.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Coord, GridMap};
use crate::pathfind::bfs_distances;

pub const PLAN_ATTEMPTS: usize = 3;

/// Collision-free timed paths. `paths[i][t]` is agent `i` at step `t`; an
/// agent stays on its last cell once its path ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub paths: Vec<Vec<Coord>>,
    pub order: Vec<usize>,
}

impl Plan {
    /// Step at which the last agent reaches its goal for good.
    pub fn makespan(&self) -> usize {
        self.paths.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    pub fn position(&self, agent: usize, t: usize) -> Coord {
        let p = &self.paths[agent];
        p[t.min(p.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanOutcome {
    Solved(Plan),
    /// No priority order tried could schedule every agent.
    Failed {
        attempts: usize,
        last_blocked_agent: usize,
    },
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Solved(p) => Some(p),
            PlanOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Default)]
struct Reservations {
    vertex: HashSet<(Coord, usize)>,
    /// Moves `(from, to, t)` taken between `t` and `t + 1`.
    edge: HashSet<(Coord, Coord, usize)>,
    /// Cells occupied from a given step onwards by agents that have finished.
    parked: HashMap<Coord, usize>,
    /// Last step at which each cell is reserved by a moving agent.
    last_use: HashMap<Coord, usize>,
}

impl Reservations {
    fn occupied(&self, c: Coord, t: usize) -> bool {
        self.vertex.contains(&(c, t)) || self.parked.get(&c).is_some_and(|&from| t >= from)
    }

    fn swap(&self, from: Coord, to: Coord, t: usize) -> bool {
        self.edge.contains(&(to, from, t))
    }

    fn add(&mut self, path: &[Coord]) {
        for (t, &c) in path.iter().enumerate() {
            self.vertex.insert((c, t));
            let last = self.last_use.entry(c).or_insert(t);
            *last = (*last).max(t);
        }
        for (t, w) in path.windows(2).enumerate() {
            self.edge.insert((w[0], w[1], t));
        }
        self.parked.insert(*path.last().expect("non-empty path"), path.len() - 1);
    }
}

fn space_time_astar(
    map: &GridMap,
    start: Coord,
    goal: Coord,
    max_steps: usize,
    res: &Reservations,
) -> Option<Vec<Coord>> {
    let h = bfs_distances(map, goal);
    let heur = |c: Coord| h[map.index(c)].map(|d| d as usize);
    let free_after = res.last_use.get(&goal).map_or(0, |&t| t + 1);

    let mut open = BinaryHeap::new();
    let mut parent: HashMap<(Coord, usize), (Coord, usize)> = HashMap::new();
    let mut closed: HashSet<(Coord, usize)> = HashSet::new();
    let mut seq = 0u64;
    open.push(Reverse((heur(start)?, 0usize, start.y, start.x, seq)));
    while let Some(Reverse((_, t, y, x, _))) = open.pop() {
        let here = Coord::new(x, y);
        if !closed.insert((here, t)) {
            continue;
        }
        if here == goal && t >= free_after {
            let mut path = vec![here];
            let mut key = (here, t);
            while let Some(&prev) = parent.get(&key) {
                path.push(prev.0);
                key = prev;
            }
            path.reverse();
            return Some(path);
        }
        if t >= max_steps {
            continue;
        }
        let moves = std::iter::once(here).chain(map.free_neighbors4(here));
        for next in moves {
            let nt = t + 1;
            if res.occupied(next, nt) || res.swap(here, next, t) {
                continue;
            }
            if closed.contains(&(next, nt)) {
                continue;
            }
            let Some(hn) = heur(next) else { continue };
            if nt + hn > max_steps {
                continue;
            }
            parent.entry((next, nt)).or_insert((here, t));
            seq += 1;
            open.push(Reverse((nt + hn, nt, next.y, next.x, seq)));
        }
    }
    None
}

fn plan_in_order(
    map: &GridMap,
    starts: &[Coord],
    goals: &[Coord],
    max_steps: usize,
    order: &[usize],
) -> std::result::Result<Vec<Vec<Coord>>, usize> {
    let mut res = Reservations::default();
    let mut paths = vec![Vec::new(); starts.len()];
    for &i in order {
        if res.occupied(starts[i], 0) {
            return Err(i);
        }
        let path = space_time_astar(map, starts[i], goals[i], max_steps, &res).ok_or(i)?;
        res.add(&path);
        paths[i] = path;
    }
    Ok(paths)
}

/// Plans in index order first, then retries with seeded random orders up to
/// [`PLAN_ATTEMPTS`] attempts in total.
pub fn prioritized_plan(
    map: &GridMap,
    starts: &[Coord],
    goals: &[Coord],
    max_steps: usize,
    seed: u64,
) -> Result<PlanOutcome> {
    if starts.len() != goals.len() {
        return Err(invalid(format!("{} starts but {} goals", starts.len(), goals.len())));
    }
    for (i, (&s, &g)) in starts.iter().zip(goals).enumerate() {
        if !map.is_free(s) || !map.is_free(g) {
            return Err(invalid(format!("agent {i}: start {s} or goal {g} is not a free cell")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..starts.len()).collect();
    let mut last_blocked_agent = 0;
    for attempt in 0..PLAN_ATTEMPTS {
        if attempt > 0 {
            order.shuffle(&mut rng);
        }
        match plan_in_order(map, starts, goals, max_steps, &order) {
            Ok(paths) => return Ok(PlanOutcome::Solved(Plan { paths, order })),
            Err(agent) => {
                log::debug!("priority attempt {attempt} failed at agent {agent}");
                last_blocked_agent = agent;
            }
        }
    }
    Ok(PlanOutcome::Failed { attempts: PLAN_ATTEMPTS, last_blocked_agent })
}
