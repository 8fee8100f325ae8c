//! Joint-action MAPF environment.
//!
//! All agents act simultaneously. Intended moves are resolved to a fixpoint:
//! agents contending for one cell, agents swapping cells, and agents moving
//! into a cell whose occupant stays put are all sent back to their own cell
//! and flagged as collided. Moves into obstacles or off the map are also
//! executed as idle and flagged. Idle agents are never flagged.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Coord, GridMap};
use crate::pathfind::{astar_grid4_avoiding, bfs_distances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Idle,
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Idle, Action::Up, Action::Down, Action::Left, Action::Right];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Idle => (0, 0),
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }

    /// The action that moves `from` onto the 4-adjacent (or same) cell `to`.
    pub fn between(from: Coord, to: Coord) -> Option<Self> {
        let d = (to.x - from.x, to.y - from.y);
        Self::ALL.into_iter().find(|a| a.delta() == d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Success,
    Timeout,
}

pub const TRAIN_MAX_STEPS: usize = 256;
pub const EVAL_MAX_STEPS: usize = 512;

/// Reward constants.
pub const MOVE_REWARD: f64 = -0.3;
pub const IDLE_OFF_GOAL_REWARD: f64 = -0.3;
pub const IDLE_ON_GOAL_REWARD: f64 = 0.0;
pub const COLLISION_REWARD: f64 = -2.0;
pub const BLOCKING_PENALTY: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Blocking tolerance in moves.
    pub tau: u32,
    /// Skip blocking detection entirely (η is then always 0).
    pub compute_blocking: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { tau: 10, compute_blocking: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    pub map: Arc<GridMap>,
    pub positions: Vec<Coord>,
    pub previous_positions: Vec<Coord>,
    pub goals: Vec<Coord>,
    pub step: usize,
    pub max_steps: usize,
}

impl EnvState {
    pub fn num_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn on_goal(&self, agent: usize) -> bool {
        self.positions[agent] == self.goals[agent]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub executed: Vec<Action>,
    pub rewards: Vec<f64>,
    pub collided: Vec<bool>,
    pub eta: Vec<usize>,
    pub status: Status,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.status != Status::Running
    }
}

pub fn reset(map: Arc<GridMap>, starts: &[Coord], goals: &[Coord], max_steps: usize) -> Result<EnvState> {
    if starts.len() != goals.len() {
        return Err(invalid(format!("{} starts but {} goals", starts.len(), goals.len())));
    }
    for (i, (&s, &g)) in starts.iter().zip(goals).enumerate() {
        if !map.is_free(s) {
            return Err(invalid(format!("agent {i}: start {s} is not a free cell")));
        }
        if !map.is_free(g) {
            return Err(invalid(format!("agent {i}: goal {g} is not a free cell")));
        }
        if starts[..i].contains(&s) {
            return Err(invalid(format!("agent {i}: duplicate start {s}")));
        }
        if goals[..i].contains(&g) {
            return Err(invalid(format!("agent {i}: duplicate goal {g}")));
        }
        if bfs_distances(&map, s)[map.index(g)].is_none() {
            return Err(invalid(format!("agent {i}: goal {g} unreachable from start {s}")));
        }
    }
    Ok(EnvState {
        map,
        positions: starts.to_vec(),
        previous_positions: starts.to_vec(),
        goals: goals.to_vec(),
        step: 0,
        max_steps,
    })
}

/// Idle plus every in-bounds, obstacle-free move that does not return the
/// agent to where it stood before its last step. Cells held by other agents
/// are not excluded.
pub fn valid_actions(state: &EnvState, agent: usize) -> Vec<Action> {
    let here = state.positions[agent];
    let back = state.previous_positions[agent];
    Action::ALL
        .into_iter()
        .filter(|&a| {
            if a == Action::Idle {
                return true;
            }
            let (dx, dy) = a.delta();
            let to = here.offset(dx, dy);
            state.map.is_free(to) && (to != back || back == here)
        })
        .collect()
}

pub fn compute_reward(executed: Action, on_goal: bool, collided: bool, eta: usize) -> f64 {
    let base = if collided {
        COLLISION_REWARD
    } else if executed == Action::Idle && on_goal {
        IDLE_ON_GOAL_REWARD
    } else if executed == Action::Idle {
        IDLE_OFF_GOAL_REWARD
    } else {
        MOVE_REWARD
    };
    if executed == Action::Idle {
        base + BLOCKING_PENALTY * eta as f64
    } else {
        base
    }
}

pub fn is_done(state: &EnvState) -> Status {
    if state.positions.iter().zip(&state.goals).all(|(p, g)| p == g) {
        Status::Success
    } else if state.step >= state.max_steps {
        Status::Timeout
    } else {
        Status::Running
    }
}

/// Per-agent shortest paths to goal with no agent in the way.
fn free_path_cells(state: &EnvState) -> Vec<Option<Vec<Coord>>> {
    (0..state.num_agents())
        .map(|j| astar_grid4_avoiding(&state.map, state.positions[j], state.goals[j], &[]).map(|p| p.cells))
        .collect()
}

fn blocked_by(state: &EnvState, ego: usize, tau: u32, free_paths: &[Option<Vec<Coord>>]) -> usize {
    let ego_cell = state.positions[ego];
    (0..state.num_agents())
        .filter(|&j| j != ego)
        .filter(|&j| {
            let Some(after) = &free_paths[j] else {
                return false;
            };
            // A shortest path that already avoids the ego gives before == after.
            if !after.contains(&ego_cell) {
                return false;
            }
            let after_len = after.len() - 1;
            match astar_grid4_avoiding(&state.map, state.positions[j], state.goals[j], &[ego_cell]) {
                None => true,
                Some(before) => before.len() > after_len + tau as usize,
            }
        })
        .count()
}

/// Whether `agent`, standing where it is, blocks others, and how many.
/// Other agents are never treated as obstacles; only the ego is removed
/// between the two path computations.
pub fn is_blocking(state: &EnvState, agent: usize, tau: u32) -> (bool, usize) {
    let eta = blocked_by(state, agent, tau, &free_path_cells(state));
    (eta > 0, eta)
}

/// Resolves intended targets to a conflict-free assignment. Returns final
/// cells and the set of agents that were sent back.
fn resolve(positions: &[Coord], intended: &[Coord]) -> (Vec<Coord>, Vec<bool>) {
    let n = positions.len();
    let mut target = intended.to_vec();
    let mut reverted = vec![false; n];
    let at: HashMap<Coord, usize> = positions.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    loop {
        let mut changed = false;
        let mut claims: HashMap<Coord, Vec<usize>> = HashMap::new();
        for (i, &t) in target.iter().enumerate() {
            claims.entry(t).or_default().push(i);
        }
        for i in 0..n {
            if target[i] == positions[i] {
                continue;
            }
            let contested = claims[&target[i]].len() > 1;
            let swap = at.get(&target[i]).is_some_and(|&j| j != i && target[j] == positions[i]);
            if contested || swap {
                target[i] = positions[i];
                reverted[i] = true;
                changed = true;
            }
        }
        if !changed {
            return (target, reverted);
        }
    }
}

pub fn step_joint(state: &EnvState, actions: &[Action], config: &EnvConfig) -> Result<(EnvState, StepOutcome)> {
    let n = state.num_agents();
    if actions.len() != n {
        return Err(invalid(format!("expected {n} actions, got {}", actions.len())));
    }
    let mut collided = vec![false; n];
    let intended: Vec<Coord> = actions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let (dx, dy) = a.delta();
            let to = state.positions[i].offset(dx, dy);
            if state.map.is_free(to) {
                to
            } else {
                collided[i] = true;
                state.positions[i]
            }
        })
        .collect();
    let (next, reverted) = resolve(&state.positions, &intended);
    for i in 0..n {
        collided[i] |= reverted[i];
    }
    let executed: Vec<Action> =
        (0..n).map(|i| Action::between(state.positions[i], next[i]).expect("resolved move is adjacent")).collect();

    let new_state = EnvState {
        map: Arc::clone(&state.map),
        previous_positions: state.positions.clone(),
        positions: next,
        goals: state.goals.clone(),
        step: state.step + 1,
        max_steps: state.max_steps,
    };

    let mut eta = vec![0; n];
    if config.compute_blocking && executed.contains(&Action::Idle) {
        let free_paths = free_path_cells(&new_state);
        for i in (0..n).filter(|&i| executed[i] == Action::Idle) {
            eta[i] = blocked_by(&new_state, i, config.tau, &free_paths);
        }
    }
    let rewards = (0..n).map(|i| compute_reward(executed[i], new_state.on_goal(i), collided[i], eta[i])).collect();
    let status = is_done(&new_state);
    Ok((new_state, StepOutcome { executed, rewards, collided, eta, status }))
}

/// Owning wrapper that steps in place.
#[derive(Debug, Clone)]
pub struct Env {
    pub state: EnvState,
    pub config: EnvConfig,
}

impl Env {
    pub fn new(state: EnvState, config: EnvConfig) -> Self {
        Self { state, config }
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        let (next, outcome) = step_joint(&self.state, actions, &self.config)?;
        self.state = next;
        Ok(outcome)
    }
}

/// True when no two agents share a cell and no pair swapped cells between
/// `before` and `after`.
pub fn is_conflict_free(before: &[Coord], after: &[Coord]) -> bool {
    let n = after.len();
    for i in 0..n {
        for j in i + 1..n {
            if after[i] == after[j] {
                return false;
            }
            if after[i] == before[j] && after[j] == before[i] && before[i] != before[j] {
                return false;
            }
        }
    }
    true
}
