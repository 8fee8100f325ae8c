//! Agent-intent graph: each agent's next few individual shortest-path steps,
//! summarised as a per-axis Gaussian plus a direction vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Coord, GridMap};
use crate::pathfind::astar_grid4;

pub const INTENT_FEATURE_DIM: usize = 9;
pub const DEFAULT_HORIZON: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentVector {
    pub x_curr: f64,
    pub y_curr: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    /// Population variance along x.
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub dx: f64,
    pub dy: f64,
    pub mag: f64,
}

impl IntentVector {
    /// Feature order: `x, y, mu_x, sigma_x, mu_y, sigma_y, dx, dy, mag`.
    pub fn features(&self) -> [f64; INTENT_FEATURE_DIM] {
        [self.x_curr, self.y_curr, self.mu_x, self.sigma_x, self.mu_y, self.sigma_y, self.dx, self.dy, self.mag]
    }

    /// Row for an agent whose goal cannot be reached: position kept, rest zero.
    pub fn position_only(c: Coord) -> Self {
        Self {
            x_curr: c.x as f64,
            y_curr: c.y as f64,
            mu_x: 0.0,
            mu_y: 0.0,
            sigma_x: 0.0,
            sigma_y: 0.0,
            dx: 0.0,
            dy: 0.0,
            mag: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRow {
    pub agent: usize,
    pub vector: IntentVector,
    pub unreachable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentGraphObs {
    pub horizon: usize,
    pub rows: Vec<IntentRow>,
}

impl IntentGraphObs {
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.vector.features().to_vec()).collect()
    }
}

/// The `horizon` cells following `agent` on its individual shortest path,
/// padded with the goal once the path runs out.
pub fn predict_trajectory(map: &GridMap, agent: Coord, goal: Coord, horizon: usize) -> Result<Vec<Coord>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let path = astar_grid4(map, agent, goal)?
        .ok_or_else(|| Error::Unreachable(format!("goal {goal} unreachable from {agent}")))?;
    Ok((1..=horizon).map(|i| path.cells.get(i).copied().unwrap_or(goal)).collect())
}

pub fn intent_vector(current: Coord, trajectory: &[Coord]) -> Result<IntentVector> {
    let last = *trajectory.last().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let n = trajectory.len() as f64;
    let mean = |f: fn(&Coord) -> i32| trajectory.iter().map(|c| f(c) as f64).sum::<f64>() / n;
    let mu_x = mean(|c| c.x);
    let mu_y = mean(|c| c.y);
    let var = |f: fn(&Coord) -> i32, mu: f64| trajectory.iter().map(|c| (f(c) as f64 - mu).powi(2)).sum::<f64>() / n;
    let (vx, vy) = ((last.x - current.x) as f64, (last.y - current.y) as f64);
    let mag = vx.hypot(vy);
    let (dx, dy) = if mag > 0.0 { (vx / mag, vy / mag) } else { (0.0, 0.0) };
    Ok(IntentVector {
        x_curr: current.x as f64,
        y_curr: current.y as f64,
        mu_x,
        mu_y,
        sigma_x: var(|c| c.x, mu_x),
        sigma_y: var(|c| c.y, mu_y),
        dx,
        dy,
        mag,
    })
}

/// One row per agent, each from that agent's own shortest path with other
/// agents ignored.
pub fn build_intent_graph(
    map: &GridMap,
    positions: &[Coord],
    goals: &[Coord],
    horizon: usize,
) -> Result<IntentGraphObs> {
    if positions.len() != goals.len() {
        return Err(Error::Shape(format!("{} positions but {} goals", positions.len(), goals.len())));
    }
    let rows = positions
        .iter()
        .zip(goals)
        .enumerate()
        .map(|(agent, (&pos, &goal))| match predict_trajectory(map, pos, goal, horizon) {
            Ok(traj) => Ok(IntentRow { agent, vector: intent_vector(pos, &traj)?, unreachable: false }),
            Err(Error::Unreachable(_)) => {
                Ok(IntentRow { agent, vector: IntentVector::position_only(pos), unreachable: true })
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    Ok(IntentGraphObs { horizon, rows })
}

/// Rasterises each agent's Gaussian (axis-aligned, clamped variance) onto
/// the grid, taking the maximum over agents. Values are in `[0, 1]`.
pub fn intent_heatmap(map: &GridMap, graph: &IntentGraphObs) -> Vec<f64> {
    let mut heat = vec![0.0; map.area()];
    for row in graph.rows.iter().filter(|r| !r.unreachable) {
        let v = &row.vector;
        let sx = v.sigma_x.max(0.25);
        let sy = v.sigma_y.max(0.25);
        for (i, h) in heat.iter_mut().enumerate() {
            let c = map.coord(i);
            let ex = (c.x as f64 - v.mu_x).powi(2) / (2.0 * sx);
            let ey = (c.y as f64 - v.mu_y).powi(2) / (2.0 * sy);
            *h = f64::max(*h, (-(ex + ey)).exp());
        }
    }
    heat
}
