//! Ego-centred field-of-view channels.
//!
//! Channel layout (each `fov x fov`, ego at the centre, indexed `[row][col]`):
//! 0. obstacles, with out-of-map cells marked as obstacles
//! 1. other agents' positions
//! 2. other agents' goals that fall inside the view
//! 3. own goal, or its projection onto the view border when outside

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Coord, GridMap};

pub const DEFAULT_FOV: usize = 11;
pub const CHANNELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalObs {
    pub fov: usize,
    /// `channels[c][row][col]`, entries 0 or 1.
    pub channels: Vec<Vec<Vec<u8>>>,
    /// Unit direction and Euclidean distance to the own goal.
    pub goal_vec: [f64; 3],
}

impl LocalObs {
    pub fn flatten(&self) -> Vec<f64> {
        self.channels
            .iter()
            .flat_map(|c| c.iter().flat_map(|r| r.iter().map(|&v| v as f64)))
            .chain(self.goal_vec)
            .collect()
    }
}

pub fn goal_direction(agent: Coord, goal: Coord) -> [f64; 3] {
    let (vx, vy) = ((goal.x - agent.x) as f64, (goal.y - agent.y) as f64);
    let mag = vx.hypot(vy);
    if mag == 0.0 {
        [0.0, 0.0, 0.0]
    } else {
        [vx / mag, vy / mag, mag]
    }
}

/// Offset of the goal inside the view: exact when visible, otherwise the
/// border cell hit by the straight line from the ego towards the goal.
fn project_goal(dx: i32, dy: i32, radius: i32) -> (i32, i32) {
    let reach = dx.abs().max(dy.abs());
    if reach <= radius {
        return (dx, dy);
    }
    let t = radius as f64 / reach as f64;
    ((dx as f64 * t).round() as i32, (dy as f64 * t).round() as i32)
}

pub fn fov_channels(map: &GridMap, positions: &[Coord], goals: &[Coord], ego: usize, fov: usize) -> Result<LocalObs> {
    if fov.is_multiple_of(2) || !(5..=21).contains(&fov) {
        return Err(invalid(format!("field of view {fov} must be odd and in [5, 21]")));
    }
    if ego >= positions.len() || positions.len() != goals.len() {
        return Err(invalid(format!("ego {ego} out of range for {} agents", positions.len())));
    }
    let r = (fov / 2) as i32;
    let me = positions[ego];
    let mut channels = vec![vec![vec![0u8; fov]; fov]; CHANNELS];
    let slot = |c: Coord| -> Option<(usize, usize)> {
        let (dx, dy) = (c.x - me.x, c.y - me.y);
        (dx.abs() <= r && dy.abs() <= r).then(|| ((dy + r) as usize, (dx + r) as usize))
    };

    for (row, cells) in channels[0].iter_mut().enumerate() {
        for (col, cell) in cells.iter_mut().enumerate() {
            *cell = u8::from(!map.is_free(me.offset(col as i32 - r, row as i32 - r)));
        }
    }
    for (i, (&p, &g)) in positions.iter().zip(goals).enumerate() {
        if i == ego {
            continue;
        }
        if let Some((row, col)) = slot(p) {
            channels[1][row][col] = 1;
        }
        if let Some((row, col)) = slot(g) {
            channels[2][row][col] = 1;
        }
    }
    let goal = goals[ego];
    let (gx, gy) = project_goal(goal.x - me.x, goal.y - me.y, r);
    channels[3][(gy + r) as usize][(gx + r) as usize] = 1;

    Ok(LocalObs { fov, channels, goal_vec: goal_direction(me, goal) })
}
