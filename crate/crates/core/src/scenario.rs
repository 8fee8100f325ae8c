//! Scenario files: a map, start and goal cells, a step cap and a seed, plus an
//! optional precomputed plan for replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{reset, EnvState, EVAL_MAX_STEPS};
use crate::error::{invalid, Result};
use crate::grid::{Coord, GridMap, MapJson};
use crate::mapgen::{generate_map, MapKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub map: MapJson,
    pub starts: Vec<Coord>,
    pub goals: Vec<Coord>,
    pub max_steps: usize,
    pub seed: u64,
    /// Timed cell sequence per agent, `plan[i][t]` being agent `i` at step `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<Vec<Coord>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub kind: MapKind,
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub agents: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl ScenarioParams {
    pub fn random(size: usize, density: f64, agents: usize, seed: u64) -> Self {
        Self { kind: MapKind::Random, width: size, height: size, density, agents, max_steps: EVAL_MAX_STEPS, seed }
    }
}

impl Scenario {
    pub fn grid(&self) -> Result<GridMap> {
        GridMap::from_json(&self.map)
    }

    pub fn n_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn initial_state(&self) -> Result<EnvState> {
        reset(Arc::new(self.grid()?), &self.starts, &self.goals, self.max_steps)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Distinct starts and distinct goals drawn uniformly from the free cells of
/// a connected map.
pub fn place_agents(map: &GridMap, agents: usize, seed: u64) -> Result<(Vec<Coord>, Vec<Coord>)> {
    let free: Vec<Coord> = map.free_cells().collect();
    if agents == 0 || agents > free.len() {
        return Err(invalid(format!("cannot place {agents} agents on {} free cells", free.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = index::sample(&mut rng, free.len(), agents).into_iter().map(|i| free[i]).collect();
    let goals = index::sample(&mut rng, free.len(), agents).into_iter().map(|i| free[i]).collect();
    Ok((starts, goals))
}

pub fn generate_scenario(id: impl Into<String>, p: &ScenarioParams) -> Result<Scenario> {
    let map = generate_map(p.kind, p.width, p.height, p.density, p.seed)?;
    let (starts, goals) = place_agents(&map, p.agents, p.seed.wrapping_add(1))?;
    Ok(Scenario { id: id.into(), map: map.to_json(), starts, goals, max_steps: p.max_steps, seed: p.seed, plan: None })
}

/// Every `*.json` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Scenario>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    if paths.is_empty() {
        return Err(invalid(format!("no scenario files in {}", dir.display())));
    }
    paths.iter().map(|p| Scenario::load(p)).collect()
}
