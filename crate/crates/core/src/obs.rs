//! Per-agent observation: local field-of-view channels, the static graph for
//! the agent's current cell and the shared intent graph, all taken from one
//! state snapshot.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::EnvState;
use crate::error::{invalid, Result};
use crate::grid::Coord;
use crate::intent::{build_intent_graph, IntentGraphObs};
use crate::local_obs::{fov_channels, LocalObs};
use crate::static_features::{build_static_graph, StaticGraphObs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBundle {
    pub ego_id: usize,
    pub step: usize,
    pub local: LocalObs,
    pub static_graph: StaticGraphObs,
    pub intent_graph: IntentGraphObs,
}

/// `nodes` are the map-graph node cells, computed once per map. `horizon` is
/// the intent prediction length and `fov` the local view side.
pub fn observe(state: &EnvState, nodes: &[Coord], ego: usize, horizon: usize, fov: usize) -> Result<ObservationBundle> {
    if ego >= state.num_agents() {
        return Err(invalid(format!("agent {ego} out of range for {} agents", state.num_agents())));
    }
    let local = fov_channels(&state.map, &state.positions, &state.goals, ego, fov)?;
    let static_graph = build_static_graph(&state.map, nodes, state.positions[ego], state.goals[ego])?;
    let intent_graph = build_intent_graph(&state.map, &state.positions, &state.goals, horizon)?;
    Ok(ObservationBundle { ego_id: ego, step: state.step, local, static_graph, intent_graph })
}

/// Bundles for every agent, computed in parallel.
pub fn observe_all(state: &EnvState, nodes: &[Coord], horizon: usize, fov: usize) -> Result<Vec<ObservationBundle>> {
    (0..state.num_agents()).into_par_iter().map(|i| observe(state, nodes, i, horizon, fov)).collect()
}
