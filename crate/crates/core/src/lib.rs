//! Multi-agent pathfinding toolkit on 4-connected grids.
//!
//! The crate covers the whole observation pipeline a learned MAPF planner
//! consumes (skeleton graph of the map, per-agent static graph features,
//! short-horizon intent graph, local field-of-view channels), a joint-action
//! environment with collision, blocking and reward rules, a small numeric
//! attention encoder with analytic gradients, the training loss terms, and an
//! evaluation harness built around a prioritized planner.

pub mod attention;
pub mod env;
pub mod error;
pub mod eval;
pub mod grid;
pub mod intent;
pub mod local_obs;
pub mod losses;
pub mod mapgen;
pub mod network;
pub mod obs;
pub mod pathfind;
pub mod render;
pub mod scenario;
pub mod skeleton;
pub mod static_features;

pub use error::{Error, Result};
pub use grid::{Cell, Coord, GridMap};
