//! C ABI over `mapf-core`.
//!
//! Every fallible call returns a [`MapfStatus`]; on failure a message is
//! available from [`mapf_last_error`] on the same thread until the next call
//! that fails. Handles are opaque and must be released with the matching
//! `*_free` function. Coordinates are `(x, y)` = (column, row).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use mapf_core::env::{reset, step_joint, Action, EnvConfig, EnvState, Status};
use mapf_core::mapgen::{generate_map, MapKind};
use mapf_core::pathfind::astar_grid4;
use mapf_core::skeleton::{extract_graph, MapGraph, NodeKind, ThinningMethod};
use mapf_core::{Coord, Error, GridMap};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapfStatus {
    Ok = 0,
    InvalidArgument = 1,
    Parse = 2,
    Unreachable = 3,
    Shape = 4,
    Unsupported = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapfMapKind {
    Room = 0,
    Random = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapfThinning {
    MedialAxis = 0,
    ZhangSuen = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapfEpisodeStatus {
    Running = 0,
    Success = 1,
    Timeout = 2,
}

/// Opaque grid map.
pub struct MapfMap {
    inner: Arc<GridMap>,
}

/// Opaque skeleton graph.
pub struct MapfGraph {
    inner: MapGraph,
}

/// Opaque environment.
pub struct MapfEnv {
    state: EnvState,
    config: EnvConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MapfStatus {
    match e {
        Error::InvalidArgument(_) => MapfStatus::InvalidArgument,
        Error::Parse { .. } | Error::Json(_) => MapfStatus::Parse,
        Error::Unreachable(_) => MapfStatus::Unreachable,
        Error::Shape(_) => MapfStatus::Shape,
        Error::Unsupported(_) => MapfStatus::Unsupported,
        Error::Io(_) => MapfStatus::Io,
    }
}

struct Fail(MapfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MapfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MapfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MapfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MapfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn coords(xy: *const i32, n: usize, what: &str) -> Result<Vec<Coord>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if xy.is_null() {
        return Err(null(what));
    }
    let flat = std::slice::from_raw_parts(xy, 2 * n);
    Ok(flat.chunks(2).map(|c| Coord::new(c[0], c[1])).collect())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mapf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mapf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses the text grid format (`.` free, `#` obstacle, one row per line).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_map_parse(text: *const c_char, out: *mut *mut MapfMap) -> MapfStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Fail(MapfStatus::Parse, format!("map text is not UTF-8: {e}")))?;
        let map = GridMap::parse(s)?;
        write_out(out, Box::into_raw(Box::new(MapfMap { inner: Arc::new(map) })), "out")
    })
}

/// Generates a seeded map. `density` only applies to random maps.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_map_generate(
    kind: MapfMapKind,
    width: usize,
    height: usize,
    density: f64,
    seed: u64,
    out: *mut *mut MapfMap,
) -> MapfStatus {
    guard(|| {
        let kind = match kind {
            MapfMapKind::Room => MapKind::Room,
            MapfMapKind::Random => MapKind::Random,
        };
        let map = generate_map(kind, width, height, density, seed)?;
        write_out(out, Box::into_raw(Box::new(MapfMap { inner: Arc::new(map) })), "out")
    })
}

/// # Safety
/// `map` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn mapf_map_free(map: *mut MapfMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_map_size(map: *const MapfMap, width: *mut usize, height: *mut usize) -> MapfStatus {
    guard(|| {
        let m = deref(map, "map")?;
        write_out(width, m.inner.width(), "width")?;
        write_out(height, m.inner.height(), "height")
    })
}

/// Writes 1 for a free in-bounds cell, 0 otherwise.
///
/// # Safety
/// `map` must be a live handle; `free` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_map_is_free(map: *const MapfMap, x: i32, y: i32, free: *mut u8) -> MapfStatus {
    guard(|| {
        let m = deref(map, "map")?;
        write_out(free, u8::from(m.inner.is_free(Coord::new(x, y))), "free")
    })
}

/// Text form of the map. Release the result with [`mapf_string_free`].
///
/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_map_serialize(map: *const MapfMap, out: *mut *mut c_char) -> MapfStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let text = CString::new(m.inner.serialize()).expect("map text has no NUL");
        write_out(out, text.into_raw(), "out")
    })
}

/// Shortest 4-connected path length in moves, or -1 when unreachable.
///
/// # Safety
/// `map` must be a live handle; `length` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_astar_length(
    map: *const MapfMap,
    sx: i32,
    sy: i32,
    gx: i32,
    gy: i32,
    length: *mut i64,
) -> MapfStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let path = astar_grid4(&m.inner, Coord::new(sx, sy), Coord::new(gx, gy))?;
        write_out(length, path.map_or(-1, |p| p.len() as i64), "length")
    })
}

/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_graph_extract(
    map: *const MapfMap,
    method: MapfThinning,
    out: *mut *mut MapfGraph,
) -> MapfStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let method = match method {
            MapfThinning::MedialAxis => ThinningMethod::MedialAxis,
            MapfThinning::ZhangSuen => ThinningMethod::ZhangSuen,
        };
        let graph = extract_graph(&m.inner, method);
        write_out(out, Box::into_raw(Box::new(MapfGraph { inner: graph })), "out")
    })
}

/// # Safety
/// `graph` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn mapf_graph_free(graph: *mut MapfGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_graph_counts(
    graph: *const MapfGraph,
    nodes: *mut usize,
    edges: *mut usize,
) -> MapfStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        write_out(nodes, g.inner.nodes.len(), "nodes")?;
        write_out(edges, g.inner.edges.len(), "edges")
    })
}

/// Node position and kind (`1` branch, `0` leaf).
///
/// # Safety
/// `graph` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_graph_node(
    graph: *const MapfGraph,
    index: usize,
    x: *mut i32,
    y: *mut i32,
    is_branch: *mut u8,
) -> MapfStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        let n = g
            .inner
            .nodes
            .get(index)
            .ok_or_else(|| Fail(MapfStatus::InvalidArgument, format!("node {index} out of range")))?;
        write_out(x, n.position.x, "x")?;
        write_out(y, n.position.y, "y")?;
        write_out(is_branch, u8::from(n.kind == NodeKind::Branch), "is_branch")
    })
}

/// Edge endpoints (node indices) and length in moves.
///
/// # Safety
/// `graph` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_graph_edge(
    graph: *const MapfGraph,
    index: usize,
    a: *mut usize,
    b: *mut usize,
    length: *mut usize,
) -> MapfStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        let e = g
            .inner
            .edges
            .get(index)
            .ok_or_else(|| Fail(MapfStatus::InvalidArgument, format!("edge {index} out of range")))?;
        write_out(a, e.a, "a")?;
        write_out(b, e.b, "b")?;
        write_out(length, e.len(), "length")
    })
}

/// Creates an environment. `starts_xy` and `goals_xy` hold `n_agents` pairs
/// `(x, y)` each. The map handle may be freed afterwards.
///
/// # Safety
/// `map` must be a live handle, coordinate arrays must hold `2 * n_agents`
/// values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_env_new(
    map: *const MapfMap,
    starts_xy: *const i32,
    goals_xy: *const i32,
    n_agents: usize,
    max_steps: usize,
    tau: u32,
    compute_blocking: u8,
    out: *mut *mut MapfEnv,
) -> MapfStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let starts = coords(starts_xy, n_agents, "starts_xy")?;
        let goals = coords(goals_xy, n_agents, "goals_xy")?;
        let state = reset(Arc::clone(&m.inner), &starts, &goals, max_steps)?;
        let config = EnvConfig { tau, compute_blocking: compute_blocking != 0 };
        write_out(out, Box::into_raw(Box::new(MapfEnv { state, config })), "out")
    })
}

/// # Safety
/// `env` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn mapf_env_free(env: *mut MapfEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Applies one joint action. Action codes: 0 idle, 1 up, 2 down, 3 left,
/// 4 right. `rewards` and `collided` may be null; otherwise they receive
/// `n_agents` values.
///
/// # Safety
/// `env` must be a live handle, `actions` must hold `n_agents` bytes, and
/// every non-null output must be writable for `n_agents` values.
#[no_mangle]
pub unsafe extern "C" fn mapf_env_step(
    env: *mut MapfEnv,
    actions: *const u8,
    n_agents: usize,
    rewards: *mut f64,
    collided: *mut u8,
    status: *mut MapfEpisodeStatus,
) -> MapfStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        if n_agents != e.state.num_agents() {
            return Err(Fail(MapfStatus::Shape, format!("{n_agents} actions for {} agents", e.state.num_agents())));
        }
        if actions.is_null() && n_agents > 0 {
            return Err(null("actions"));
        }
        let codes = if n_agents == 0 { &[][..] } else { std::slice::from_raw_parts(actions, n_agents) };
        let joint = codes
            .iter()
            .map(|&c| {
                Action::from_index(c as usize)
                    .ok_or_else(|| Fail(MapfStatus::InvalidArgument, format!("unknown action code {c}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (next, outcome) = step_joint(&e.state, &joint, &e.config)?;
        e.state = next;
        if !rewards.is_null() {
            std::slice::from_raw_parts_mut(rewards, n_agents).copy_from_slice(&outcome.rewards);
        }
        if !collided.is_null() {
            let out = std::slice::from_raw_parts_mut(collided, n_agents);
            for (o, &c) in out.iter_mut().zip(&outcome.collided) {
                *o = u8::from(c);
            }
        }
        let s = match outcome.status {
            Status::Running => MapfEpisodeStatus::Running,
            Status::Success => MapfEpisodeStatus::Success,
            Status::Timeout => MapfEpisodeStatus::Timeout,
        };
        if status.is_null() {
            Ok(())
        } else {
            write_out(status, s, "status")
        }
    })
}

/// Copies current positions as `n_agents` pairs `(x, y)`.
///
/// # Safety
/// `env` must be a live handle and `positions_xy` writable for `2 * n_agents` values.
#[no_mangle]
pub unsafe extern "C" fn mapf_env_positions(
    env: *const MapfEnv,
    positions_xy: *mut i32,
    n_agents: usize,
) -> MapfStatus {
    guard(|| {
        let e = deref(env, "env")?;
        if n_agents != e.state.num_agents() {
            return Err(Fail(
                MapfStatus::Shape,
                format!("buffer for {n_agents} agents, env has {}", e.state.num_agents()),
            ));
        }
        if positions_xy.is_null() {
            return Err(null("positions_xy"));
        }
        let out = std::slice::from_raw_parts_mut(positions_xy, 2 * n_agents);
        for (pair, p) in out.chunks_mut(2).zip(&e.state.positions) {
            pair[0] = p.x;
            pair[1] = p.y;
        }
        Ok(())
    })
}
