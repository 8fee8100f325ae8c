//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Oracles here are written independently of
//! the library code they check.

// Checks are written as `!(x < tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::collections::{HashSet, VecDeque};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use mapf_core::attention::{
    attention_focus_layer, encode_traced, encoder_gradcheck, encoder_probe_gradient, finite_diff_gradcheck,
    probe_vector, EncoderConfig, EncoderParams, Matrix, FD_STEP,
};
use mapf_core::env::{
    compute_reward, is_blocking, reset, step_joint, Action, EnvConfig, Status, BLOCKING_PENALTY, COLLISION_REWARD,
    EVAL_MAX_STEPS, IDLE_OFF_GOAL_REWARD, IDLE_ON_GOAL_REWARD, MOVE_REWARD,
};
use mapf_core::eval::{aggregate, makespan, prioritized_plan, run_episode, IdlePolicy, PlanOutcome, ReplayPolicy};
use mapf_core::intent::{build_intent_graph, INTENT_FEATURE_DIM};
use mapf_core::losses::{entropy_term, ppo_policy_loss, total_loss, ClipMode, LossCoefficients};
use mapf_core::mapgen::{generate_map, MapKind};
use mapf_core::pathfind::astar_grid4;
use mapf_core::scenario::{generate_scenario, ScenarioParams};
use mapf_core::skeleton::{extract_graph, NodeKind, ThinningMethod};
use mapf_core::static_features::{build_static_graph, detour_to_goal, node_accessibility, off_route_degree};
use mapf_core::{Coord, GridMap};

type Check = Result<String, String>;

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Check, u64);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- oracles

const STEPS4: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

fn free(map: &GridMap, c: Coord) -> bool {
    c.x >= 0 && c.y >= 0 && (c.x as usize) < map.width() && (c.y as usize) < map.height() && map.is_free(c)
}

/// Plain BFS over 4-neighbours; `blocked` cells are treated as obstacles.
fn bfs(map: &GridMap, src: Coord, blocked: &[Coord]) -> Vec<Option<u32>> {
    let w = map.width();
    let mut dist = vec![None; w * map.height()];
    if !free(map, src) || blocked.contains(&src) {
        return dist;
    }
    let idx = |c: Coord| c.y as usize * w + c.x as usize;
    dist[idx(src)] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)].unwrap();
        for (dx, dy) in STEPS4 {
            let n = Coord::new(c.x + dx, c.y + dy);
            if free(map, n) && !blocked.contains(&n) && dist[idx(n)].is_none() {
                dist[idx(n)] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

fn dist_at(map: &GridMap, d: &[Option<u32>], c: Coord) -> Option<u32> {
    d[c.y as usize * map.width() + c.x as usize]
}

fn manhattan(a: Coord, b: Coord) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

fn free_cells(map: &GridMap) -> Vec<Coord> {
    (0..map.height() as i32)
        .flat_map(|y| (0..map.width() as i32).map(move |x| Coord::new(x, y)))
        .filter(|&c| map.is_free(c))
        .collect()
}

/// Labels 8-connected components of `set` (cells for which `member` holds).
fn components8(w: usize, h: usize, member: impl Fn(Coord) -> bool) -> Vec<Option<usize>> {
    let mut label = vec![None; w * h];
    let mut next = 0;
    for start in 0..w * h {
        let s = Coord::new((start % w) as i32, (start / w) as i32);
        if label[start].is_some() || !member(s) {
            continue;
        }
        label[start] = Some(next);
        let mut stack = vec![s];
        while let Some(c) = stack.pop() {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let n = Coord::new(c.x + dx, c.y + dy);
                    if n.x < 0 || n.y < 0 || n.x as usize >= w || n.y as usize >= h {
                        continue;
                    }
                    let i = n.y as usize * w + n.x as usize;
                    if label[i].is_none() && member(n) {
                        label[i] = Some(next);
                        stack.push(n);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

fn raw_random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> GridMap {
    let obstacles: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    GridMap::from_obstacles(w, h, &obstacles).unwrap()
}

fn generated_map(rng: &mut ChaCha8Rng, max_side: usize) -> GridMap {
    let w = rng.gen_range(10..=max_side);
    let h = rng.gen_range(10..=max_side);
    let kind = if rng.gen_bool(0.5) { MapKind::Room } else { MapKind::Random };
    let density = rng.gen_range(0.05..0.35);
    generate_map(kind, w, h, density, rng.gen()).unwrap()
}

fn has_vertex_or_swap_conflict(before: &[Coord], after: &[Coord]) -> Option<String> {
    let mut seen = HashSet::new();
    for (i, c) in after.iter().enumerate() {
        if !seen.insert(*c) {
            return Some(format!("vertex conflict at {c} (agent {i})"));
        }
    }
    for i in 0..after.len() {
        for j in i + 1..after.len() {
            if after[i] == before[j] && after[j] == before[i] && before[i] != before[j] {
                return Some(format!("swap between agents {i} and {j}"));
            }
        }
    }
    None
}

// ---------------------------------------------------------------- criteria

fn c1_feature_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut compared = 0usize;
    for m in 0..200 {
        let map = generated_map(&mut rng, 20);
        let cells = free_cells(&map);
        let agent = *cells.choose(&mut rng).unwrap();
        let goal = *cells.choose(&mut rng).unwrap();
        let mut nodes = extract_graph(&map, ThinningMethod::MedialAxis).node_positions();
        nodes.extend(cells.choose_multiple(&mut rng, 5));
        let obs = build_static_graph(&map, &nodes, agent, goal).map_err(|e| format!("map {m}: {e}"))?;

        let from_a = bfs(&map, agent, &[]);
        let from_g = bfs(&map, goal, &[]);
        let direct = dist_at(&map, &from_a, goal).ok_or(format!("map {m}: goal unreachable"))?;
        let expect = |c: Coord| -> Option<(u32, u32, u32)> {
            let da = dist_at(&map, &from_a, c)?;
            let dg = dist_at(&map, &from_g, c)?;
            Some((da - manhattan(agent, c), dg - manhattan(goal, c), da + dg - direct))
        };

        let reachable: Vec<Coord> = nodes.iter().copied().filter(|&c| expect(c).is_some()).collect();
        ensure!(
            obs.node_count() == reachable.len() && obs.excluded == nodes.len() - reachable.len(),
            "map {m}: {} node rows, oracle expects {}",
            obs.node_count(),
            reachable.len()
        );
        let mut expected_rows = reachable.clone();
        expected_rows.extend([agent, goal]);
        ensure!(
            obs.ego_index == expected_rows.len() - 2 && obs.goal_index == expected_rows.len() - 1,
            "map {m}: ego/goal index"
        );
        for (row, &c) in obs.rows.iter().zip(&expected_rows) {
            ensure!(row.position == c, "map {m}: row at {} expected {c}", row.position);
            let (na, dg, od) = expect(c).unwrap();
            let got = (row.accessibility, row.detour_to_goal, row.off_route);
            ensure!(got == (na, dg, od), "map {m} node {c}: got {got:?}, oracle {:?}", (na, dg, od));
            let single = (
                node_accessibility(&map, agent, c).map_err(|e| e.to_string())?,
                detour_to_goal(&map, goal, c).map_err(|e| e.to_string())?,
                off_route_degree(&map, agent, goal, c).map_err(|e| e.to_string())?,
            );
            ensure!(single == (na, dg, od), "map {m} node {c}: per-node functions {single:?}");
            compared += 1;
        }
    }
    Ok(format!("{compared} rows on 200 maps match brute-force BFS"))
}

fn c2_astar_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut unreachable = 0;
    for t in 0..1000 {
        let map = if t % 2 == 0 {
            generated_map(&mut rng, 20)
        } else {
            let (w, h) = (rng.gen_range(2..=20), rng.gen_range(2..=20));
            let density = rng.gen_range(0.0..0.45);
            raw_random_map(&mut rng, w, h, density)
        };
        let cells = free_cells(&map);
        if cells.is_empty() {
            continue;
        }
        let s = *cells.choose(&mut rng).unwrap();
        let g = *cells.choose(&mut rng).unwrap();
        let oracle = dist_at(&map, &bfs(&map, s, &[]), g);
        let path = astar_grid4(&map, s, g).map_err(|e| format!("triple {t}: {e}"))?;
        match (&path, oracle) {
            (None, None) => unreachable += 1,
            (Some(p), Some(d)) => {
                ensure!(p.len() as u32 == d, "triple {t}: A* {} vs BFS {d}", p.len());
                ensure!(p.cells.first() == Some(&s) && p.cells.last() == Some(&g), "triple {t}: endpoints");
                for pair in p.cells.windows(2) {
                    ensure!(manhattan(pair[0], pair[1]) == 1 && free(&map, pair[1]), "triple {t}: invalid step");
                }
            }
            _ => return Err(format!("triple {t}: A* {:?} vs BFS {oracle:?}", path.map(|p| p.len()))),
        }
    }
    Ok(format!("1000 triples exact ({unreachable} unreachable agreed)"))
}

fn c3_skeleton_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut nodes_checked = 0usize;
    for m in 0..500 {
        let map = if m % 5 == 4 {
            let (w, h) = (rng.gen_range(10..=32), rng.gen_range(10..=32));
            let density = rng.gen_range(0.1..0.4);
            raw_random_map(&mut rng, w, h, density)
        } else {
            generated_map(&mut rng, 32)
        };
        let (w, h) = (map.width(), map.height());
        let regions = components8(w, h, |c| map.is_free(c));
        for method in [ThinningMethod::MedialAxis, ThinningMethod::ZhangSuen] {
            let graph = extract_graph(&map, method);
            let sk = |c: Coord| {
                c.x >= 0 && c.y >= 0 && (c.x as usize) < w && (c.y as usize) < h && graph.skeleton.mask.get(c)
            };

            for y in 0..h as i32 {
                for x in 0..w as i32 {
                    let c = Coord::new(x, y);
                    ensure!(!sk(c) || map.is_free(c), "map {m} {method:?}: skeleton pixel {c} on obstacle");
                    let block = [c, Coord::new(x + 1, y), Coord::new(x, y + 1), Coord::new(x + 1, y + 1)];
                    ensure!(!block.iter().all(|&b| sk(b)), "map {m} {method:?}: 2x2 skeleton block at {c}");
                }
            }

            let pieces = components8(w, h, sk);
            let n_regions = regions.iter().flatten().max().map_or(0, |r| r + 1);
            let mut per_region: Vec<HashSet<usize>> = vec![HashSet::new(); n_regions];
            for (i, p) in pieces.iter().enumerate() {
                if let Some(p) = p {
                    per_region[regions[i].unwrap()].insert(*p);
                }
            }
            for (r, set) in per_region.iter().enumerate() {
                ensure!(set.len() == 1, "map {m} {method:?}: free region {r} holds {} skeleton components", set.len());
            }

            let count = |c: Coord| {
                (-1..=1)
                    .flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)))
                    .filter(|&(dx, dy)| (dx, dy) != (0, 0) && sk(Coord::new(c.x + dx, c.y + dy)))
                    .count()
            };
            let mut expected = HashSet::new();
            for y in 0..h as i32 {
                for x in 0..w as i32 {
                    let c = Coord::new(x, y);
                    if sk(c) {
                        match count(c) {
                            0 | 1 => expected.insert((c, NodeKind::Leaf)),
                            2 => false,
                            _ => expected.insert((c, NodeKind::Branch)),
                        };
                    }
                }
            }
            let got: HashSet<_> = graph.nodes.iter().map(|n| (n.position, n.kind)).collect();
            ensure!(got.len() == graph.nodes.len(), "map {m} {method:?}: duplicate nodes");
            ensure!(got == expected, "map {m} {method:?}: node classification differs from neighbour recount");
            nodes_checked += got.len();

            for e in &graph.edges {
                let ends = (graph.nodes[e.a].position, graph.nodes[e.b].position);
                let (first, last) = (*e.path.cells.first().unwrap(), *e.path.cells.last().unwrap());
                ensure!((first, last) == ends || (last, first) == ends, "map {m} {method:?}: edge endpoints");
                let interior = &e.path.cells[1..e.path.cells.len() - 1];
                ensure!(
                    interior.iter().all(|&c| sk(c)
                        && !got.contains(&(c, NodeKind::Branch))
                        && !got.contains(&(c, NodeKind::Leaf))),
                    "map {m} {method:?}: edge interior passes a node"
                );
            }
        }
    }
    Ok(format!("500 maps x 2 methods thin and connected, {nodes_checked} nodes reclassified"))
}

fn c4_env_fuzz() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let per_scenario = 100_000 / 50;
    let mut collisions = 0usize;
    for s in 0..50 {
        let agents = rng.gen_range(2..=16);
        let size = rng.gen_range(10..=20);
        let mut p = ScenarioParams::random(size, rng.gen_range(0.1..0.3), agents, 1000 + s);
        p.max_steps = usize::MAX;
        let scenario = generate_scenario(format!("fuzz{s}"), &p).map_err(|e| e.to_string())?;
        let mut state = scenario.initial_state().map_err(|e| e.to_string())?;
        let config = EnvConfig { tau: rng.gen_range(0..=10), compute_blocking: s % 5 == 0 };
        for k in 0..per_scenario {
            // Bias toward idles so crowded states occur.
            let actions: Vec<Action> = (0..agents)
                .map(
                    |_| if rng.gen_bool(0.3) { Action::Idle } else { Action::from_index(rng.gen_range(0..5)).unwrap() },
                )
                .collect();
            let (next, out) = step_joint(&state, &actions, &config).map_err(|e| e.to_string())?;
            if let Some(msg) = has_vertex_or_swap_conflict(&state.positions, &next.positions) {
                return Err(format!("scenario {s} step {k}: {msg}"));
            }
            for i in 0..agents {
                ensure!(free(&state.map, next.positions[i]), "scenario {s} step {k}: agent {i} off free space");
                ensure!(
                    manhattan(state.positions[i], next.positions[i]) <= 1,
                    "scenario {s} step {k}: agent {i} jumped"
                );
                if actions[i] == Action::Idle {
                    ensure!(!out.collided[i], "scenario {s} step {k}: idle agent {i} flagged collided");
                    ensure!(next.positions[i] == state.positions[i], "scenario {s} step {k}: idle agent {i} moved");
                }
                collisions += out.collided[i] as usize;
            }
            state = next;
        }
    }
    Ok(format!("100000 joint actions, 0 conflicts, {collisions} reverted moves, idle never flagged"))
}

fn c5_reward_table() -> Check {
    let table = [
        (MOVE_REWARD, -0.3),
        (IDLE_OFF_GOAL_REWARD, -0.3),
        (IDLE_ON_GOAL_REWARD, 0.0),
        (COLLISION_REWARD, -2.0),
        (BLOCKING_PENALTY, -1.0),
    ];
    ensure!(table.iter().all(|(a, b)| a == b), "reward constants differ from the table: {table:?}");
    let cases = [
        (Action::Right, false, false, 0, -0.3),
        (Action::Up, true, false, 0, -0.3),
        (Action::Idle, false, false, 0, -0.3),
        (Action::Idle, true, false, 0, 0.0),
        (Action::Left, false, true, 0, -2.0),
        (Action::Idle, false, false, 2, -0.3 - 2.0),
        (Action::Idle, true, false, 1, -1.0),
        (Action::Idle, false, true, 3, -2.0 - 3.0),
        (Action::Down, false, false, 4, -0.3),
    ];
    for (a, on_goal, collided, eta, want) in cases {
        let got = compute_reward(a, on_goal, collided, eta);
        ensure!(got == want, "{a:?} on_goal={on_goal} collided={collided} eta={eta}: {got} != {want}");
    }

    // The same values through a real step.
    let map = Arc::new(GridMap::parse("....\n.#..").unwrap());
    let state = reset(
        map,
        &[Coord::new(0, 0), Coord::new(3, 0), Coord::new(2, 1)],
        &[Coord::new(1, 0), Coord::new(3, 0), Coord::new(0, 1)],
        16,
    )
    .map_err(|e| e.to_string())?;
    let (_, out) = step_joint(&state, &[Action::Right, Action::Idle, Action::Left], &EnvConfig::default())
        .map_err(|e| e.to_string())?;
    ensure!(out.rewards == vec![-0.3, 0.0, -2.0], "stepped rewards {:?}", out.rewards);
    Ok("constants and composed rewards exact".into())
}

/// Corridor of width 1 along row 1 with optional bypass loops through row 3.
fn corridor_scenario(rng: &mut ChaCha8Rng) -> (GridMap, Vec<Coord>, Vec<Coord>, usize, u32) {
    let len = rng.gen_range(6..=24);
    let (w, h) = (len + 2, 5);
    let mut obstacles = vec![true; w * h];
    let mut open = |x: usize, y: usize| obstacles[y * w + x] = false;
    for x in 1..=len {
        open(x, 1);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(1..=len);
        let b = rng.gen_range(1..=len);
        let (a, b) = (a.min(b), a.max(b));
        open(a, 2);
        open(b, 2);
        for x in a..=b {
            open(x, 3);
        }
    }
    if rng.gen_bool(0.5) {
        let x = rng.gen_range(1..=len);
        open(x, 0);
    }
    let map = GridMap::from_obstacles(w, h, &obstacles).unwrap();
    let cells = free_cells(&map);
    let n = rng.gen_range(2..=5).min(cells.len());
    let starts: Vec<Coord> = cells.choose_multiple(rng, n).copied().collect();
    let goals: Vec<Coord> = cells.choose_multiple(rng, n).copied().collect();
    let ego = rng.gen_range(0..n);
    (map, starts, goals, ego, rng.gen_range(0..=12))
}

fn c6_blocking_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut flagged, mut total_eta) = (0, 0);
    for k in 0..100 {
        let (map, starts, goals, ego, tau) = corridor_scenario(&mut rng);
        let state = reset(Arc::new(map.clone()), &starts, &goals, 64).map_err(|e| e.to_string())?;
        let mut eta = 0;
        for j in (0..starts.len()).filter(|&j| j != ego) {
            let Some(after) = dist_at(&map, &bfs(&map, starts[j], &[]), goals[j]) else { continue };
            let before = dist_at(&map, &bfs(&map, starts[j], &[starts[ego]]), goals[j]);
            if before.is_none_or(|b| b > after + tau) {
                eta += 1;
            }
        }
        let got = is_blocking(&state, ego, tau);
        ensure!(got == (eta > 0, eta), "scenario {k}: is_blocking {got:?}, oracle {:?}", (eta > 0, eta));
        flagged += (eta > 0) as usize;
        total_eta += eta;
    }
    ensure!(flagged > 10 && flagged < 90, "corridor sample too one-sided: {flagged} of 100 blocking");
    Ok(format!("100 corridors exact ({flagged} blocking, total eta {total_eta})"))
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn c7_attention_math() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_sum: f64 = 0.0;
    let mut worst_cos: f64 = 0.0;
    for trial in 0..20 {
        let input_dim = rng.gen_range(3..=9);
        let n = rng.gen_range(1..=7);
        let params = EncoderParams::new(EncoderConfig::desk(input_dim), trial).map_err(|e| e.to_string())?;
        let features = random_rows(&mut rng, n, input_dim);
        let ego = rng.gen_range(0..n);
        let dump = encode_traced(&features, ego, &params).map_err(|e| e.to_string())?.dump();
        for layer in &dump.alpha {
            worst_sum = worst_sum.max((layer.iter().sum::<f64>() - 1.0).abs());
        }
        for row in dump.beta.iter().flatten().flatten() {
            worst_sum = worst_sum.max((row.iter().sum::<f64>() - 1.0).abs());
        }

        let d = params.config.d;
        let u = Matrix::from_rows(&random_rows(&mut rng, n, d));
        let focus = &params.focus[0];
        let (out, alpha) = attention_focus_layer(&u, ego, focus).map_err(|e| e.to_string())?;
        let q = focus.w_q.apply(u.row(ego));
        let scores: Vec<f64> = (0..n)
            .map(|i| q.iter().zip(focus.w_k.apply(u.row(i))).map(|(a, b)| a * b).sum::<f64>() / (d as f64).sqrt())
            .collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
        let oracle: Vec<f64> = scores.iter().map(|s| (s - top).exp() / z).collect();
        for i in 0..n {
            ensure!((alpha[i] - oracle[i]).abs() < 1e-12, "trial {trial}: alpha[{i}] {} vs {}", alpha[i], oracle[i]);
            let (a, b) = (u.row(i), out.row(i));
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cos = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b));
            worst_cos = worst_cos.max((cos - 1.0).abs());
            for (x, y) in a.iter().zip(b) {
                ensure!((alpha[i] * x - y).abs() < 1e-12, "trial {trial}: row {i} is not alpha-scaled");
            }
        }
    }
    ensure!(worst_sum < 1e-12, "attention row sums off by {worst_sum:e}");
    ensure!(worst_cos < 1e-12, "focus rows not parallel: |cos - 1| = {worst_cos:e}");

    let mut grad_worst: f64 = 0.0;
    for seed in 0..4 {
        let params = EncoderParams::new(EncoderConfig::desk(5), 50 + seed).map_err(|e| e.to_string())?;
        let features = random_rows(&mut rng, 4, 5);
        let r = encoder_gradcheck(&params, &features, (seed % 4) as usize, 60 + seed).map_err(|e| e.to_string())?;
        grad_worst = grad_worst.max(r.max_rel_error);
    }
    ensure!(grad_worst < 1e-5, "gradcheck max relative error {grad_worst:e}");

    let params = EncoderParams::new(EncoderConfig::desk(5), 77).map_err(|e| e.to_string())?;
    let features = random_rows(&mut rng, 4, 5);
    let probe = probe_vector(8, 78);
    let (_, mut corrupted) = encoder_probe_gradient(&params, &features, 0, &probe).map_err(|e| e.to_string())?;
    let i = corrupted.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
    corrupted[i] *= 1.1;
    let mut scratch = params.clone();
    let report = finite_diff_gradcheck(
        |flat| {
            scratch.set_flat(flat)?;
            let out = encode_traced(&features, 0, &scratch)?.ego_feature();
            Ok(out.iter().zip(&probe).map(|(a, b)| a * b).sum())
        },
        &params.flatten(),
        &corrupted,
        FD_STEP,
    )
    .map_err(|e| e.to_string())?;
    ensure!(report.max_rel_error > 1e-5 && report.worst_index == i, "corrupted gradient not detected: {report:?}");
    Ok(format!(
        "sums within {worst_sum:.1e}, |cos-1| {worst_cos:.1e}, gradcheck {grad_worst:.2e}, corruption caught ({:.2e})",
        report.max_rel_error
    ))
}

fn c8_loss_constants() -> Check {
    let h = entropy_term(&[0.2; 5]);
    ensure!((h + 5f64.ln()).abs() < 1e-12, "entropy of uniform-5 = {h}");
    for (r, a, want) in [(1.0, 1.0, -1.0), (2.0, 1.0, -1.2), (0.5, -1.0, 0.8)] {
        let got = ppo_policy_loss(&[r], &[a], 0.2, ClipMode::Standard).map_err(|e| e.to_string())?;
        ensure!((got - want).abs() < 1e-12, "ppo(r={r}, A={a}) = {got}, want {want}");
    }
    let c = LossCoefficients::default();
    ensure!((c.alpha, c.beta, c.iota, c.zeta, c.eta_coef) == (1.0, 0.08, 0.01, 0.5, 0.5), "coefficients {c:?}");
    let t = total_loss(1.0, 1.0, 1.0, 1.0, 1.0, &c);
    ensure!((t - 2.09).abs() < 1e-12, "total loss on unit components = {t}");
    Ok("entropy -ln 5, PPO cases, total 2.09 exact".into())
}

fn c9_planner_replay() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let config = EnvConfig::default();
    let (mut solved, mut failed) = (0, 0);
    let mut batch = Vec::new();
    let mut batches = 0;
    for s in 0..200u64 {
        let agents = rng.gen_range(2..=16);
        let mut p = ScenarioParams::random(20, 0.2, agents, 9000 + s);
        p.max_steps = EVAL_MAX_STEPS;
        let sc = generate_scenario(format!("replay{s}"), &p).map_err(|e| e.to_string())?;
        let map = sc.grid().map_err(|e| e.to_string())?;
        let initial = sc.initial_state().map_err(|e| e.to_string())?;
        let record = match prioritized_plan(&map, &sc.starts, &sc.goals, sc.max_steps, sc.seed)
            .map_err(|e| e.to_string())?
        {
            PlanOutcome::Solved(plan) => {
                solved += 1;
                let span = plan.makespan();
                for t in 0..span {
                    let before: Vec<Coord> = (0..agents).map(|i| plan.position(i, t)).collect();
                    let after: Vec<Coord> = (0..agents).map(|i| plan.position(i, t + 1)).collect();
                    if let Some(msg) = has_vertex_or_swap_conflict(&before, &after) {
                        return Err(format!("scenario {s} plan step {t}: {msg}"));
                    }
                }
                let mut policy = ReplayPolicy::new(plan.paths.clone()).map_err(|e| e.to_string())?;
                let r = run_episode(&sc.id, initial, &mut policy, &config).map_err(|e| format!("scenario {s}: {e}"))?;
                ensure!(r.collisions() == 0, "scenario {s}: replay produced {} collisions", r.collisions());
                ensure!(r.status == Status::Success, "scenario {s}: replay ended {:?}", r.status);
                ensure!(makespan(&r) <= span, "scenario {s}: replay makespan {} exceeds plan {span}", makespan(&r));
                r
            }
            PlanOutcome::Failed { .. } => {
                failed += 1;
                run_episode(&sc.id, initial, &mut IdlePolicy, &config).map_err(|e| e.to_string())?
            }
        };
        ensure!(makespan(&record) <= record.max_steps, "scenario {s}: makespan above cap");
        batch.push(record);
        if batch.len() == 20 {
            let agg = aggregate(&batch).map_err(|e| e.to_string())?;
            ensure!(agg.sr <= agg.ar, "batch {batches}: SR {} > AR {}", agg.sr, agg.ar);
            ensure!(agg.ms <= EVAL_MAX_STEPS as f64, "batch {batches}: MS {}", agg.ms);
            batches += 1;
            batch.clear();
        }
    }
    Ok(format!("{solved} plans replayed collision-free, {failed} planner failures, {batches} batches with SR <= AR"))
}

fn c10_intent_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut rows = 0usize;
    let mut at_goal = 0usize;
    for k in 0..1000 {
        let map = if k % 4 == 3 {
            let (w, h) = (rng.gen_range(4..=20), rng.gen_range(4..=20));
            raw_random_map(&mut rng, w, h, 0.3)
        } else {
            generated_map(&mut rng, 20)
        };
        let cells = free_cells(&map);
        if cells.len() < 2 {
            continue;
        }
        let n = rng.gen_range(1..=8).min(cells.len());
        let positions: Vec<Coord> = cells.choose_multiple(&mut rng, n).copied().collect();
        let mut goals: Vec<Coord> = cells.choose_multiple(&mut rng, n).copied().collect();
        for i in 0..n {
            if rng.gen_bool(0.2) {
                goals[i] = positions[i];
            }
        }
        let f = rng.gen_range(1..=12);
        let g = build_intent_graph(&map, &positions, &goals, f).map_err(|e| e.to_string())?;
        ensure!(g.rows.len() == n, "instance {k}: {} rows for {n} agents", g.rows.len());
        for (i, row) in g.rows.iter().enumerate() {
            let v = row.vector;
            let norm = v.dx.hypot(v.dy);
            ensure!(
                (norm - 1.0).abs() < 1e-12 || (v.dx, v.dy) == (0.0, 0.0),
                "instance {k} agent {i}: direction norm {norm}"
            );
            ensure!(
                (v.mag == 0.0) == ((v.dx, v.dy) == (0.0, 0.0)),
                "instance {k} agent {i}: zero direction with mag {}",
                v.mag
            );
            ensure!(v.mag <= f as f64 + 1e-12, "instance {k} agent {i}: mag {} > f {f}", v.mag);
            ensure!(v.sigma_x >= 0.0 && v.sigma_y >= 0.0, "instance {k} agent {i}: negative variance");
            ensure!(row.vector.features().len() == INTENT_FEATURE_DIM, "feature width");
            if positions[i] == goals[i] {
                let (x, y) = (positions[i].x as f64, positions[i].y as f64);
                ensure!(
                    row.vector.features() == [x, y, x, 0.0, y, 0.0, 0.0, 0.0, 0.0],
                    "instance {k} agent {i}: at-goal row {:?}",
                    row.vector.features()
                );
                at_goal += 1;
            }
            rows += 1;
        }
    }
    Ok(format!("{rows} rows valid, {at_goal} at-goal rows static"))
}

fn sha256(path: &Path) -> String {
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        let mut h = Sha256::new();
        for e in entries {
            h.update(e.file_name().unwrap().to_string_lossy().as_bytes());
            h.update(sha256(&e).as_bytes());
        }
        format!("{:x}", h.finalize())
    } else {
        format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
    }
}

fn run_cli(args: &str, dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mapf"))
        .args(args.split_whitespace())
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "mapf {args}: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn c11_cli_determinism() -> Check {
    // (output, argument line)
    let invocations = [
        ("room.txt", "gen-map --kind room --size 24 20 --seed 7 -o room.txt"),
        ("rand.json", "gen-map --kind random --size 16 16 --density 0.25 --seed 3 -o rand.json"),
        ("sc", "gen-scenarios --size 16 16 --agents 6 --count 3 --seed 11 --with-plan -o sc"),
        ("graph.json", "extract-graph --map room.txt --method mat -o graph.json"),
        ("feat.json", "features --scenario sc/scenario_0000.json --agent 2 --all -o feat.json"),
        ("ev", "eval --scenarios sc --policy prioritized -o ev"),
        ("attn.json", "attn-dump --scenario sc/scenario_0001.json --agent 0 --seed 5 -o attn.json"),
        ("map.pgm", "render map --map room.txt -o map.pgm"),
        ("skel.ppm", "render skeleton --map room.txt --method zs -o skel.ppm"),
        ("intent.ppm", "render intent --scenario sc/scenario_0002.json -o intent.ppm"),
    ];
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for run in &runs {
        for (_, args) in &invocations {
            run_cli(args, run.path())?;
        }
    }
    for (output, args) in &invocations {
        let (a, b) = (sha256(&runs[0].path().join(output)), sha256(&runs[1].path().join(output)));
        ensure!(a == b, "mapf {args}: outputs differ between runs");
    }
    Ok(format!("{} invocations byte-identical across two runs", invocations.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 feature oracle", c1_feature_oracle, 60),
        ("2 A* optimality", c2_astar_optimality, 30),
        ("3 skeleton invariants", c3_skeleton_invariants, 120),
        ("4 environment fuzz", c4_env_fuzz, 60),
        ("5 reward table", c5_reward_table, 10),
        ("6 blocking oracle", c6_blocking_oracle, 30),
        ("7 attention math", c7_attention_math, 10),
        ("8 loss constants", c8_loss_constants, 10),
        ("9 planner replay", c9_planner_replay, 120),
        ("10 intent invariants", c10_intent_invariants, 30),
        ("11 CLI determinism", c11_cli_determinism, 60),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, check, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > Duration::from_secs(budget) => Err(format!("took {elapsed:.1?}, budget {budget}s")),
            r => r,
        };
        match result {
            Ok(detail) => println!("criterion {name}: PASS ({elapsed:.2?}) {detail}"),
            Err(why) => {
                failures += 1;
                println!("criterion {name}: FAIL ({elapsed:.2?}) {why}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
