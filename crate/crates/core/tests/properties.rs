//! Property tests over the module invariants.

use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mapf_core::attention::{self_attention_layer, EncoderConfig, EncoderParams, Matrix};
use mapf_core::env::{compute_reward, reset, step_joint, Action, EnvConfig};
use mapf_core::intent::{build_intent_graph, intent_vector, predict_trajectory};
use mapf_core::local_obs::fov_channels;
use mapf_core::losses::{blocking_loss, entropy_term, ppo_policy_loss, total_loss, ClipMode, LossCoefficients};
use mapf_core::mapgen::{generate_map, MapKind};
use mapf_core::pathfind::astar_grid4;
use mapf_core::skeleton::{thin, thin_zhang_suen, ThinningMethod};
use mapf_core::static_features::build_static_graph;
use mapf_core::{Coord, GridMap};

fn map_strategy() -> impl Strategy<Value = GridMap> {
    (10usize..=24, 10usize..=24, 0.0f64..0.35, any::<u64>(), any::<bool>()).prop_map(|(w, h, density, seed, room)| {
        let kind = if room { MapKind::Room } else { MapKind::Random };
        generate_map(kind, w, h, density, seed).unwrap()
    })
}

fn free_cells(map: &GridMap) -> Vec<Coord> {
    map.free_cells().collect()
}

fn pick(map: &GridMap, seed: u64, n: usize) -> Vec<Coord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    free_cells(map).choose_multiple(&mut rng, n).copied().collect()
}

/// `map` placed at offset `(pad, pad)` inside a border of obstacles.
fn padded(map: &GridMap, pad: usize) -> GridMap {
    let (w, h) = (map.width() + 2 * pad, map.height() + 2 * pad);
    let obstacles: Vec<bool> = (0..w * h)
        .map(|i| {
            let c = Coord::new((i % w) as i32 - pad as i32, (i / w) as i32 - pad as i32);
            !map.is_free(c)
        })
        .collect();
    GridMap::from_obstacles(w, h, &obstacles).unwrap()
}

fn shift(c: Coord, by: usize) -> Coord {
    c.offset(by as i32, by as i32)
}

fn path_len(map: &GridMap, a: Coord, b: Coord) -> Option<usize> {
    astar_grid4(map, a, b).unwrap().map(|p| p.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_maps_are_deterministic_connected_and_round_trip(
        w in 10usize..=40, h in 10usize..=40, density in 0.0f64..0.4, seed: u64, room: bool,
    ) {
        let kind = if room { MapKind::Room } else { MapKind::Random };
        let a = generate_map(kind, w, h, density, seed).unwrap();
        prop_assert_eq!(&a, &generate_map(kind, w, h, density, seed).unwrap());
        prop_assert!(a.is_free_space_connected());
        prop_assert_eq!(&GridMap::parse(&a.serialize()).unwrap(), &a);
        prop_assert_eq!(&GridMap::from_json(&a.to_json()).unwrap(), &a);
    }

    #[test]
    fn path_lengths_are_symmetric_and_satisfy_the_triangle_inequality(map in map_strategy(), seed: u64) {
        let p = pick(&map, seed, 3);
        prop_assume!(p.len() == 3);
        let (a, b, c) = (p[0], p[1], p[2]);
        prop_assert_eq!(path_len(&map, a, b), path_len(&map, b, a));
        if let (Some(ab), Some(bc), Some(ac)) = (path_len(&map, a, b), path_len(&map, b, c), path_len(&map, a, c)) {
            prop_assert!(ac <= ab + bc);
        }
        prop_assert_eq!(astar_grid4(&map, a, c).unwrap(), astar_grid4(&map, a, c).unwrap());
    }

    #[test]
    fn zhang_suen_output_is_a_fixpoint(map in map_strategy()) {
        for method in [ThinningMethod::ZhangSuen, ThinningMethod::MedialAxis] {
            let once = thin(&map, method);
            let as_map = GridMap::from_obstacles(
                map.width(),
                map.height(),
                &(0..map.area()).map(|i| !once.mask.get(map.coord(i))).collect::<Vec<_>>(),
            ).unwrap();
            prop_assert_eq!(&thin_zhang_suen(&as_map), &once, "{:?}", method);
        }
    }

    #[test]
    fn static_features_are_non_negative_with_ego_and_goal_patterns(map in map_strategy(), seed: u64) {
        let p = pick(&map, seed, 7);
        prop_assume!(p.len() == 7);
        let obs = build_static_graph(&map, &p[2..], p[0], p[1]).unwrap();
        let direct = path_len(&map, p[0], p[1]).unwrap() as u32;
        let ego = obs.rows[obs.ego_index];
        let goal = obs.rows[obs.goal_index];
        let skew = direct - (p[0].x.abs_diff(p[1].x) + p[0].y.abs_diff(p[1].y));
        prop_assert_eq!((ego.accessibility, ego.detour_to_goal, ego.off_route), (0, skew, 0));
        prop_assert_eq!((goal.accessibility, goal.detour_to_goal, goal.off_route), (skew, 0, 0));
        for r in &obs.rows {
            prop_assert!((0.0..=1.0).contains(&r.x) && (0.0..=1.0).contains(&r.y));
        }
    }

    #[test]
    fn static_features_are_translation_invariant(map in map_strategy(), seed: u64, pad in 1usize..6) {
        let p = pick(&map, seed, 6);
        prop_assume!(p.len() == 6);
        let big = padded(&map, pad);
        let moved: Vec<Coord> = p.iter().map(|&c| shift(c, pad)).collect();
        let a = build_static_graph(&map, &p[2..], p[0], p[1]).unwrap();
        let b = build_static_graph(&big, &moved[2..], moved[0], moved[1]).unwrap();
        let triples = |o: &mapf_core::static_features::StaticGraphObs| {
            o.rows.iter().map(|r| (r.accessibility, r.detour_to_goal, r.off_route)).collect::<Vec<_>>()
        };
        prop_assert_eq!(triples(&a), triples(&b));
    }

    #[test]
    fn intent_rows_ignore_other_agents(map in map_strategy(), seed: u64) {
        let p = pick(&map, seed, 10);
        prop_assume!(p.len() == 10);
        let (positions, goals) = (&p[..5], &p[5..]);
        let base = build_intent_graph(&map, positions, goals, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut others: Vec<usize> = (1..5).collect();
        others.shuffle(&mut rng);
        let mut pos2 = positions.to_vec();
        let mut goals2 = goals.to_vec();
        for (k, &j) in others.iter().enumerate() {
            pos2[k + 1] = positions[j];
            goals2[k + 1] = goals[j];
        }
        let permuted = build_intent_graph(&map, &pos2, &goals2, 6).unwrap();
        prop_assert_eq!(base.rows[0].vector, permuted.rows[0].vector);
    }

    #[test]
    fn intent_variance_grows_with_horizon_on_a_straight_corridor(len in 3usize..30, start in 0usize..3) {
        let map = GridMap::empty(len + 3, 1);
        let from = Coord::new(start as i32, 0);
        let to = Coord::new((len + 2) as i32, 0);
        let mut last = -1.0;
        for f in 1..=len {
            let v = intent_vector(from, &predict_trajectory(&map, from, to, f).unwrap()).unwrap();
            prop_assert!(v.sigma_x >= last);
            prop_assert_eq!(v.sigma_y, 0.0);
            last = v.sigma_x;
        }
    }

    #[test]
    fn local_channels_are_binary_with_one_goal_cell(map in map_strategy(), seed: u64, half in 2usize..=10) {
        let p = pick(&map, seed, 8);
        prop_assume!(p.len() == 8);
        let fov = 2 * half + 1;
        let obs = fov_channels(&map, &p[..4], &p[4..], 0, fov).unwrap();
        prop_assert_eq!(obs.channels.len(), 4);
        for ch in &obs.channels {
            prop_assert_eq!(ch.len(), fov);
            prop_assert!(ch.iter().all(|r| r.len() == fov && r.iter().all(|&v| v <= 1)));
        }
        let goal_cells: u32 = obs.channels[3].iter().flatten().map(|&v| v as u32).sum();
        prop_assert_eq!(goal_cells, 1);
    }

    #[test]
    fn local_channels_are_ego_centric(map in map_strategy(), seed: u64, pad in 1usize..8) {
        let p = pick(&map, seed, 6);
        prop_assume!(p.len() == 6);
        let big = padded(&map, pad);
        let moved: Vec<Coord> = p.iter().map(|&c| shift(c, pad)).collect();
        let a = fov_channels(&map, &p[..3], &p[3..], 1, 9).unwrap();
        let b = fov_channels(&big, &moved[..3], &moved[3..], 1, 9).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn env_steps_are_deterministic_with_table_rewards(map in map_strategy(), seed: u64, codes in prop::collection::vec(0usize..5, 6)) {
        let p = pick(&map, seed, 12);
        prop_assume!(p.len() == 12);
        let state = reset(Arc::new(map), &p[..6], &p[6..], 64).unwrap();
        let actions: Vec<Action> = codes.iter().map(|&c| Action::from_index(c).unwrap()).collect();
        let config = EnvConfig::default();
        let (s1, o1) = step_joint(&state, &actions, &config).unwrap();
        let (s2, o2) = step_joint(&state, &actions, &config).unwrap();
        prop_assert_eq!(&s1, &s2);
        prop_assert_eq!(&o1, &o2);
        for i in 0..6 {
            let expected = compute_reward(o1.executed[i], s1.on_goal(i), o1.collided[i], o1.eta[i]);
            prop_assert_eq!(o1.rewards[i], expected);
            let base = [-0.3, 0.0, -2.0];
            let blocking = if o1.executed[i] == Action::Idle { -(o1.eta[i] as f64) } else { 0.0 };
            prop_assert!(base.iter().any(|b| b + blocking == o1.rewards[i]), "reward {}", o1.rewards[i]);
        }
        let idle = vec![Action::Idle; 6];
        let (s3, o3) = step_joint(&state, &idle, &config).unwrap();
        prop_assert_eq!(&s3.positions, &state.positions);
        prop_assert!(o3.collided.iter().all(|c| !c));
    }

    #[test]
    fn self_attention_is_permutation_equivariant(seed: u64, n in 1usize..7) {
        let params = EncoderParams::new(EncoderConfig::desk(4), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let u = Matrix::uniform(n, 8, 2.0, &mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let permuted = Matrix::from_rows(&order.iter().map(|&i| u.row(i).to_vec()).collect::<Vec<_>>());
        let (a, _) = self_attention_layer(&u, &params.self_attn[0], &params.config).unwrap();
        let (b, _) = self_attention_layer(&permuted, &params.self_attn[0], &params.config).unwrap();
        prop_assert!(a.is_finite());
        for (k, &i) in order.iter().enumerate() {
            for (x, y) in b.row(k).iter().zip(a.row(i)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn entropy_is_bounded_by_the_uniform_policy(raw in prop::collection::vec(0.0f64..1.0, 5)) {
        let z: f64 = raw.iter().sum();
        prop_assume!(z > 1e-9);
        let p: Vec<f64> = raw.iter().map(|v| v / z).collect();
        let h = entropy_term(&p);
        prop_assert!(h >= -(5f64.ln()) - 1e-12 && h <= 1e-12);
    }

    #[test]
    fn blocking_loss_is_non_negative(pred in prop::collection::vec(0.0f64..=1.0, 1..10), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = pred.iter().map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
        prop_assert!(blocking_loss(&pred, &truth).unwrap() >= 0.0);
        prop_assert!(blocking_loss(&truth, &truth).unwrap() < 1e-9);
    }

    #[test]
    fn total_loss_is_linear_in_each_component(parts in prop::array::uniform5(-5.0f64..5.0), k in 0usize..5, delta in -3.0f64..3.0) {
        let c = LossCoefficients::default();
        let weights = [c.alpha, c.beta, c.iota, c.zeta, c.eta_coef];
        let eval = |v: &[f64; 5]| total_loss(v[0], v[1], v[2], v[3], v[4], &c);
        let mut moved = parts;
        moved[k] += delta;
        prop_assert!((eval(&moved) - eval(&parts) - weights[k] * delta).abs() < 1e-9);
    }
}

#[test]
fn clipped_ppo_branch_has_zero_ratio_gradient() {
    let h = 1e-6;
    for a in [0.3, 1.0, 2.5] {
        let f = |r: f64| ppo_policy_loss(&[r], &[a], 0.2, ClipMode::Standard).unwrap();
        let slope = (f(1.5 + h) - f(1.5 - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-9, "A={a}: slope {slope}");
    }
}
