use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent reachability oracle: 4-connected flood fill over cells the
/// predicate admits.
fn reachable(state: &GridState, from: (usize, usize), to: (usize, usize), ok: impl Fn(CellKind) -> bool) -> bool {
    let mut seen = vec![false; state.width * state.height];
    let mut queue = VecDeque::from([from]);
    seen[from.1 * state.width + from.0] = true;
    while let Some((x, y)) = queue.pop_front() {
        if (x, y) == to {
            return true;
        }
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let nx = (x as i64 + dx) as usize;
            let ny = (y as i64 + dy) as usize;
            if nx < state.width && ny < state.height && !seen[ny * state.width + nx] && ok(state.get(nx, ny)) {
                seen[ny * state.width + nx] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    false
}

/// BFS over poses to an action sequence that stands the agent in front of
/// `target` facing it.
fn plan_to_face(state: &GridState, target: (usize, usize)) -> Option<Vec<usize>> {
    let start = state.pose;
    let key = |p: &AgentPose| (p.x, p.y, p.heading.index());
    let mut seen = std::collections::HashSet::from([key(&start)]);
    let mut queue = VecDeque::from([(start, Vec::new())]);
    while let Some((pose, path)) = queue.pop_front() {
        if pose.ahead() == Some(target) {
            return Some(path);
        }
        for action in [Action::Left, Action::Right, Action::Forward] {
            let mut next = pose;
            match action {
                Action::Left => next.heading = pose.heading.left(),
                Action::Right => next.heading = pose.heading.right(),
                _ => {
                    let (x, y) = pose.ahead()?;
                    let cell = state.get(x, y);
                    if !(cell.can_enter() && cell != CellKind::Lava) {
                        continue;
                    }
                    next.x = x;
                    next.y = y;
                }
            }
            if seen.insert(key(&next)) {
                let mut p = path.clone();
                p.push(action.id());
                queue.push_back((next, p));
            }
        }
    }
    None
}

fn run(state: &mut GridState, actions: &[usize]) -> Vec<EnvOutcome> {
    actions.iter().map(|&a| state.step(a).unwrap()).collect()
}

/// Scripted solver: reach key, pick up, reach door, toggle, walk to goal.
fn solve_doorkey(state: &mut GridState) -> Option<EnvOutcome> {
    let key = (0..state.height)
        .flat_map(|y| (0..state.width).map(move |x| (x, y)))
        .find(|&(x, y)| state.get(x, y) == CellKind::Key)?;
    run(state, &plan_to_face(state, key)?);
    state.step(Action::Pickup.id()).unwrap();
    let door = state.door?;
    run(state, &plan_to_face(state, door)?);
    state.step(Action::Toggle.id()).unwrap();
    let goal = (state.width - 2, state.height - 2);
    let mut path = plan_to_face(state, goal)?;
    path.push(Action::Forward.id());
    run(state, &path).pop()
}

#[test]
fn collect_defaults_and_mode_distance() {
    let cfg = CollectConfig::default();
    assert_eq!((cfg.grid_size, cfg.view_size, cfg.n_modes, cfg.n_balls), (15, 5, 2, 12));
    assert_eq!(cfg.min_mode_dist, 10.0);
    let mut r = rng(0);
    for _ in 0..200 {
        let s = gen_collect(&cfg, &mut r).unwrap();
        assert_eq!(s.balls_remaining(), 12);
        assert!(modes_separated(&s.modes, 10.0));
        assert_eq!(s.get(s.pose.x, s.pose.y), CellKind::Empty);
        assert_eq!(s.step_count, 0);
    }
}

#[test]
fn mode_separation_examples() {
    assert!(modes_separated(&[(2, 3), (13, 12)], 10.0));
    assert!(!modes_separated(&[(2, 3), (6, 5)], 10.0));
}

#[test]
fn infeasible_mode_distance_is_rejected() {
    let cfg = CollectConfig {
        grid_size: 6,
        min_mode_dist: 50.0,
        ..CollectConfig::default()
    };
    assert!(matches!(
        gen_collect(&cfg, &mut rng(1)),
        Err(crate::Error::Config { .. })
    ));
    // Feasible by the bound but needs corners on a tiny grid with 4 modes.
    let cfg = CollectConfig {
        grid_size: 5,
        n_modes: 5,
        min_mode_dist: 2.0,
        n_balls: 1,
        ..CollectConfig::default()
    };
    assert!(matches!(
        sample_modes(5, 5, 2.0, &mut rng(1)),
        Err(crate::Error::Infeasible(_))
    ));
    assert!(gen_collect(&cfg, &mut rng(1)).is_err());
}

#[test]
fn oracle_variant_parameters() {
    let cfg = CollectConfig::oracle_variant();
    assert_eq!((cfg.grid_size, cfg.max_steps), (20, 200));
    assert_eq!(cfg.min_mode_dist, 15.0);
    let s = gen_collect(&cfg, &mut rng(3)).unwrap();
    assert!(modes_separated(&s.modes, 15.0));
}

#[test]
fn lava_crossing_structure_and_path() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let s = gen_lava_crossing(DEFAULT_MAX_STEPS, &mut r);
        assert_eq!((s.width, s.height), (9, 9));
        assert_eq!((s.pose.x, s.pose.y, s.pose.heading), (1, 1, Heading::East));
        assert_eq!(s.get(7, 7), CellKind::Goal);
        let cols: Vec<usize> = (1..8)
            .filter(|&x| (1..8).filter(|&y| s.get(x, y) == CellKind::Lava).count() >= 5)
            .collect();
        let rows: Vec<usize> = (1..8)
            .filter(|&y| (1..8).filter(|&x| s.get(x, y) == CellKind::Lava).count() >= 5)
            .collect();
        assert_eq!((cols.len(), rows.len()), (1, 1), "\n{}", s.render());
        // Exactly one gap per stream, counting the intersection as lava.
        assert_eq!((1..8).filter(|&y| s.get(cols[0], y) != CellKind::Lava).count(), 1);
        assert_eq!((1..8).filter(|&x| s.get(x, rows[0]) != CellKind::Lava).count(), 1);
        assert_eq!(s.count(CellKind::Lava), 11);
        assert!(reachable(&s, (1, 1), (7, 7), |c| c != CellKind::Wall && c != CellKind::Lava));
    }
}

#[test]
fn doorkey_structure_and_solver() {
    let mut r = rng(4);
    for _ in 0..1000 {
        let mut s = gen_doorkey(DEFAULT_MAX_STEPS, &mut r);
        let (dx, dy) = s.door.unwrap();
        assert!((2..=5).contains(&dx));
        assert!((1..=5).contains(&dy));
        for y in 1..7 {
            let expect = if y == dy { CellKind::DoorLocked } else { CellKind::Wall };
            assert_eq!(s.get(dx, y), expect);
        }
        assert!(s.pose.x < dx);
        assert_eq!(s.get(6, 6), CellKind::Goal);
        assert_eq!(s.count(CellKind::Key), 1);
        let last = solve_doorkey(&mut s).expect("solvable");
        assert!(last.terminated && !last.truncated);
        assert!((last.reward - (1.0 - 0.9 * s.step_count as f64 / 150.0)).abs() < 1e-12);
    }
}

#[test]
fn goal_reward_at_step_fifty() {
    let mut s = GridState::blank(EnvKind::DoorKey, 8, 8, 150, 7);
    // 49 left turns from east end facing north.
    s.pose = AgentPose::new(2, 2, Heading::East);
    s.set(2, 1, CellKind::Goal);
    for _ in 0..49 {
        s.step(Action::Left.id()).unwrap();
    }
    let out = s.step(Action::Forward.id()).unwrap();
    assert!(out.terminated);
    assert!((out.reward - 0.7).abs() < 1e-12);
}

#[test]
fn lava_and_wall_moves() {
    let mut s = GridState::blank(EnvKind::LavaCrossing, 9, 9, 150, 7);
    s.pose = AgentPose::new(1, 1, Heading::North);
    let out = s.step(Action::Forward.id()).unwrap();
    assert_eq!((s.pose.x, s.pose.y, out.reward), (1, 1, 0.0));
    assert!(!out.done());
    s.set(1, 2, CellKind::Lava);
    s.step(Action::Left.id()).unwrap();
    s.step(Action::Left.id()).unwrap();
    let out = s.step(Action::Forward.id()).unwrap();
    assert!(out.terminated);
    assert_eq!(out.reward, 0.0);
    assert_eq!(out.event, Some(StepEvent::EnteredLava));
    assert!(matches!(s.step(0), Err(crate::Error::EpisodeFinished)));
}

#[test]
fn invalid_action_for_env() {
    let mut s = gen_lava_crossing(150, &mut rng(0));
    assert!(matches!(
        s.step(3),
        Err(crate::Error::InvalidAction { action: 3, count: 3 })
    ));
}

#[test]
fn collect_pickup_and_blocking_ball() {
    let mut s = GridState::blank(EnvKind::Collect, 7, 7, 150, 5);
    s.pose = AgentPose::new(3, 3, Heading::North);
    s.set(3, 2, CellKind::Ball);
    s.set(5, 5, CellKind::Ball);
    s.n_balls = 2;
    let obs = s.observe();
    assert_eq!(obs.ahead(), Some(CellKind::Ball));
    assert_eq!(obs.kind_at(3, 2), Some(CellKind::Ball));
    s.step(Action::Forward.id()).unwrap();
    assert_eq!((s.pose.x, s.pose.y), (3, 3));
    let out = s.step(Action::Pickup.id()).unwrap();
    assert_eq!(out.reward, 1.0);
    assert!(!out.terminated);
    assert_eq!(s.balls_remaining() + s.balls_collected, 2);
}

#[test]
fn last_ball_terminates() {
    let mut s = GridState::blank(EnvKind::Collect, 7, 7, 150, 5);
    s.pose = AgentPose::new(3, 3, Heading::East);
    s.set(4, 3, CellKind::Ball);
    s.n_balls = 1;
    let out = s.step(Action::Pickup.id()).unwrap();
    assert!(out.terminated && !out.truncated);
    assert_eq!(out.reward, 1.0);
}

#[test]
fn truncation_at_cap() {
    let mut s = gen_collect(
        &CollectConfig {
            max_steps: 5,
            ..CollectConfig::default()
        },
        &mut rng(9),
    )
    .unwrap();
    let outs = run(&mut s, &[0, 0, 0, 0, 0]);
    assert!(outs[..4].iter().all(|o| !o.done()));
    assert!(outs[4].truncated && !outs[4].terminated);
    assert_eq!(outs[4].reward, 0.0);
}

#[test]
fn corner_view_is_mostly_wall() {
    let mut s = GridState::blank(EnvKind::Collect, 15, 15, 150, 5);
    s.pose = AgentPose::new(1, 1, Heading::North);
    let obs = s.observe();
    let walls = (0..25)
        .filter(|&i| obs.kind_at(i / 5, i % 5) == Some(CellKind::Wall))
        .count();
    assert!(walls > 12, "{walls}");
}

#[test]
fn four_rotations_restore_view() {
    let mut s = gen_collect(&CollectConfig::default(), &mut rng(5)).unwrap();
    let before = s.observe();
    let views: Vec<Observation> = (0..4).map(|_| s.step(Action::Left.id()).unwrap().obs).collect();
    assert_eq!(views[3], before);
    assert_ne!(views[0], before);
}

#[test]
fn view_follows_heading() {
    // A key east of the agent shows up ahead when facing east and to the
    // right when facing north.
    let mut s = GridState::blank(EnvKind::DoorKey, 8, 8, 150, 7);
    s.pose = AgentPose::new(3, 4, Heading::East);
    s.set(4, 4, CellKind::Key);
    assert_eq!(s.observe().kind_at(5, 3), Some(CellKind::Key));
    s.pose.heading = Heading::North;
    assert_eq!(s.observe().kind_at(6, 4), Some(CellKind::Key));
    s.pose.heading = Heading::South;
    assert_eq!(s.observe().kind_at(6, 2), Some(CellKind::Key));
}

#[test]
fn reset_is_seeded() {
    for spec in [
        EnvSpec::Collect(CollectConfig::default()),
        EnvSpec::LavaCrossing { max_steps: 150 },
        EnvSpec::DoorKey { max_steps: 150 },
    ] {
        let (a, oa) = spec.reset(&mut rng(11)).unwrap();
        let (b, ob) = spec.reset(&mut rng(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        assert_eq!(oa, egocentric_view(&a, spec.view_size()));
        assert_eq!(oa.view, if matches!(spec, EnvSpec::Collect(_)) { 5 } else { 7 });
    }
}

#[test]
fn render_golden() {
    let mut s = GridState::blank(EnvKind::DoorKey, 5, 4, 10, 7);
    s.pose = AgentPose::new(1, 1, Heading::South);
    s.set(2, 1, CellKind::Key);
    s.set(3, 2, CellKind::Goal);
    assert_eq!(s.render(), "#####\n#vk.#\n#..G#\n#####\n");
}

#[test]
fn env_spec_toml_round_trip() {
    let spec: EnvSpec = toml::from_str("id = \"collect\"\ngrid_size = 20\nview_size = 5\nn_modes = 2\nmin_mode_dist = 15.0\nn_balls = 12\nsigma = 2.0\nmax_steps = 200\n").unwrap();
    assert_eq!(spec, EnvSpec::Collect(CollectConfig::oracle_variant()));
    let spec: EnvSpec = toml::from_str("id = \"door_key\"").unwrap();
    assert_eq!(spec.max_steps(), 150);
    assert!(toml::from_str::<EnvSpec>("id = \"door_key\"\nbogus = 1").is_err());
}
