use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::{gen_lava_crossing, Action, CellKind, EnvKind, EnvOutcome, GridState, Heading, StepEvent};
use crate::learner::{ReplayConfig, ReplayLearner, TdConfig};
use crate::nn::{conv_for_view, InputShape, Parameterized, QNetworkSpec};

fn open_grid(kind: EnvKind, size: usize, view: usize) -> GridState {
    GridState::blank(kind, size, size, 150, view)
}

fn at(state: &mut GridState, x: usize, y: usize, heading: Heading) {
    state.pose = AgentPose::new(x, y, heading);
}

fn input<'a>(state: &GridState, obs: &'a Observation) -> ModuleInput<'a> {
    ModuleInput {
        obs,
        pose: state.pose,
        modes: None,
        visits: None,
    }
}

fn small_net(view: usize, actions: usize, seed: u64) -> QNetwork<f64> {
    let spec = QNetworkSpec {
        input: InputShape::square(view, 3),
        conv: conv_for_view(view),
        fc_widths: vec![8, 8],
        action_count: actions,
    };
    QNetwork::new(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn learner(view: usize, actions: usize) -> ReplayLearner<f64> {
    let td = TdConfig {
        lr: 1e-3,
        tau: 0.01,
        gamma: 0.99,
    };
    let replay = ReplayConfig {
        batch_size: 4,
        buffer_size: 100,
        update_freq: 2,
    };
    ReplayLearner::new(small_net(view, actions, 0), td, replay).unwrap()
}

#[test]
fn rule_pickup_examples() {
    let mut s = open_grid(EnvKind::Collect, 9, 5);
    at(&mut s, 4, 4, Heading::North);
    assert_eq!(rule_pickup(&s.observe()), Action::Forward);
    s.set(3, 4, CellKind::Ball);
    assert_eq!(rule_pickup(&s.observe()), Action::Left);
    s.set(4, 3, CellKind::Ball);
    assert_eq!(rule_pickup(&s.observe()), Action::Pickup);
}

#[test]
fn steering_reaches_ball_without_dithering() {
    // Every ball position in a 5x5 view of an open grid ends in a pickup.
    for bx in 2..7 {
        for by in 2..7 {
            if (bx, by) == (4, 6) {
                continue;
            }
            let mut s = open_grid(EnvKind::Collect, 9, 5);
            s.n_balls = 1;
            s.set(bx, by, CellKind::Ball);
            at(&mut s, 4, 6, Heading::North);
            let mut picked = false;
            for _ in 0..12 {
                let a = rule_pickup(&s.observe());
                if s.step(a.id()).unwrap().reward == 1.0 {
                    picked = true;
                    break;
                }
            }
            assert!(picked, "ball at ({bx},{by})");
        }
    }
}

#[test]
fn avoid_lava_examples() {
    let mut s = open_grid(EnvKind::LavaCrossing, 9, 7);
    at(&mut s, 3, 3, Heading::East);
    assert_eq!(avoid_lava(&s.observe()), Action::Forward);
    s.set(4, 3, CellKind::Lava);
    assert_eq!(avoid_lava(&s.observe()), Action::Right);
}

#[test]
fn avoid_lava_never_steps_into_lava() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..1000 {
        let mut s = gen_lava_crossing(150, &mut r);
        for y in 1..8 {
            for x in 1..8 {
                if !matches!(s.get(x, y), CellKind::Empty | CellKind::Goal) {
                    continue;
                }
                for h in Heading::ALL {
                    at(&mut s, x, y, h);
                    let a = avoid_lava(&s.observe());
                    if a == Action::Forward {
                        assert_ne!(s.ahead_cell(), CellKind::Lava);
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100_000);
}

#[test]
fn get_key_examples() {
    let mut s = open_grid(EnvKind::DoorKey, 8, 7);
    at(&mut s, 2, 3, Heading::East);
    s.set(3, 3, CellKind::Key);
    assert_eq!(get_key(&s.observe(), false), Action::Pickup);
    s.set(3, 3, CellKind::DoorLocked);
    assert_eq!(get_key(&s.observe(), true), Action::Toggle);
    s.set(3, 3, CellKind::Empty);
    assert_eq!(get_key(&s.observe(), true), Action::Forward);
}

#[test]
fn goto_mode_examples() {
    let mut s = open_grid(EnvKind::Collect, 15, 5);
    at(&mut s, 2, 2, Heading::East);
    let mut g = GotoMode::default();
    assert_eq!(g.propose(&[(5, 2)], &s.pose, &s.observe()), Action::Forward);
    at(&mut s, 2, 2, Heading::West);
    assert_eq!(g.propose(&[(5, 2)], &s.pose, &s.observe()), Action::Right);
}

fn run_goto(start: AgentPose, center: (usize, usize)) -> usize {
    let mut s = open_grid(EnvKind::Collect, 15, 5);
    s.max_steps = 1000;
    s.pose = start;
    let mut g = GotoMode::default();
    let centers = [center, (1, 1)];
    let mut steps = 0;
    while (s.pose.x, s.pose.y) != center {
        let a = g.propose(&centers, &s.pose, &s.observe());
        s.step(a.id()).unwrap();
        steps += 1;
        assert!(steps < 200);
    }
    steps
}

#[test]
fn goto_mode_reaches_center_within_bound() {
    // Exhaustive over poses on an empty 15x15 grid for one interior centre.
    let center = (9, 6);
    for y in 1..14usize {
        for x in 1..14usize {
            for h in Heading::ALL {
                let d = x.abs_diff(center.0) + y.abs_diff(center.1);
                if d == 0 || (x + y) < 3 {
                    continue;
                }
                // The nearer second centre at (1,1) would be targeted first.
                if x + y - 2 < d {
                    continue;
                }
                let steps = run_goto(AgentPose::new(x, y, h), center);
                assert!(
                    steps <= d + 2 * (d + 1),
                    "from ({x},{y},{h:?}): {steps} > bound for d={d}"
                );
            }
        }
    }
}

#[test]
fn explore_examples() {
    let mut s = open_grid(EnvKind::LavaCrossing, 9, 7);
    at(&mut s, 4, 4, Heading::North);
    let mut v = VisitMemory::new(9, 9);
    assert_eq!(explore(&s.observe(), &s.pose, &v), Action::Forward);
    for _ in 0..3 {
        v.visit(4, 3);
    }
    v.visit(5, 4);
    assert_eq!(explore(&s.observe(), &s.pose, &v), Action::Left);
}

#[test]
fn explore_covers_open_grid() {
    let mut good = 0;
    for seed in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut s = open_grid(EnvKind::LavaCrossing, 9, 7);
        at(
            &mut s,
            r.gen_range(1..8),
            r.gen_range(1..8),
            Heading::from_index(r.gen_range(0..4)),
        );
        let mut v = VisitMemory::new(9, 9);
        v.visit(s.pose.x, s.pose.y);
        for _ in 0..150 {
            let a = explore(&s.observe(), &s.pose, &v);
            s.step(a.id()).unwrap();
            v.visit(s.pose.x, s.pose.y);
        }
        if v.visited_cells() as f64 >= 0.8 * 49.0 {
            good += 1;
        }
    }
    assert!(good >= 90, "{good}/100 seeds covered 80%");
}

#[test]
fn module_dispatch_and_input_checks() {
    let mut s = open_grid(EnvKind::Collect, 9, 5);
    at(&mut s, 4, 4, Heading::North);
    s.set(4, 3, CellKind::Ball);
    let obs = s.observe();
    let mut m = KnowledgeModule::<f64>::rule(0, ModuleKind::RulePickup, RewardFn::Global).unwrap();
    assert_eq!(m.propose(&input(&s, &obs)).unwrap(), Action::Pickup.id());
    let mut g = KnowledgeModule::<f64>::rule(1, ModuleKind::GotoMode, RewardFn::Global).unwrap();
    assert!(matches!(g.propose(&input(&s, &obs)), Err(crate::Error::ModuleInput(_))));
    let mut e = KnowledgeModule::<f64>::rule(2, ModuleKind::Explore, RewardFn::ExploreBonus).unwrap();
    assert!(e.propose(&input(&s, &obs)).is_err());
    assert!(KnowledgeModule::<f64>::rule(3, ModuleKind::Learnable, RewardFn::Global).is_err());
}

#[test]
fn learnable_with_zero_head_proposes_action_zero() {
    let mut l = learner(5, 4);
    l.td.online.head.weight.fill(0.0);
    l.td.online.head.bias.fill(0.0);
    let mut m = KnowledgeModule::learnable(0, RewardFn::Global, l);
    let s = open_grid(EnvKind::Collect, 9, 5);
    let obs = s.observe();
    assert_eq!(m.propose(&input(&s, &obs)).unwrap(), 0);
}

#[test]
fn only_learnable_modules_explore() {
    let s = open_grid(EnvKind::Collect, 9, 5);
    let obs = s.observe();
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut learnable = KnowledgeModule::learnable(0, RewardFn::Global, learner(5, 4));
    let greedy = learnable.propose(&input(&s, &obs)).unwrap();
    let mut seen = [0usize; 4];
    for _ in 0..400 {
        seen[learnable.propose_exploring(&input(&s, &obs), 1.0, &mut r).unwrap()] += 1;
        assert_eq!(
            learnable.propose_exploring(&input(&s, &obs), 0.0, &mut r).unwrap(),
            greedy
        );
    }
    assert!(seen.iter().all(|&n| n > 50), "{seen:?}");

    let mut oracle = KnowledgeModule::oracle(1, small_net(5, 4, 3));
    let mut rule = KnowledgeModule::<f64>::rule(2, ModuleKind::RulePickup, RewardFn::Global).unwrap();
    let (o, p) = (
        oracle.propose(&input(&s, &obs)).unwrap(),
        rule.propose(&input(&s, &obs)).unwrap(),
    );
    for _ in 0..50 {
        assert_eq!(oracle.propose_exploring(&input(&s, &obs), 1.0, &mut r).unwrap(), o);
        assert_eq!(rule.propose_exploring(&input(&s, &obs), 1.0, &mut r).unwrap(), p);
    }
}

fn transition(obs: &Observation, action: usize, reward: f64) -> Transition {
    Transition {
        obs: obs.clone(),
        action,
        reward,
        next_obs: obs.clone(),
        done: false,
    }
}

#[test]
fn frozen_modules_ignore_updates() {
    let s = open_grid(EnvKind::Collect, 9, 5);
    let obs = s.observe();
    let mut oracle = KnowledgeModule::oracle(0, small_net(5, 4, 3));
    let before: Vec<_> = oracle.network().unwrap().params().into_iter().cloned().collect();
    let first = oracle.propose(&input(&s, &obs)).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..5 {
        assert!(!oracle.update(transition(&obs, 1, 1.0), &mut r).unwrap());
    }
    assert_eq!(oracle.ignored_updates(), 5);
    assert_eq!(oracle.propose(&input(&s, &obs)).unwrap(), first);
    let after: Vec<_> = oracle.network().unwrap().params().into_iter().cloned().collect();
    assert_eq!(before, after);
}

#[test]
fn learnable_receives_shared_transitions_and_trains() {
    let s = open_grid(EnvKind::Collect, 9, 5);
    let obs = s.observe();
    let mut m = KnowledgeModule::learnable(1, RewardFn::Global, learner(5, 4));
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let before = m.network().unwrap().clone();
    for k in 0..8 {
        assert!(m.update(transition(&obs, k % 4, 1.0), &mut r).unwrap());
    }
    let l = m.learner().unwrap();
    assert_eq!(l.buffer.len(), 8);
    // Pushes 4, 6 and 8 are due with a warm buffer.
    assert_eq!(l.td.updates, 3);
    assert_ne!(&before, m.network().unwrap());
}

fn outcome(reward: f64, event: Option<StepEvent>) -> EnvOutcome {
    EnvOutcome {
        obs: Observation {
            view: 1,
            data: vec![1, 0, 0],
        },
        reward,
        terminated: false,
        truncated: false,
        event,
    }
}

#[test]
fn modular_rewards() {
    let ball0 = outcome(
        1.0,
        Some(StepEvent::PickedBall {
            x: 1,
            y: 1,
            nearest_mode: 0,
        }),
    );
    assert_eq!(RewardFn::ModePickup(0).reward(&ball0, false), 1.0);
    assert_eq!(RewardFn::ModePickup(1).reward(&ball0, false), 0.0);
    assert_eq!(RewardFn::Global.reward(&ball0, false), 1.0);
    let lava = outcome(0.0, Some(StepEvent::EnteredLava));
    assert_eq!(RewardFn::LavaPenalty.reward(&lava, true), -1.0);
    assert_eq!(RewardFn::ExploreBonus.reward(&outcome(0.0, None), true), 1.0);
    assert_eq!(RewardFn::ExploreBonus.reward(&outcome(0.0, None), false), 0.0);
    assert_eq!(
        RewardFn::KeyBonus.reward(&outcome(0.0, Some(StepEvent::PickedKey)), false),
        0.5
    );
    assert_eq!(
        RewardFn::KeyBonus.reward(&outcome(0.7, Some(StepEvent::ReachedGoal)), false),
        0.7
    );
}

#[test]
fn roster_validation() {
    let ok = ModuleConfig::new(ModuleKind::GetKey);
    assert!(ok.validate(EnvKind::DoorKey, 0).is_ok());
    assert_eq!(ok.reward_fn(), RewardFn::KeyBonus);
    assert!(ok.validate(EnvKind::Collect, 2).is_err());
    assert!(ModuleConfig::new(ModuleKind::Oracle)
        .validate(EnvKind::Collect, 2)
        .is_err());
    let mode = ModuleConfig::new(ModuleKind::Learnable).with_reward(RewardFn::ModePickup(2));
    assert!(mode.validate(EnvKind::Collect, 2).is_err());
    let cfg: ModuleConfig = toml::from_str("kind = \"learnable\"\nreward = { mode_pickup = 1 }").unwrap();
    assert_eq!(cfg.reward, Some(RewardFn::ModePickup(1)));
}

#[test]
fn failed_gate_oracle_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.json");
    let net = small_net(5, 4, 1);
    let mut ck = OracleCheckpoint {
        gate_passed: false,
        mean_balls: 3.0,
        eval_episodes: 50,
        network: net.to_checkpoint(None),
    };
    ck.save(&path).unwrap();
    assert!(matches!(
        KnowledgeModule::<f64>::load_oracle(0, &path),
        Err(crate::Error::Config { .. })
    ));
    ck.gate_passed = true;
    ck.save(&path).unwrap();
    let m = KnowledgeModule::<f64>::load_oracle(0, &path).unwrap();
    assert_eq!(m.network().unwrap(), &net);
}
