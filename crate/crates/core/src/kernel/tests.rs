use super::*;
use crate::pose::Heading;
use alloc::vec;
use proptest::prelude::*;
use rand_chacha::rand_core::RngCore;

fn demo(cfg: KernelConfig) -> WorldKernel {
    WorldKernel::new(GridMap::demo(), cfg).unwrap()
}

const F: usize = 0;
const TL: usize = 4;
const TR: usize = 5;

#[test]
fn deterministic_forward() {
    let k = demo(KernelConfig::deterministic());
    let s = WorldState::at(1, 1, Heading::E);
    let d = k.transition_distribution(&s, F).unwrap();
    assert_eq!(d.outcomes.len(), 1);
    assert_eq!(d.outcomes[0].0.pose, Pose::new(2, 1, Heading::E));
    assert_eq!(d.outcomes[0].0.step, 1);
    assert_eq!(d.outcomes[0].1, 1.0);
}

#[test]
fn blocked_move_stays_regardless_of_slip() {
    for p in [0.0, 0.2, 0.9] {
        let k = demo(KernelConfig {
            p_slip: p,
            ..KernelConfig::default()
        });
        let s = WorldState::at(1, 1, Heading::N);
        let d = k.transition_distribution(&s, F).unwrap();
        assert_eq!(d.outcomes.len(), 1);
        assert_eq!(d.outcomes[0].0.pose, Pose::new(1, 1, Heading::N));
        assert_eq!(d.outcomes[0].1, 1.0);
    }
}

#[test]
fn slip_splits_mass() {
    let k = demo(KernelConfig::default());
    let s = WorldState::at(1, 1, Heading::E);
    let d = k.transition_distribution(&s, F).unwrap();
    assert_eq!(d.outcomes.len(), 2);
    assert_eq!(d.outcomes[0].0.pose, Pose::new(2, 1, Heading::E));
    assert!((d.outcomes[0].1 - 0.8).abs() < 1e-15);
    assert_eq!(d.outcomes[1].0.pose, Pose::new(1, 1, Heading::E));
    assert!((d.outcomes[1].1 - 0.2).abs() < 1e-15);
}

#[test]
fn errors() {
    let k = demo(KernelConfig::default());
    let s = WorldState::at(1, 1, Heading::E);
    assert_eq!(k.transition_distribution(&s, 6), Err(KernelError::ActionOutOfRange(6)));
    let t = WorldState {
        terminal: true,
        ..s
    };
    assert_eq!(k.transition_distribution(&t, F), Err(KernelError::Terminal));
    assert_eq!(
        k.transition_distribution(&WorldState::at(2, 2, Heading::E), F),
        Err(KernelError::InvalidState(2, 2))
    );
    assert!(WorldKernel::new(GridMap::demo(), KernelConfig { p_slip: 1.0, ..KernelConfig::default() }).is_err());
}

#[test]
fn sampling_is_seed_deterministic() {
    let k = demo(KernelConfig::default());
    let s = WorldState::at(1, 1, Heading::E);
    let a = k.sample_transition(&s, F, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = k.sample_transition(&s, F, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a, b);
    let det = demo(KernelConfig::deterministic());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        assert_eq!(det.sample_transition(&s, F, &mut rng).unwrap().pose, Pose::new(2, 1, Heading::E));
    }
}

#[test]
fn empirical_stay_fraction() {
    let k = demo(KernelConfig::default());
    let s = WorldState::at(1, 1, Heading::E);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let stays = (0..10_000)
        .filter(|_| k.sample_transition(&s, F, &mut rng).unwrap().pose == s.pose)
        .count();
    let frac = stays as f64 / 10_000.0;
    assert!((frac - 0.2).abs() <= 0.02, "stay fraction {frac}");
}

/// Independent renderer: rotate the window offset with an explicit
/// rotation matrix built from the compass yaw.
fn oracle_observe(map: &GridMap, pose: Pose, r: i32) -> Vec<u8> {
    let n = 2 * r + 1;
    // Clockwise compass rotation in grid coords (y down): yaw 0 => ahead is -y.
    let (c, s) = match pose.heading.yaw_degrees() as i32 {
        0 => (1, 0),
        90 => (0, 1),
        180 => (-1, 0),
        _ => (0, -1),
    };
    let mut out = vec![];
    for j in 0..n {
        for i in 0..n {
            // Offset in the north-facing frame, then rotated.
            let (ox, oy) = (i - r, j - r);
            let wx = pose.x + c * ox - s * oy;
            let wy = pose.y + s * ox + c * oy;
            let v = if i == r && j == r {
                85
            } else {
                match map.cell(wx, wy) {
                    None | Some(Cell::Wall) => 0,
                    Some(Cell::Free) => 255,
                    Some(Cell::Goal) => 170,
                }
            };
            out.push(v);
        }
    }
    out
}

#[test]
fn observe_matches_oracle_on_demo_map() {
    let k = demo(KernelConfig::default());
    let s = WorldState::at(1, 1, Heading::E);
    let frame = k.observe(&s);
    #[rustfmt::skip]
    let frozen: [u8; 25] = [
        0, 0, 255, 255, 170,
        0, 0, 255,   0, 255,
        0, 0,  85, 255, 255,
        0, 0,   0,   0,   0,
        0, 0,   0,   0,   0,
    ];
    assert_eq!(frame.pixels(), &frozen);
    assert_eq!(oracle_observe(k.map(), s.pose, 2), frozen);
    assert_eq!(k.observe(&s), frame);
}

#[test]
fn observe_matches_oracle_everywhere() {
    for seed in 0..10 {
        let map = mapgen::random_map(seed, 7, 6, 0.3);
        for r in [1u32, 2, 3] {
            let k = WorldKernel::new(map.clone(), KernelConfig { window_radius: r, ..KernelConfig::default() }).unwrap();
            for y in 0..map.height() as i32 {
                for x in 0..map.width() as i32 {
                    if map.blocked(x, y) {
                        continue;
                    }
                    for h in Heading::ALL {
                        let s = WorldState::at(x, y, h);
                        let f = k.observe(&s);
                        assert_eq!(f.pixels(), &oracle_observe(&map, s.pose, r as i32)[..]);
                        assert_eq!(f.get(r, r), Some(PIXEL_AGENT));
                    }
                }
            }
        }
    }
}

#[test]
fn reward_cases() {
    let k = demo(KernelConfig::default());
    let a = WorldState::at(3, 2, Heading::S);
    let goal = k.transition_distribution(&a, F).unwrap().outcomes[0].0;
    assert!(goal.terminal);
    assert_eq!(k.reward(&a, F, &goal), 1.0);
    let free = WorldState::at(1, 1, Heading::E);
    let moved = k.transition_distribution(&free, F).unwrap().outcomes[0].0;
    assert_eq!(k.reward(&free, F, &moved), -0.01);
    let blocked = WorldState::at(1, 1, Heading::N);
    let stay = k.transition_distribution(&blocked, F).unwrap().outcomes[0].0;
    assert_eq!(k.reward(&blocked, F, &stay), -0.01);
}

#[test]
fn rollout_examples() {
    let k = demo(KernelConfig::deterministic());
    let s0 = k.initial_state();
    let empty = k.rollout(&s0, &[], 1).unwrap();
    assert!(empty.is_empty());
    assert_eq!(empty.initial_frame, k.observe(&s0));

    let plan = [F, F, TR, F, F];
    let t = k.rollout(&s0, &plan, 1).unwrap();
    assert_eq!(t.len(), 5);
    let last = t.final_state().unwrap();
    assert_eq!(last.pose, Pose::new(3, 3, Heading::S));
    assert!(last.terminal);
    // Hand simulation: (2,1) (3,1) turn (3,2) are non-goal steps, then goal.
    let expected = 4.0 * -0.01 + 1.0;
    assert!((t.cumulative_reward() - expected).abs() < 1e-12);

    // Actions after the terminal state are not applied.
    let longer = k.rollout(&s0, &[F, F, TR, F, F, F, F], 1).unwrap();
    assert_eq!(longer.len(), 5);

    let stochastic = demo(KernelConfig::default());
    let a = stochastic.rollout(&s0, &[F, TL, F, TR, F, F, F], 99).unwrap();
    let b = stochastic.rollout(&s0, &[F, TL, F, TR, F, F, F], 99).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exhaustive_normalization_and_wall_safety() {
    for seed in 0..10 {
        let map = mapgen::random_map(seed, 9, 9, 0.3);
        let k = WorldKernel::new(map.clone(), KernelConfig::default()).unwrap();
        for y in 0..9 {
            for x in 0..9 {
                if map.blocked(x, y) {
                    continue;
                }
                for h in Heading::ALL {
                    let s = WorldState::at(x, y, h);
                    if map.cell(x, y) == Some(Cell::Goal) {
                        continue;
                    }
                    for a in 0..6 {
                        let d = k.transition_distribution(&s, a).unwrap();
                        assert!((d.total() - 1.0).abs() < 1e-12);
                        for (i, (o, p)) in d.outcomes.iter().enumerate() {
                            assert!(*p > 0.0);
                            assert!(!map.blocked(o.pose.x, o.pose.y));
                            assert!(d.outcomes[..i].iter().all(|(q, _)| q != o));
                        }
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn revisits_render_identically(seed in any::<u64>()) {
        let k = demo(KernelConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actions: Vec<usize> = (0..60).map(|_| (rng.next_u64() % 6) as usize).collect();
        let t = k.rollout(&k.initial_state(), &actions, seed).unwrap();
        for a in &t.steps {
            for b in &t.steps {
                if a.state.pose == b.state.pose {
                    prop_assert_eq!(&a.frame, &b.frame);
                }
            }
        }
    }

    #[test]
    fn four_left_turns_restore_heading(h in 0usize..4) {
        let k = demo(KernelConfig::default());
        let mut s = WorldState::at(1, 1, Heading::ALL[h]);
        for _ in 0..4 {
            s = k.transition_distribution(&s, TL).unwrap().outcomes[0].0;
        }
        prop_assert_eq!(s.pose.heading, Heading::ALL[h]);
        prop_assert_eq!(s.step, 4);
    }
}
