use super::controller::{Controller, CrwParams, DpoParams};
use super::perturb::{NoiseProfile, PopulationProfile, RobotStanding};
use super::*;
use crate::robustness::QueueRates;

fn small_config(seed: u64) -> WorldConfig {
    WorldConfig {
        arena_w: 8.0,
        arena_h: 8.0,
        nest: Rect { x: 3.0, y: 3.0, w: 2.0, h: 2.0 },
        n_robots: 4,
        n_blocks: 16,
        duration: 4000,
        interval_len: 1000,
        seed,
        ..WorldConfig::default()
    }
}

fn crw() -> Controller {
    Controller::Crw(CrwParams::default())
}

#[test]
fn same_seed_gives_identical_worlds() {
    let cfg = small_config(42);
    let a = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    let b = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    for (ra, rb) in a.robots().iter().zip(b.robots()) {
        assert_eq!(ra.position, rb.position);
        assert_eq!(ra.heading, rb.heading);
    }
    for (ba, bb) in a.blocks().iter().zip(b.blocks()) {
        assert_eq!(ba.position, bb.position);
    }
}

#[test]
fn single_source_blocks_share_one_compact_region() {
    let cfg = WorldConfig {
        distribution: BlockDistribution::SingleSource,
        n_blocks: 20,
        ..small_config(7)
    };
    let world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    let source = single_source_box(&world.cfg);
    for block in world.blocks() {
        assert!(source.contains(block.position), "{:?} outside {:?}", block.position, source);
        assert!(!world.cfg.nest.contains(block.position));
    }
}

#[test]
fn power_law_cluster_sizes_sum_to_block_count() {
    let cfg = WorldConfig {
        distribution: BlockDistribution::PowerLaw { clusters: 4, exponent: 2.0 },
        n_blocks: 64,
        ..small_config(3)
    };
    let world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    assert_eq!(world.blocks().len(), 64);
    let mut counts = std::collections::BTreeMap::new();
    for b in world.blocks() {
        *counts.entry(b.cluster_id).or_insert(0u32) += 1;
    }
    assert_eq!(counts.values().sum::<u32>(), 64);
    assert!(counts.len() <= 4);
}

#[test]
fn world_without_robots_leaves_blocks_alone() {
    let cfg = WorldConfig { n_robots: 0, ..small_config(5) };
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    let before: Vec<_> = world.blocks().iter().map(|b| b.position).collect();
    for _ in 0..50 {
        let events = world.step();
        assert_eq!(events, StepEvents::default());
    }
    let after: Vec<_> = world.blocks().iter().map(|b| b.position).collect();
    assert_eq!(before, after);
}

#[test]
fn close_robots_are_tallied_as_interference() {
    let cfg = small_config(11);
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    world.robots[0].position = Vec2::new(1.0, 1.0);
    world.robots[1].position = Vec2::new(1.1, 1.0);
    // Park the others far away.
    world.robots[2].position = Vec2::new(7.0, 7.0);
    world.robots[3].position = Vec2::new(1.0, 7.0);
    let events = world.step();
    assert!(events.avoiding >= 2, "expected the close pair flagged, got {events:?}");
    assert!(matches!(world.robots[0].mode, RobotMode::Avoiding { .. }));
    assert!(matches!(world.robots[1].mode, RobotMode::Avoiding { .. }));
}

#[test]
fn adjacent_robot_picks_up_block_in_one_step() {
    let cfg = small_config(13);
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    // Clear other robots out of the way.
    for robot in world.robots.iter_mut() {
        robot.position = Vec2::new(7.5, 7.5);
    }
    let block_pos = Vec2::new(1.0, 1.0);
    world.blocks[0].position = block_pos;
    world.robots[0].position = Vec2::new(1.05, 1.0);
    world.step();
    assert_eq!(world.robots[0].carried_block, Some(0));
    assert_eq!(world.blocks[0].state, BlockState::Carried);
    assert_eq!(world.robots[0].mode, RobotMode::Carrying);
}

#[test]
fn run_is_deterministic() {
    let cfg = small_config(99);
    let a = run(&cfg, crw(), Perturbations::default()).unwrap();
    let b = run(&cfg, crw(), Perturbations::default()).unwrap();
    assert_eq!(a, b);
    let csv_a = crate::curves::format_curves(&a);
    let csv_b = crate::curves::format_curves(&b);
    assert_eq!(csv_a, csv_b);
}

#[test]
fn discovery_events_are_bounded_by_block_count() {
    let cfg = WorldConfig {
        perf_event: PerfEvent::FirstPickup,
        block_respawn: false,
        n_blocks: 12,
        duration: 6000,
        ..small_config(17)
    };
    let bundle = run(&cfg, crw(), Perturbations::default()).unwrap();
    let total_events: f64 = bundle
        .performance
        .values()
        .iter()
        .map(|v| v * cfg.interval_len as f64)
        .sum();
    assert!(total_events <= 12.0 + 1e-9, "first pickups {total_events} exceed block count");
}

#[test]
fn block_conservation_without_respawn() {
    let cfg = WorldConfig { block_respawn: false, ..small_config(23) };
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    for _ in 0..2000 {
        world.step();
        assert_eq!(world.blocks().len(), cfg.n_blocks as usize);
        // Every carried block pairs with exactly one active robot, and
        // nothing else claims it.
        let carried_by_robots: Vec<usize> =
            world.robots().iter().filter_map(|r| r.carried_block).collect();
        let carried_blocks = world
            .blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.state == BlockState::Carried)
            .map(|(i, _)| i)
            .collect::<Vec<_>>();
        let mut sorted = carried_by_robots.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), carried_by_robots.len(), "block double-carried");
        assert_eq!(sorted, carried_blocks);
    }
}

#[test]
fn respawn_keeps_free_blocks_available() {
    let cfg = small_config(29);
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    for _ in 0..3000 {
        world.step();
        let carried =
            world.blocks().iter().filter(|b| b.state == BlockState::Carried).count() as u32;
        let free = world.blocks().iter().filter(|b| b.state == BlockState::Free).count() as u32;
        // Every block is free or carried: deposits respawn immediately.
        assert_eq!(carried + free, cfg.n_blocks);
    }
    assert!(world.total_collected() > 0, "transport run never collected");
}

#[test]
fn positions_stay_inside_arena() {
    let cfg = WorldConfig { p_rw: 0.05, ..small_config(31) };
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    for _ in 0..1500 {
        world.step();
        for robot in world.robots() {
            assert!(robot.position.x >= 0.0 && robot.position.x <= cfg.arena_w);
            assert!(robot.position.y >= 0.0 && robot.position.y <= cfg.arena_h);
        }
        for block in world.blocks() {
            assert!(block.position.x >= 0.0 && block.position.x <= cfg.arena_w);
            assert!(block.position.y >= 0.0 && block.position.y <= cfg.arena_h);
            if block.state == BlockState::Free {
                assert!(!cfg.nest.contains(block.position), "free block inside nest");
            }
        }
    }
}

#[test]
fn interference_fraction_is_a_fraction() {
    let cfg = WorldConfig { n_robots: 12, ..small_config(37) };
    let bundle = run(&cfg, crw(), Perturbations::default()).unwrap();
    for &f in bundle.interference.values() {
        assert!((0.0..=1.0).contains(&f));
    }
}

#[test]
fn more_robots_collect_more() {
    // Directional smoke check: mean total collections at N=4 beat N=1
    // in a fixed small arena across seeds.
    let totals = |n: u32| -> f64 {
        let mut acc = 0.0;
        for seed in 0..20 {
            let cfg = WorldConfig { n_robots: n, ..small_config(1000 + seed) };
            let bundle = run(&cfg, crw(), Perturbations::default()).unwrap();
            acc += bundle
                .performance
                .values()
                .iter()
                .map(|v| v * cfg.interval_len as f64)
                .sum::<f64>();
        }
        acc / 20.0
    };
    let one = totals(1);
    let four = totals(4);
    assert!(four > one, "N=4 mean {four} not above N=1 mean {one}");
}

#[test]
fn sigma_zero_noise_is_byte_identical_to_no_noise() {
    let cfg = small_config(41);
    let plain = run(&cfg, crw(), Perturbations::default()).unwrap();
    let with_noise = run(
        &cfg,
        crw(),
        Perturbations { noise: Some(NoiseProfile::all(0.0)), ..Default::default() },
    )
    .unwrap();
    assert_eq!(
        crate::curves::format_curves(&plain),
        crate::curves::format_curves(&with_noise)
    );
}

#[test]
fn zero_rate_population_is_byte_identical_to_none() {
    let cfg = small_config(43);
    let plain = run(&cfg, crw(), Perturbations::default()).unwrap();
    let with_population = run(
        &cfg,
        crw(),
        Perturbations {
            population: Some(PopulationProfile::new(QueueRates::default(), cfg.n_robots, cfg.n_robots)),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(
        crate::curves::format_curves(&plain),
        crate::curves::format_curves(&with_population)
    );
}

#[test]
fn pure_death_only_shrinks_population() {
    let rates = QueueRates { lambda_d: 0.002, ..Default::default() };
    let cfg = WorldConfig { n_robots: 8, ..small_config(47) };
    let perturbations = Perturbations {
        population: Some(PopulationProfile::new(rates, 8, 8)),
        ..Default::default()
    };
    let bundle = run(&cfg, crw(), perturbations).unwrap();
    let pop = bundle.population.values();
    for w in pop.windows(2) {
        assert!(w[1] <= w[0], "population grew under pure death: {pop:?}");
    }
    assert!(*pop.last().unwrap() < 8, "nobody died over 4000 steps at lambda_d=0.002");
}

#[test]
fn temporarily_removed_robots_come_back_at_the_nest_edge() {
    let rates = QueueRates { lambda_bd: 0.01, mu_bd: 0.05, ..Default::default() };
    let cfg = WorldConfig { n_robots: 6, ..small_config(53) };
    let mut world = World::new(
        &cfg,
        crw(),
        Perturbations {
            population: Some(PopulationProfile::new(rates, 6, 6)),
            ..Default::default()
        },
    )
    .unwrap();
    let mut saw_absent = false;
    let mut saw_return = false;
    let mut absent_before: Vec<usize> = Vec::new();
    for _ in 0..4000 {
        world.step();
        let absent: Vec<usize> = world
            .robots()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.standing == RobotStanding::AbsentTemporary)
            .map(|(i, _)| i)
            .collect();
        saw_absent |= !absent.is_empty();
        for &i in &absent_before {
            if world.robots()[i].standing == RobotStanding::Active {
                saw_return = true;
                assert!(world.robots()[i].memory.is_empty(), "returning robot kept memory");
            }
        }
        absent_before = absent;
    }
    assert!(saw_absent && saw_return, "dynamics never cycled a robot out and back");
}

#[test]
fn reserve_robots_join_over_time() {
    let rates = QueueRates { mu_b: 0.01, ..Default::default() };
    let cfg = WorldConfig { n_robots: 8, ..small_config(59) };
    let perturbations = Perturbations {
        population: Some(PopulationProfile::new(rates, 8, 2)),
        ..Default::default()
    };
    let bundle = run(&cfg, crw(), perturbations).unwrap();
    let pop = bundle.population.values();
    assert!(pop[0] >= 2);
    assert!(*pop.last().unwrap() > 2, "no reserves joined: {pop:?}");
    for w in pop.windows(2) {
        assert!(w[1] >= w[0], "population shrank without death events");
    }
}

#[test]
fn constant_density_scales_the_arena() {
    let cfg = WorldConfig {
        density_mode: DensityMode::Constant(0.25),
        n_robots: 16,
        ..small_config(61)
    };
    let resolved = cfg.resolved().unwrap();
    let area = resolved.arena_w * resolved.arena_h;
    assert!((area - 64.0).abs() < 1e-9, "area {area} for 16 robots at 0.25/m^2");
    // Nest scales with the arena and stays inside it.
    assert!(resolved.nest.x + resolved.nest.w <= resolved.arena_w);
    assert!(resolved.nest.y + resolved.nest.h <= resolved.arena_h);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut bad_nest = small_config(1);
    bad_nest.nest = Rect { x: 7.0, y: 7.0, w: 4.0, h: 4.0 };
    assert!(matches!(bad_nest.resolved(), Err(SimError::InvalidConfig(_))));

    let mut bad_prw = small_config(1);
    bad_prw.p_rw = 1.5;
    assert!(bad_prw.resolved().is_err());

    let mut no_blocks = small_config(1);
    no_blocks.n_blocks = 0;
    assert!(no_blocks.resolved().is_err());

    let zero_robots = WorldConfig { n_robots: 0, ..small_config(1) };
    assert!(run(&zero_robots, crw(), Perturbations::default()).is_err());
}

#[test]
fn dpo_travels_less_per_pickup_than_crw_in_static_worlds() {
    // Memory should pay off: mean search travel per pickup after a
    // two-interval burn-in, averaged over seeds.
    let search_cost = |controller: Controller| -> f64 {
        let mut costs = Vec::new();
        for seed in 0..20u64 {
            let cfg = WorldConfig {
                arena_w: 10.0,
                arena_h: 10.0,
                nest: Rect { x: 4.0, y: 4.0, w: 2.0, h: 2.0 },
                n_robots: 3,
                n_blocks: 24,
                duration: 8000,
                interval_len: 1000,
                seed: 7000 + seed,
                ..WorldConfig::default()
            };
            let mut world = World::new(&cfg, controller, Perturbations::default()).unwrap();
            for _ in 0..2000u64 {
                world.step();
            }
            let dist_burnin = world.search_distance();
            let picks_burnin = world.total_pickups();
            for _ in 2000..8000u64 {
                world.step();
            }
            let dist = world.search_distance() - dist_burnin;
            let picks = world.total_pickups() - picks_burnin;
            if picks > 0 {
                costs.push(dist / picks as f64);
            }
        }
        costs.iter().sum::<f64>() / costs.len() as f64
    };
    let crw_cost = search_cost(crw());
    let dpo_cost = search_cost(Controller::Dpo(DpoParams::default()));
    assert!(
        dpo_cost <= crw_cost,
        "DPO search per pickup {dpo_cost} exceeds CRW {crw_cost}"
    );
}

#[test]
fn custom_nest_light_redirects_homing() {
    let cfg = WorldConfig { interference_radius: 0.0, ..small_config(79) };
    let beacon = (7.5, 0.5); // far corner, away from the nest center
    let controller = Controller::Crw(CrwParams {
        turn_stddev: 0.3,
        nest_light_position: Some(beacon),
    });
    let mut world = World::new(&cfg, controller, Perturbations::default()).unwrap();
    // Hand robot 0 a block and watch which way it homes.
    world.robots[0].position = Vec2::new(1.0, 7.0);
    world.robots[0].heading = 0.0;
    world.robots[0].carried_block = Some(0);
    world.robots[0].mode = RobotMode::Carrying;
    world.blocks[0].state = BlockState::Carried;
    for robot in world.robots.iter_mut().skip(1) {
        robot.position = Vec2::new(0.2, 0.2);
    }
    let start = world.robots[0].position;
    for _ in 0..30 {
        world.step();
    }
    let end = world.robots[0].position;
    let to_beacon_before = start.dist(Vec2::new(beacon.0, beacon.1));
    let to_beacon_after = end.dist(Vec2::new(beacon.0, beacon.1));
    assert!(
        to_beacon_after < to_beacon_before - 1.0,
        "carrying robot did not steer toward the configured light: {start:?} -> {end:?}"
    );
}

#[test]
fn crw_keeps_no_controller_memory() {
    let cfg = small_config(71);
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    for _ in 0..2000 {
        world.step();
    }
    assert!(world.robots().iter().all(|r| r.memory.is_empty()));
    assert!(world.total_pickups() > 0, "run too quiet to exercise the check");
}

#[test]
fn dpo_memory_is_bounded_by_blocks_sensed() {
    let cfg = small_config(73);
    let mut world =
        World::new(&cfg, Controller::Dpo(DpoParams::default()), Perturbations::default()).unwrap();
    for _ in 0..2000 {
        world.step();
        for robot in world.robots() {
            assert!(robot.memory.tracked.len() <= cfg.n_blocks as usize);
        }
    }
}

#[test]
fn trace_records_active_robots() {
    let cfg = WorldConfig { duration: 1000, ..small_config(67) };
    let mut world = World::new(&cfg, crw(), Perturbations::default()).unwrap();
    world.record_trace();
    for _ in 0..10 {
        world.step();
    }
    let trace = world.trace().unwrap();
    assert_eq!(trace.len(), 40); // 4 robots x 10 steps
    assert!(trace.iter().all(|row| row.t < 10));
}
