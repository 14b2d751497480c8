use bpeq::control::{
    fixed_timing_step, movement_service, movement_weight, optimize_fixed_timing, select_phase,
    BpController, ControlError, ControlTiming, ControllerKind, FixedStage, FixedTimingPlan,
    LocalTopology, QueueSnapshot, SaturationParams, SignalCommand, WebsterLimits,
};
use bpeq::harness::scenarios::{grid_network, isolated_demand, isolated_network};
use bpeq::network::{IntersectionId, LinkId, Network, PhaseId};
use bpeq::simulation::{Demand, DemandProfile, EntryDemand, SimConfig, Simulation, TurningTable};
use proptest::prelude::*;
use std::collections::BTreeMap;

mod common;
use common::no_lefts;

fn isolated_topology() -> (Network, LocalTopology) {
    let net = isolated_network();
    let topo = LocalTopology::from_network(&net, IntersectionId(0));
    (net, topo)
}

fn zeros(topo: &LocalTopology) -> QueueSnapshot {
    let mut q = QueueSnapshot::new(0.0);
    for l in topo.observed_links() {
        q.queues.insert(l, 0.0);
    }
    q
}

fn phase_named(net: &Network, name: &str) -> PhaseId {
    let n = &net.intersections()[0];
    n.phases
        .iter()
        .find(|p| p.name == name)
        .unwrap_or_else(|| panic!("no phase {name}"))
        .id
}

#[test]
fn service_per_slot() {
    let (net, _) = isolated_topology();
    let sat = SaturationParams::default();
    let n = &net.intersections()[0];
    let through = net.movement(net.movement_by_name("c.n_through").unwrap());
    let left = net.movement(net.movement_by_name("c.n_left").unwrap());
    let ns = n.phase(phase_named(&net, "c:NS_through"));
    let ns_left = n.phase(phase_named(&net, "c:NS_left"));
    assert_eq!((through.lane_count, through.turn_factor), (2, 1.0));
    assert!((movement_service(through, ns, &sat, 10.0) - 10.0).abs() < 1e-12);
    assert!((movement_service(left, ns_left, &sat, 10.0) - 3.57).abs() < 1e-12);
    assert_eq!(movement_service(left, ns, &sat, 10.0), 0.0);
}

#[test]
fn weights_are_queue_differences() {
    let (net, topo) = isolated_topology();
    let m = net.movement(net.movement_by_name("c.n_through").unwrap());
    assert!(m.to_exit);
    let q = zeros(&topo).with(m.from, 7.0);
    assert_eq!(movement_weight(m, &q).unwrap(), 7.0);

    let grid = grid_network(3, 3);
    let inner = grid
        .movements()
        .iter()
        .find(|m| !m.to_exit && grid.link(m.from).upstream.is_some())
        .unwrap();
    let q = QueueSnapshot::new(0.0)
        .with(inner.from, 20.0)
        .with(inner.to, 5.0);
    assert_eq!(movement_weight(inner, &q).unwrap(), 15.0);
    let q = QueueSnapshot::new(0.0)
        .with(inner.from, 5.0)
        .with(inner.to, 20.0);
    assert_eq!(movement_weight(inner, &q).unwrap(), -15.0);
    let q = QueueSnapshot::new(0.0).with(inner.from, 5.0);
    assert!(matches!(
        movement_weight(inner, &q),
        Err(ControlError::MissingQueue { .. })
    ));
}

#[test]
fn missing_queue_names_the_link() {
    let (net, topo) = isolated_topology();
    let mut q = zeros(&topo);
    let link = net.link_by_name("e_in").unwrap();
    q.queues.remove(&link);
    let err = select_phase(&topo, &q, &SaturationParams::default(), 10.0, None).unwrap_err();
    assert!(err.to_string().contains("`e_in`"), "{err}");
}

#[test]
fn empty_phase_set_is_an_error() {
    let (_, mut topo) = isolated_topology();
    topo.intersection.phases.clear();
    let q = zeros(&topo);
    assert!(matches!(
        select_phase(&topo, &q, &SaturationParams::default(), 10.0, None),
        Err(ControlError::NoPhases(_))
    ));
}

#[test]
fn all_zero_keeps_current_phase() {
    let (_, topo) = isolated_topology();
    let q = zeros(&topo);
    let sat = SaturationParams::default();
    assert_eq!(
        select_phase(&topo, &q, &sat, 10.0, Some(PhaseId(5))).unwrap(),
        PhaseId(5)
    );
    assert_eq!(
        select_phase(&topo, &q, &sat, 10.0, None).unwrap(),
        PhaseId(0)
    );
}

#[test]
fn opposing_through_queues_pick_the_through_phase() {
    let (net, topo) = isolated_topology();
    let q = zeros(&topo)
        .with(net.link_by_name("s_in").unwrap(), 20.0)
        .with(net.link_by_name("n_in").unwrap(), 18.0);
    let sat = SaturationParams::default();
    let chosen = select_phase(&topo, &q, &sat, 10.0, Some(PhaseId(3))).unwrap();
    assert_eq!(chosen, phase_named(&net, "c:NS_through"));
    assert_eq!(
        select_phase(&topo, &q.scaled(3.0), &sat, 10.0, Some(PhaseId(3))).unwrap(),
        chosen
    );
}

#[test]
fn cold_start_picks_phase_zero_without_lost_time() {
    let (_, topo) = isolated_topology();
    let q = zeros(&topo);
    let mut bp = BpController::new(topo, SaturationParams::default(), ControlTiming::default());
    assert_eq!(
        bp.step(&q).unwrap(),
        SignalCommand::Switch {
            from: None,
            to: PhaseId(0),
            lost_time: 0.0
        }
    );
    assert_eq!(
        bp.step(&q).unwrap(),
        SignalCommand::Continue { phase: PhaseId(0) }
    );
}

#[test]
fn switching_inserts_clearance() {
    let (net, topo) = isolated_topology();
    let mut bp = BpController::new(
        topo.clone(),
        SaturationParams::default(),
        ControlTiming::default(),
    );
    bp.step(&zeros(&topo)).unwrap();
    let q = zeros(&topo).with(net.link_by_name("e_in").unwrap(), 30.0);
    match bp.step(&q).unwrap() {
        SignalCommand::Switch {
            from, lost_time, ..
        } => {
            assert_eq!(from, Some(PhaseId(0)));
            assert_eq!(lost_time, 5.0);
        }
        other => panic!("expected a switch, got {other:?}"),
    }
}

#[test]
fn controllers_only_see_incident_links() {
    let grid = grid_network(3, 3);
    for n in grid.intersections() {
        let topo = LocalTopology::from_network(&grid, n.id);
        for l in topo.observed_links() {
            let link = grid.link(l);
            assert!(link.downstream == Some(n.id) || link.upstream == Some(n.id));
        }
    }
}

#[test]
fn symmetric_demand_gets_symmetric_green() {
    let net = isolated_network();
    let demand = Demand::resolve(&isolated_demand(300.0), &net).unwrap();
    let cfg = SimConfig::uniform(ControllerKind::BpPerfect, 1);
    let mut sim = Simulation::new(&net, &demand, cfg, 11).unwrap();
    let ns_phases: Vec<PhaseId> = [
        "c:NS_through",
        "c:NS_left",
        "c:N_through_left",
        "c:S_through_left",
    ]
    .iter()
    .map(|n| phase_named(&net, n))
    .collect();
    let (mut ns, mut total) = (0u64, 0u64);
    while sim.time() < 3600.0 {
        sim.step().unwrap();
        let s = sim.signal(IntersectionId(0));
        if let Some(p) = s.phase {
            if sim.time() >= s.green_from {
                total += 1;
                ns += ns_phases.contains(&p) as u64;
            }
        }
    }
    let share = ns as f64 / total as f64;
    assert!(
        (share / 0.5 - 1.0).abs() <= 0.10,
        "north-south green share {share:.3}"
    );
}

fn plan(greens: &[(usize, f64)], lost: f64) -> FixedTimingPlan {
    FixedTimingPlan::new(
        greens
            .iter()
            .map(|&(p, g)| FixedStage {
                phase: PhaseId(p),
                green: g,
                lost,
            })
            .collect(),
        0.0,
    )
    .unwrap()
}

#[test]
fn fixed_schedule_lookup() {
    let p = plan(&[(0, 27.0), (1, 27.0)], 3.0);
    assert_eq!(p.cycle, 60.0);
    assert_eq!(fixed_timing_step(&p, 0.0).phase, PhaseId(0));
    assert_eq!(fixed_timing_step(&p, 30.0).phase, PhaseId(1));
    assert_eq!(fixed_timing_step(&p, 60.0).phase, PhaseId(0));
    assert!(!fixed_timing_step(&p, 28.0).green);
}

/// Through-only demand on the two-phase intersection, `ns` and `ew` veh/h per road.
fn two_phase_demand(ns: f64, ew: f64) -> DemandProfile {
    let entry = |link: &str, rate: f64| EntryDemand {
        link: link.into(),
        rates: vec![[0.0, rate]],
    };
    let turn = |link: &str| TurningTable {
        link: link.into(),
        ratios: BTreeMap::from([(format!("{}_through", &link[..1]), 1.0)]),
    };
    DemandProfile {
        entries: vec![
            entry("n_in", ns),
            entry("s_in", ns),
            entry("e_in", ew),
            entry("w_in", ew),
        ],
        turning: ["n_in", "e_in", "s_in", "w_in"].map(turn).to_vec(),
    }
}

fn webster(net: &Network, profile: &DemandProfile) -> FixedTimingPlan {
    let demand = Demand::resolve(profile, net).unwrap();
    let limits = WebsterLimits::default();
    optimize_fixed_timing(
        net,
        &demand,
        3600.0,
        &SaturationParams::default(),
        &limits,
        16.0,
    )
    .remove(0)
}

#[test]
fn webster_split_follows_flow_ratios() {
    let net = no_lefts();
    let even = webster(&net, &two_phase_demand(400.0, 400.0));
    assert_eq!(even.stages.len(), 2);
    assert!((even.stages[0].green - even.stages[1].green).abs() < 1e-9);

    let skewed = webster(&net, &two_phase_demand(800.0, 400.0));
    let green = |name: &str| {
        let id = phase_named(&net, name);
        skewed.stages.iter().find(|s| s.phase == id).unwrap().green
    };
    let ratio = green("c:NS_through") / green("c:EW_through");
    assert!((ratio - 2.0).abs() < 0.05, "green ratio {ratio}");

    let idle = webster(&net, &two_phase_demand(0.0, 0.0));
    assert_eq!(idle.cycle, WebsterLimits::default().min_cycle);
    assert!((idle.stages[0].green - idle.stages[1].green).abs() < 1e-9);
}

#[test]
fn webster_plans_cover_the_grid() {
    let grid = grid_network(2, 2);
    let profile = bpeq::harness::scenarios::grid_demand(&grid, 400.0);
    let demand = Demand::resolve(&profile, &grid).unwrap();
    let plans = optimize_fixed_timing(
        &grid,
        &demand,
        3600.0,
        &SaturationParams::default(),
        &WebsterLimits::default(),
        16.0,
    );
    assert_eq!(plans.len(), 4);
    let cycle = plans[0].cycle;
    for p in &plans {
        p.validate().unwrap();
        assert_eq!(p.cycle, cycle);
        assert!((40.0..=120.0).contains(&p.cycle));
    }
}

fn snapshot_strategy(links: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![0.0..80.0f64, (0u32..6).prop_map(f64::from)],
        links,
    )
}

fn snapshot(topo: &LocalTopology, values: &[f64]) -> QueueSnapshot {
    let mut q = QueueSnapshot::new(0.0);
    for (l, &v) in topo.observed_links().into_iter().zip(values) {
        q.queues.insert(l, v);
    }
    q
}

proptest! {
    #[test]
    fn argmax_is_scale_invariant(values in snapshot_strategy(16), c in 0.01..100.0f64, cur in 0usize..8) {
        let (_, topo) = isolated_topology();
        let q = snapshot(&topo, &values);
        let sat = SaturationParams::default();
        let a = select_phase(&topo, &q, &sat, 10.0, Some(PhaseId(cur))).unwrap();
        let b = select_phase(&topo, &q.scaled(c), &sat, 10.0, Some(PhaseId(cur))).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lone_positive_weight_is_served(link in 0usize..16, load in 0.5..60.0f64, cur in 0usize..8) {
        let (net, topo) = isolated_topology();
        let incoming: Vec<LinkId> = topo
            .observed_links()
            .into_iter()
            .filter(|&l| net.link(l).downstream == Some(IntersectionId(0)))
            .collect();
        let from = incoming[link % incoming.len()];
        let q = zeros(&topo).with(from, load);
        let chosen = select_phase(&topo, &q, &SaturationParams::default(), 10.0, Some(PhaseId(cur))).unwrap();
        let served = topo
            .intersection
            .phase(chosen)
            .movements
            .iter()
            .any(|&m| topo.movement(m).from == from);
        prop_assert!(served);
    }

    #[test]
    fn fixed_plan_is_periodic(
        greens in prop::collection::vec(5.0..40.0f64, 2..5),
        offset in 0.0..100.0f64,
        t in -500.0..5000.0f64,
    ) {
        let stages: Vec<_> = greens
            .iter()
            .enumerate()
            .map(|(i, &g)| FixedStage { phase: PhaseId(i), green: g, lost: 4.0 })
            .collect();
        let p = FixedTimingPlan::new(stages, offset).unwrap();
        let a = fixed_timing_step(&p, t);
        let b = fixed_timing_step(&p, t + p.cycle);
        // Allow the rounding of t + cycle to move a boundary sample by one ulp.
        let near_edge = {
            let local = (t + offset).rem_euclid(p.cycle);
            let mut edge = 0.0;
            let mut close = local < 1e-9 || p.cycle - local < 1e-9;
            for s in &p.stages {
                for d in [s.green, s.lost] {
                    edge += d;
                    close |= (local - edge).abs() < 1e-9;
                }
            }
            close
        };
        prop_assert!(near_edge || a == b);
    }
}
