use super::events::{Event, EventKind};
use super::metrics::{stopped_queue_length, MetricsWindow, WindowAccumulator};
use super::{ticks_in, Demand, SimConfig, SimError};
use crate::control::{
    fixed_timing_step, optimize_fixed_timing, BpController, ControllerKind, EstimatedQueues,
    FixedTimingPlan, LocalTopology, QueueSnapshot, SignalCommand, WebsterLimits,
};
use crate::estimation::ProbeReading;
use crate::network::{IntersectionId, LaneId, LinkId, MovementId, Network, PhaseId, TurnKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Longest car-following lag, in ticks, that a vehicle remembers.
const MAX_LAG: usize = 8;
/// Horizon over which demand is averaged when no fixed plan is supplied.
const DEFAULT_PLAN_HORIZON: f64 = 3600.0;
const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub link: LinkId,
    pub lane: LaneId,
    /// Meters from the upstream end of the current link.
    pub x: f64,
    /// m/s over the last tick.
    pub speed: f64,
    pub connected: bool,
    /// Time the vehicle arrived at its entry, whether or not it could enter.
    pub spawn_time: f64,
    /// Trip time at free-flow speed along the whole route.
    pub free_flow_time: f64,
    route: Vec<MovementId>,
    leg: usize,
    /// `past[j]`: position `j` ticks ago, in current-link coordinates.
    past: [f64; MAX_LAG],
}

impl Vehicle {
    pub fn route(&self) -> &[MovementId] {
        &self.route
    }

    /// Movement to take at the end of the current link; `None` on an exit link.
    pub fn next_movement(&self) -> Option<MovementId> {
        self.route.get(self.leg).copied()
    }

    /// A vehicle with an empty route, for building lane snapshots by hand.
    pub fn parked(link: LinkId, lane: LaneId, x: f64, speed: f64) -> Vehicle {
        Vehicle {
            id: 0,
            link,
            lane,
            x,
            speed,
            connected: false,
            spawn_time: 0.0,
            free_flow_time: 0.0,
            route: Vec::new(),
            leg: 0,
            past: [x; MAX_LAG],
        }
    }

    fn push_position(&mut self, x: f64) {
        self.past.copy_within(0..MAX_LAG - 1, 1);
        self.past[0] = x;
        self.x = x;
    }
}

/// Displayed signal at one intersection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub phase: Option<PhaseId>,
    /// Start of green for `phase`; earlier times are clearance.
    pub green_from: f64,
}

impl SignalState {
    pub fn is_green(&self, network: &Network, n: IntersectionId, m: MovementId, t: f64) -> bool {
        self.phase.is_some_and(|p| {
            t >= self.green_from - EPS && network.intersection(n).phase(p).contains(m)
        })
    }
}

/// How often an estimated-queue controller chose what perfect queues would have.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotAgreement {
    pub intersection: String,
    pub slots: u64,
    pub agreed: u64,
}

impl SlotAgreement {
    pub fn rate(&self) -> f64 {
        if self.slots == 0 {
            1.0
        } else {
            self.agreed as f64 / self.slots as f64
        }
    }
}

#[derive(Clone, Debug)]
enum Control {
    Bp {
        controller: BpController,
        estimator: Option<EstimatedQueues>,
    },
    Fixed(FixedTimingPlan),
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    lane: usize,
    x_old: f64,
    overshoot: f64,
}

struct Ticks {
    report: u64,
    slot: u64,
    window: u64,
    sample: u64,
}

/// Simulation state advanced tick by tick.
pub struct Simulation<'a> {
    network: &'a Network,
    demand: &'a Demand,
    cfg: SimConfig,
    ticks: Ticks,
    lag: usize,
    tick: u64,

    lanes: Vec<VecDeque<Vehicle>>,
    link_count: Vec<u32>,
    link_capacity: Vec<u32>,
    buffers: Vec<VecDeque<Vehicle>>,
    last_discharge: Vec<f64>,

    signals: Vec<SignalState>,
    controls: Vec<Control>,
    served: Vec<u32>,
    budget: Vec<u32>,
    headway: Vec<f64>,

    demand_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    next_id: u64,
    spawned: u64,
    exited: u64,

    acc: WindowAccumulator,
    window_start: f64,
    windows: Vec<MetricsWindow>,
    samples: Vec<(f64, u64)>,
    agreement: Vec<SlotAgreement>,
    events: Vec<Event>,
    probes: Vec<ProbeReading>,
}

impl<'a> Simulation<'a> {
    /// Validates the configuration, then applies the time-zero control decisions.
    pub fn new(
        network: &'a Network,
        demand: &'a Demand,
        mut cfg: SimConfig,
        seed: u64,
    ) -> Result<Self, SimError> {
        let ticks = validate(network, &cfg)?;
        let dyn_ = cfg.dynamics;
        let lag = ((dyn_.reaction_time() / cfg.sim.step).round() as usize).clamp(1, MAX_LAG - 1);

        if cfg.fixed_plans.is_none() && cfg.controllers.contains(&ControllerKind::Fixed) {
            cfg.fixed_plans = Some(optimize_fixed_timing(
                network,
                demand,
                DEFAULT_PLAN_HORIZON,
                &cfg.saturation,
                &WebsterLimits::default(),
                dyn_.free_flow_speed,
            ));
        }

        let mut controls = Vec::new();
        let mut agreement = Vec::new();
        for (n, &kind) in network.intersections().iter().zip(&cfg.controllers) {
            let control = match kind {
                ControllerKind::Fixed => {
                    let plan =
                        cfg.fixed_plans.as_ref().expect("plans computed above")[n.id.0].clone();
                    if !plan.stages.is_empty() {
                        plan.validate()?;
                    }
                    Control::Fixed(plan)
                }
                ControllerKind::BpPerfect | ControllerKind::BpEq => {
                    let topology = LocalTopology::from_network(network, n.id);
                    let estimator = (kind == ControllerKind::BpEq).then(|| {
                        EstimatedQueues::new(network, &topology.observed_links(), cfg.estimator)
                    });
                    Control::Bp {
                        controller: BpController::new(topology, cfg.saturation, cfg.timing),
                        estimator,
                    }
                }
            };
            controls.push(control);
            agreement.push(SlotAgreement {
                intersection: n.name.clone(),
                ..Default::default()
            });
        }

        let link_capacity = network
            .links()
            .iter()
            .map(|l| (dyn_.jam_density * network.lane_meters(l.id) + EPS).floor() as u32)
            .collect();
        let budget = network
            .movements()
            .iter()
            .map(|m| {
                let s = cfg.saturation.saturation_flow
                    * m.lane_count as f64
                    * m.turn_factor
                    * cfg.timing.slot
                    / 3600.0;
                (s - EPS).ceil().max(0.0) as u32
            })
            .collect();
        let headway = network
            .movements()
            .iter()
            .map(|m| 3600.0 / (cfg.saturation.saturation_flow * m.turn_factor))
            .collect();

        let mut sim = Simulation {
            network,
            demand,
            ticks,
            lag,
            tick: 0,
            lanes: vec![VecDeque::new(); network.lanes().len()],
            link_count: vec![0; network.links().len()],
            link_capacity,
            buffers: vec![VecDeque::new(); network.links().len()],
            last_discharge: vec![f64::NEG_INFINITY; network.lanes().len()],
            signals: vec![
                SignalState {
                    phase: None,
                    green_from: 0.0
                };
                network.intersections().len()
            ],
            controls,
            served: vec![0; network.movements().len()],
            budget,
            headway,
            demand_rng: ChaCha8Rng::seed_from_u64(seed),
            noise_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15),
            next_id: 0,
            spawned: 0,
            exited: 0,
            acc: WindowAccumulator::default(),
            window_start: 0.0,
            windows: Vec::new(),
            samples: Vec::new(),
            agreement,
            events: Vec::new(),
            probes: Vec::new(),
            cfg,
        };
        sim.boundary()?;
        Ok(sim)
    }

    pub fn network(&self) -> &Network {
        self.network
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.sim.step
    }

    /// Vehicles on a lane, nearest the stop line first.
    pub fn lane_vehicles(&self, lane: LaneId) -> &VecDeque<Vehicle> {
        &self.lanes[lane.0]
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.lanes.iter().flatten()
    }

    pub fn link_count(&self, link: LinkId) -> u32 {
        self.link_count[link.0]
    }

    pub fn link_capacity(&self, link: LinkId) -> u32 {
        self.link_capacity[link.0]
    }

    /// Vehicles waiting to enter at an entry link.
    pub fn buffered(&self, link: LinkId) -> usize {
        self.buffers[link.0].len()
    }

    pub fn signal(&self, n: IntersectionId) -> SignalState {
        self.signals[n.0]
    }

    /// Fixed plan in force at an intersection, if it runs one.
    pub fn fixed_plan(&self, n: IntersectionId) -> Option<&FixedTimingPlan> {
        match &self.controls[n.0] {
            Control::Fixed(p) => Some(p),
            Control::Bp { .. } => None,
        }
    }

    pub fn spawned(&self) -> u64 {
        self.spawned
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    /// Vehicles in the network plus those waiting at entries.
    pub fn in_system(&self) -> u64 {
        self.spawned - self.exited
    }

    pub fn windows(&self) -> &[MetricsWindow] {
        &self.windows
    }

    pub fn samples(&self) -> &[(f64, u64)] {
        &self.samples
    }

    pub fn agreement(&self) -> &[SlotAgreement] {
        &self.agreement
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn probes(&self) -> &[ProbeReading] {
        &self.probes
    }

    pub(super) fn take_outputs(
        self,
    ) -> (
        Vec<MetricsWindow>,
        Vec<(f64, u64)>,
        Vec<SlotAgreement>,
        Vec<Event>,
        Vec<ProbeReading>,
        u64,
    ) {
        let stale = self
            .controls
            .iter()
            .map(|c| match c {
                Control::Bp {
                    estimator: Some(e), ..
                } => e.stale_slots(),
                _ => 0,
            })
            .sum();
        (
            self.windows,
            self.samples,
            self.agreement,
            self.events,
            self.probes,
            stale,
        )
    }

    /// Estimated-queue store of an intersection running BP-EQ.
    pub fn estimator(&self, n: IntersectionId) -> Option<&EstimatedQueues> {
        match &self.controls[n.0] {
            Control::Bp { estimator, .. } => estimator.as_ref(),
            Control::Fixed(_) => None,
        }
    }

    /// Advances one tick, then runs whatever probe, control and metrics work
    /// falls on the new time.
    pub fn step(&mut self) -> Result<(), SimError> {
        let t = self.time();
        let dt = self.cfg.sim.step;
        self.spawn(t, dt);
        self.update_fixed_signals(t);
        let mut candidates = Vec::new();
        for lane in 0..self.lanes.len() {
            self.advance_lane(lane, t, &mut candidates);
        }
        for c in candidates {
            self.resolve_crossing(c, t);
        }
        self.admit(t + dt);
        self.tick += 1;
        self.record_queues();
        if self.cfg.sim.check_invariants {
            self.check_invariants()?;
        }
        self.boundary()
    }

    /// Steps until the clock reaches `t_end`.
    pub fn run_until(&mut self, t_end: f64) -> Result<(), SimError> {
        while self.time() < t_end - EPS {
            self.step()?;
        }
        Ok(())
    }

    fn now_event(&mut self, kind: EventKind) {
        if self.cfg.sim.record_events {
            self.events.push(Event {
                tick: self.tick,
                t: self.time(),
                kind,
            });
        }
    }

    fn spawn(&mut self, t: f64, dt: f64) {
        let arrivals = self.demand.arrivals(t, dt, &mut self.demand_rng);
        let vf = self.cfg.dynamics.free_flow_speed;
        for (link, n) in arrivals {
            for _ in 0..n {
                let route = self
                    .demand
                    .sample_route(self.network, link, &mut self.demand_rng);
                let u: f64 = self.demand_rng.random();
                let free_flow_time = self.network.link(link).length / vf
                    + route
                        .iter()
                        .map(|&m| self.network.link(self.network.movement(m).to).length / vf)
                        .sum::<f64>();
                let id = self.next_id;
                self.next_id += 1;
                let v = Vehicle {
                    id,
                    link,
                    lane: LaneId(usize::MAX),
                    x: 0.0,
                    speed: vf,
                    connected: u < self.cfg.sim.penetration,
                    spawn_time: t + dt,
                    free_flow_time,
                    route,
                    leg: 0,
                    past: [0.0; MAX_LAG],
                };
                self.spawned += 1;
                if self.cfg.sim.record_events {
                    self.events.push(Event {
                        tick: self.tick + 1,
                        t: t + dt,
                        kind: EventKind::Spawn {
                            vehicle: id,
                            link: self.network.link(link).name.clone(),
                            connected: v.connected,
                        },
                    });
                }
                self.buffers[link.0].push_back(v);
            }
        }
    }

    fn update_fixed_signals(&mut self, t: f64) {
        for (i, c) in self.controls.iter().enumerate() {
            if let Control::Fixed(plan) = c {
                self.signals[i] = if plan.stages.is_empty() {
                    SignalState {
                        phase: None,
                        green_from: f64::INFINITY,
                    }
                } else {
                    let st = fixed_timing_step(plan, t);
                    SignalState {
                        phase: Some(st.phase),
                        green_from: if st.green {
                            f64::NEG_INFINITY
                        } else {
                            f64::INFINITY
                        },
                    }
                };
            }
        }
    }

    /// Car-following update, back to front so each follower sees its leader's
    /// positions from before this tick. A front vehicle that would pass the
    /// stop line is left in place and reported as a crossing candidate; on an
    /// exit link it leaves the network instead.
    fn advance_lane(&mut self, lane: usize, t: f64, candidates: &mut Vec<Candidate>) {
        let dt = self.cfg.sim.step;
        let vf = self.cfg.dynamics.free_flow_speed;
        let delta = self.cfg.dynamics.jam_spacing();
        let link = self.network.link(self.network.lanes()[lane].link);
        let length = link.length;
        let lag = self.lag;
        let vehicles = &mut self.lanes[lane];
        for i in (0..vehicles.len()).rev() {
            let x = vehicles[i].x;
            let free = x + vf * dt;
            if i > 0 {
                let bound = vehicles[i - 1].past[lag - 1] - delta;
                let x_new = x.max(free.min(bound));
                let v = &mut vehicles[i];
                v.speed = (x_new - x) / dt;
                v.push_position(x_new);
                continue;
            }
            if free < length - EPS || (free <= length && !link.is_exit) {
                let v = &mut vehicles[0];
                v.speed = vf;
                v.push_position(free);
            } else if link.is_exit {
                let v = vehicles.pop_front().expect("front exists");
                let exit_time = t + (length - x) / vf;
                let delay = exit_time - v.spawn_time - v.free_flow_time;
                self.link_count[link.id.0] -= 1;
                self.exited += 1;
                self.acc.record_exit(delay);
                if self.cfg.sim.record_events {
                    self.events.push(Event {
                        tick: self.tick + 1,
                        t: t + dt,
                        kind: EventKind::Exit {
                            vehicle: v.id,
                            delay,
                        },
                    });
                }
                return;
            } else {
                candidates.push(Candidate {
                    lane,
                    x_old: x,
                    overshoot: free - length,
                });
            }
        }
    }

    /// Lane of `link` with the most free space at its upstream end among those
    /// serving `movement` (any lane when `movement` is `None`), with the
    /// position of that lane's last vehicle.
    fn choose_lane(&self, link: LinkId, movement: Option<MovementId>) -> Option<(LaneId, f64)> {
        self.network
            .link(link)
            .lanes
            .iter()
            .filter(|&&l| movement.is_none_or(|m| self.network.lane(l).movements.contains(&m)))
            .map(|&l| (l, self.lanes[l.0].back().map_or(f64::INFINITY, |v| v.x)))
            .fold(None, |best: Option<(LaneId, f64)>, (l, room)| match best {
                Some((_, r)) if r >= room => best,
                _ => Some((l, room)),
            })
    }

    fn resolve_crossing(&mut self, c: Candidate, t: f64) {
        let dt = self.cfg.sim.step;
        let vf = self.cfg.dynamics.free_flow_speed;
        let delta = self.cfg.dynamics.jam_spacing();
        let t1 = t + dt;
        let lane = &self.network.lanes()[c.lane];
        let length = self.network.link(lane.link).length;
        let front = &self.lanes[c.lane][0];
        let m = front
            .next_movement()
            .expect("vehicles on non-exit links have a next movement");
        let mv = self.network.movement(m);
        let next_leg = front.route.get(front.leg + 1).copied();

        let green = mv.turn == TurnKind::Right
            || self.signals[mv.intersection.0].is_green(self.network, mv.intersection, m, t);
        let spaced = t1 - self.last_discharge[c.lane] >= self.headway[m.0] - EPS;
        let budget = self.served[m.0] < self.budget[m.0];
        let room = self.link_count[mv.to.0] < self.link_capacity[mv.to.0];
        let target = self
            .choose_lane(mv.to, next_leg)
            .filter(|&(_, last_x)| last_x >= delta - EPS);

        let (true, true, true, true, Some((to_lane, last_x))) =
            (green, spaced, budget, room, target)
        else {
            let v = &mut self.lanes[c.lane][0];
            v.speed = (length - c.x_old) / dt;
            v.push_position(length);
            return;
        };

        let mut v = self.lanes[c.lane]
            .pop_front()
            .expect("candidate is the front");
        let x_new = c.overshoot.min(last_x - delta).max(0.0);
        for j in (1..MAX_LAG).rev() {
            v.past[j] = v.past[j - 1] - length;
        }
        v.past[0] = x_new;
        v.x = x_new;
        v.speed = ((length - c.x_old + x_new) / dt).min(vf);
        v.link = mv.to;
        v.lane = to_lane;
        v.leg += 1;
        let id = v.id;
        self.lanes[to_lane.0].push_back(v);
        self.link_count[lane.link.0] -= 1;
        self.link_count[mv.to.0] += 1;
        self.served[m.0] += 1;
        self.last_discharge[c.lane] = t1;
        if self.cfg.sim.record_events {
            self.events.push(Event {
                tick: self.tick + 1,
                t: t1,
                kind: EventKind::Cross {
                    vehicle: id,
                    movement: mv.name.clone(),
                },
            });
        }
    }

    fn admit(&mut self, t1: f64) {
        let delta = self.cfg.dynamics.jam_spacing();
        let vf = self.cfg.dynamics.free_flow_speed;
        let dt = self.cfg.sim.step;
        for link in 0..self.buffers.len() {
            while let Some(front) = self.buffers[link].front() {
                if self.link_count[link] >= self.link_capacity[link] {
                    break;
                }
                let first = front.route.first().copied();
                let Some((lane, _)) = self
                    .choose_lane(LinkId(link), first)
                    .filter(|&(_, last_x)| last_x >= delta - EPS)
                else {
                    break;
                };
                let mut v = self.buffers[link].pop_front().expect("front exists");
                let x = 0.0;
                for (j, p) in v.past.iter_mut().enumerate() {
                    *p = x - j as f64 * vf * dt;
                }
                v.x = x;
                v.speed = vf;
                v.lane = lane;
                let id = v.id;
                self.lanes[lane.0].push_back(v);
                self.link_count[link] += 1;
                if self.cfg.sim.record_events {
                    self.events.push(Event {
                        tick: self.tick + 1,
                        t: t1,
                        kind: EventKind::Enter {
                            vehicle: id,
                            lane: self.network.lane(lane).name.clone(),
                        },
                    });
                }
            }
        }
    }

    fn record_queues(&mut self) {
        let delta = self.cfg.dynamics.jam_spacing();
        for lane in self.network.lanes() {
            let link = self.network.link(lane.link);
            if link.is_exit {
                continue;
            }
            let q = stopped_queue_length(
                &self.lanes[lane.id.0],
                link.length,
                delta,
                self.cfg.sim.stop_speed,
            );
            self.acc.record_queue(q);
        }
    }

    /// Probe reporting, control decisions, samples and window flushes that
    /// fall on the current tick.
    fn boundary(&mut self) -> Result<(), SimError> {
        let tick = self.tick;
        if tick.is_multiple_of(self.ticks.report) {
            self.report_probes();
        }
        if tick.is_multiple_of(self.ticks.slot) {
            self.served.iter_mut().for_each(|s| *s = 0);
            self.control_step()?;
        }
        if tick.is_multiple_of(self.ticks.sample) {
            self.samples.push((self.time(), self.in_system()));
        }
        if tick > 0 && tick.is_multiple_of(self.ticks.window) {
            let end = self.time();
            let w = self.acc.flush(self.window_start, end, self.in_system());
            self.windows.push(w);
            self.window_start = end;
        }
        Ok(())
    }

    fn report_probes(&mut self) {
        let now = self.time();
        let sd = self.cfg.sim.probe_noise;
        let noise = (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite sd"));
        let vf = self.cfg.dynamics.free_flow_speed;
        let mut batch = Vec::new();
        for (i, lane) in self.lanes.iter().enumerate() {
            let length = self.network.link(self.network.lanes()[i].link).length;
            for v in lane.iter().filter(|v| v.connected) {
                let (mut x, mut speed) = (v.x, v.speed);
                if let Some(n) = &noise {
                    x = (x + n.sample(&mut self.noise_rng)).clamp(0.0, length);
                    speed = (speed + n.sample(&mut self.noise_rng)).clamp(0.0, vf);
                }
                batch.push(ProbeReading {
                    vehicle: v.id,
                    lane: LaneId(i),
                    x,
                    t: now,
                    speed,
                });
            }
        }
        for c in &mut self.controls {
            if let Control::Bp {
                estimator: Some(e), ..
            } = c
            {
                e.ingest(now, &batch);
            }
        }
        if self.cfg.sim.record_events {
            for r in &batch {
                self.events.push(Event {
                    tick: self.tick,
                    t: now,
                    kind: EventKind::Probe {
                        vehicle: r.vehicle,
                        lane: self.network.lane(r.lane).name.clone(),
                        x: r.x,
                        v: r.speed,
                    },
                });
            }
        }
        if self.cfg.sim.record_probes {
            self.probes.extend(batch);
        }
    }

    /// True vehicle counts on the links an intersection observes.
    fn perfect_snapshot(&self, topology: &LocalTopology) -> QueueSnapshot {
        let mut snap = QueueSnapshot::new(self.time());
        for l in topology.observed_links() {
            snap.queues.insert(l, self.link_count[l.0] as f64);
        }
        snap
    }

    fn control_step(&mut self) -> Result<(), SimError> {
        let now = self.time();
        for i in 0..self.controls.len() {
            let Control::Bp { controller, .. } = &self.controls[i] else {
                continue;
            };
            let perfect = self.perfect_snapshot(controller.topology());
            let Control::Bp {
                controller,
                estimator,
            } = &mut self.controls[i]
            else {
                unreachable!()
            };
            let cmd = match estimator {
                Some(est) => {
                    let snap = est.snapshot(self.network, now, self.cfg.timing.slot);
                    let shadow = controller.shadow(&perfect)?;
                    let cmd = controller.step(&snap)?;
                    let a = &mut self.agreement[i];
                    a.slots += 1;
                    a.agreed += u64::from(shadow == cmd.phase());
                    cmd
                }
                None => controller.step(&perfect)?,
            };
            if let SignalCommand::Switch {
                from,
                to,
                lost_time,
            } = cmd
            {
                self.signals[i] = SignalState {
                    phase: Some(to),
                    green_from: now + lost_time,
                };
                if self.cfg.sim.record_events {
                    let n = &self.network.intersections()[i];
                    let kind = EventKind::PhaseSwitch {
                        intersection: n.name.clone(),
                        from: from.map(|p| n.phase(p).name.clone()),
                        to: n.phase(to).name.clone(),
                        lost_time,
                    };
                    self.now_event(kind);
                }
            }
        }
        Ok(())
    }

    fn check_invariants(&self) -> Result<(), SimError> {
        let fail = |message: String| {
            Err(SimError::Invariant {
                time: self.time(),
                message,
            })
        };
        let delta = self.cfg.dynamics.jam_spacing();
        let vf = self.cfg.dynamics.free_flow_speed;
        let on_links: u64 = self.link_count.iter().map(|&c| c as u64).sum();
        let buffered: u64 = self.buffers.iter().map(|b| b.len() as u64).sum();
        let in_lanes: u64 = self.lanes.iter().map(|l| l.len() as u64).sum();
        if on_links != in_lanes {
            return fail(format!(
                "link counts {on_links} != lane contents {in_lanes}"
            ));
        }
        if self.spawned != self.exited + on_links + buffered {
            return fail(format!(
                "spawned {} != exited {} + in network {on_links} + buffered {buffered}",
                self.spawned, self.exited
            ));
        }
        for (l, &c) in self.link_count.iter().enumerate() {
            if c > self.link_capacity[l] {
                return fail(format!(
                    "link `{}` holds {c} vehicles, capacity {}",
                    self.network.links()[l].name,
                    self.link_capacity[l]
                ));
            }
        }
        for (m, &s) in self.served.iter().enumerate() {
            if s > self.budget[m] {
                return fail(format!(
                    "movement `{}` served {s} in one slot, cap {}",
                    self.network.movements()[m].name,
                    self.budget[m]
                ));
            }
        }
        for (i, lane) in self.lanes.iter().enumerate() {
            let length = self.network.link(self.network.lanes()[i].link).length;
            for v in lane {
                if !(v.x >= -EPS && v.x <= length + EPS) {
                    return fail(format!(
                        "vehicle {} at x={} outside [0, {length}]",
                        v.id, v.x
                    ));
                }
                if !(v.speed >= -EPS && v.speed <= vf + 1e-6) {
                    return fail(format!(
                        "vehicle {} speed {} outside [0, v_f]",
                        v.id, v.speed
                    ));
                }
            }
            for w in lane.iter().zip(lane.iter().skip(1)) {
                let (leader, follower) = w;
                if follower.x > leader.x - delta + 1e-6 {
                    return fail(format!(
                        "vehicle {} at {} closer than {delta} m behind {} at {}",
                        follower.id, follower.x, leader.id, leader.x
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate(network: &Network, cfg: &SimConfig) -> Result<Ticks, SimError> {
    let bad = |m: String| Err(SimError::Config(m));
    let s = &cfg.sim;
    if !(s.step > 0.0 && s.step.is_finite()) {
        return bad(format!("step {} must be positive", s.step));
    }
    let whole = |name: &str, span: f64| -> Result<u64, SimError> {
        match ticks_in(span, s.step) {
            Some(n) if n > 0 => Ok(n),
            _ => Err(SimError::Config(format!(
                "{name} {span} s is not a positive multiple of the {} s step",
                s.step
            ))),
        }
    };
    let ticks = Ticks {
        report: whole("reporting interval", s.reporting_interval)?,
        slot: whole("control slot", cfg.timing.slot)?,
        window: whole("metrics window", s.metrics_window)?,
        sample: whole("sample interval", s.sample_interval)?,
    };
    if !(0.0..=1.0).contains(&s.penetration) {
        return bad(format!("penetration {} outside [0, 1]", s.penetration));
    }
    if !(s.probe_noise >= 0.0 && s.probe_noise.is_finite()) {
        return bad(format!("probe noise {} must be >= 0", s.probe_noise));
    }
    let d = &cfg.dynamics;
    if !(d.free_flow_speed > 0.0 && d.shockwave_speed > 0.0 && d.jam_density > 0.0) {
        return bad("vehicle dynamics must be positive".into());
    }
    cfg.timing.validate()?;
    cfg.estimator
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    if !(cfg.saturation.saturation_flow > 0.0) {
        return bad("saturation flow must be positive".into());
    }
    if cfg.controllers.len() != network.intersections().len() {
        return bad(format!(
            "{} controllers for {} intersections",
            cfg.controllers.len(),
            network.intersections().len()
        ));
    }
    if let Some(plans) = &cfg.fixed_plans {
        if plans.len() != network.intersections().len() {
            return bad(format!(
                "{} fixed plans for {} intersections",
                plans.len(),
                network.intersections().len()
            ));
        }
        for (n, p) in network.intersections().iter().zip(plans) {
            if p.stages.iter().any(|s| s.phase.0 >= n.phases.len()) {
                return bad(format!(
                    "fixed plan for `{}` names an unknown phase",
                    n.name
                ));
            }
        }
    }
    Ok(ticks)
}
