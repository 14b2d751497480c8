use super::{select_phase, ControlError, ControlTiming, QueueSnapshot, SaturationParams};
use crate::estimation::{estimate_links, link_queue, EstimatorParams, ProbeHistory, ProbeReading};
use crate::network::{
    Intersection, IntersectionId, LaneId, LinkId, Movement, MovementId, Network, PhaseId,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Backpressure on true link vehicle counts.
    BpPerfect,
    /// Backpressure on queues estimated from probe reports.
    BpEq,
    /// Offline-optimized fixed timing.
    Fixed,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::BpPerfect => "bp_perfect",
            ControllerKind::BpEq => "bp_eq",
            ControllerKind::Fixed => "fixed",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bp_perfect" => Ok(ControllerKind::BpPerfect),
            "bp_eq" => Ok(ControllerKind::BpEq),
            "fixed" => Ok(ControllerKind::Fixed),
            other => Err(format!(
                "unknown controller `{other}` (expected bp_perfect, bp_eq or fixed)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum SignalCommand {
    Continue {
        phase: PhaseId,
    },
    /// Change phase; the first `lost_time` seconds of the slot are clearance.
    Switch {
        from: Option<PhaseId>,
        to: PhaseId,
        lost_time: f64,
    },
}

impl SignalCommand {
    pub fn phase(&self) -> PhaseId {
        match *self {
            SignalCommand::Continue { phase } => phase,
            SignalCommand::Switch { to, .. } => to,
        }
    }
}

/// What one intersection's controller knows: its own phases and movements.
#[derive(Clone, Debug)]
pub struct LocalTopology {
    pub intersection: Intersection,
    movements: BTreeMap<MovementId, Movement>,
    link_names: BTreeMap<LinkId, String>,
}

impl LocalTopology {
    pub fn from_network(network: &Network, id: IntersectionId) -> Self {
        let intersection = network.intersection(id).clone();
        let movements = intersection
            .movements
            .iter()
            .map(|&m| (m, network.movement(m).clone()))
            .collect();
        let link_names = intersection
            .incident_links()
            .map(|l| (l, network.link(l).name.clone()))
            .collect();
        LocalTopology {
            intersection,
            movements,
            link_names,
        }
    }

    pub fn movement(&self, id: MovementId) -> &Movement {
        &self.movements[&id]
    }

    /// Incident links whose queues enter the pressure computation.
    pub fn observed_links(&self) -> Vec<LinkId> {
        self.link_names.keys().copied().collect()
    }

    pub(super) fn name_error(&self, e: ControlError) -> ControlError {
        match e {
            ControlError::MissingQueue { link, .. } => ControlError::MissingQueue {
                link,
                name: self
                    .link_names
                    .get(&link)
                    .cloned()
                    .unwrap_or_else(|| format!("link {link}")),
            },
            other => other,
        }
    }
}

/// Slot-by-slot backpressure controller for one intersection.
#[derive(Clone, Debug)]
pub struct BpController {
    topology: LocalTopology,
    sat: SaturationParams,
    timing: ControlTiming,
    current: Option<PhaseId>,
}

impl BpController {
    pub fn new(topology: LocalTopology, sat: SaturationParams, timing: ControlTiming) -> Self {
        BpController {
            topology,
            sat,
            timing,
            current: None,
        }
    }

    pub fn topology(&self) -> &LocalTopology {
        &self.topology
    }

    pub fn current(&self) -> Option<PhaseId> {
        self.current
    }

    /// Picks the phase for the coming slot from the local queue snapshot.
    pub fn step(&mut self, queues: &QueueSnapshot) -> Result<SignalCommand, ControlError> {
        let next = select_phase(
            &self.topology,
            queues,
            &self.sat,
            self.timing.slot,
            self.current,
        )?;
        let cmd = match self.current {
            Some(c) if c == next => SignalCommand::Continue { phase: next },
            prev => SignalCommand::Switch {
                from: prev,
                to: next,
                lost_time: if prev.is_some() {
                    self.timing.lost_time()
                } else {
                    0.0
                },
            },
        };
        self.current = Some(next);
        Ok(cmd)
    }

    /// The decision perfect information would have produced, without changing state.
    pub fn shadow(&self, queues: &QueueSnapshot) -> Result<PhaseId, ControlError> {
        select_phase(
            &self.topology,
            queues,
            &self.sat,
            self.timing.slot,
            self.current,
        )
    }
}

/// Probe store and queue estimator owned by one intersection.
#[derive(Clone, Debug)]
pub struct EstimatedQueues {
    history: ProbeHistory,
    params: EstimatorParams,
    links: Vec<LinkId>,
    lanes: BTreeSet<LaneId>,
    last: Option<QueueSnapshot>,
    stale_slots: u64,
}

impl EstimatedQueues {
    /// Estimates the given links (exit links are skipped: their queue is zero by convention).
    pub fn new(network: &Network, links: &[LinkId], params: EstimatorParams) -> Self {
        let links: Vec<LinkId> = links
            .iter()
            .copied()
            .filter(|&l| !network.link(l).is_exit)
            .collect();
        let lanes = links
            .iter()
            .flat_map(|&l| network.link(l).lanes.iter().copied())
            .collect();
        EstimatedQueues {
            history: ProbeHistory::new(params.horizon),
            params,
            links,
            lanes,
            last: None,
            stale_slots: 0,
        }
    }

    /// Keeps the readings on observed lanes from one reporting round.
    pub fn ingest(&mut self, t: f64, batch: &[ProbeReading]) {
        let mine: Vec<ProbeReading> = batch
            .iter()
            .filter(|r| self.lanes.contains(&r.lane))
            .copied()
            .collect();
        self.history
            .ingest(t, &mine)
            .expect("simulator emits time-ordered, valid probe batches");
    }

    pub fn history(&self) -> &ProbeHistory {
        &self.history
    }

    pub fn stale_slots(&self) -> u64 {
        self.stale_slots
    }

    /// Queue snapshot at `t_now`. When no batch arrived within the last slot
    /// the previous snapshot is reused and a warning is logged.
    pub fn snapshot(&mut self, network: &Network, t_now: f64, slot: f64) -> QueueSnapshot {
        let fresh = self
            .history
            .last_batch()
            .is_some_and(|b| t_now - b <= slot + 1e-9);
        if !fresh {
            if let Some(last) = &self.last {
                log::warn!(
                    "probe data older than one slot at t={t_now}; reusing field from t={}",
                    last.time
                );
                self.stale_slots += 1;
                return last.clone();
            }
        }
        let field = estimate_links(
            network,
            self.links.iter().copied(),
            &self.history,
            t_now,
            &self.params,
        );
        let mut snap = QueueSnapshot::new(t_now);
        for &l in &self.links {
            let q = link_queue(network, l, &field).expect("field covers estimated links");
            snap.queues.insert(l, q);
        }
        self.last = Some(snap.clone());
        snap
    }
}
