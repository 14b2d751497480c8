//! Movement weights, saturation service and max-pressure phase selection.

use super::{ControlError, LocalTopology, SaturationParams};
use crate::network::{LinkId, Movement, Phase, PhaseId};
use std::collections::BTreeMap;

/// Queue length (vehicles) per link, observed at one instant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueueSnapshot {
    pub time: f64,
    pub queues: BTreeMap<LinkId, f64>,
}

impl QueueSnapshot {
    pub fn new(time: f64) -> Self {
        QueueSnapshot {
            time,
            queues: BTreeMap::new(),
        }
    }

    pub fn with(mut self, link: LinkId, queue: f64) -> Self {
        self.queues.insert(link, queue);
        self
    }

    pub fn get(&self, link: LinkId) -> Option<f64> {
        self.queues.get(&link).copied()
    }

    pub fn scaled(&self, c: f64) -> Self {
        QueueSnapshot {
            time: self.time,
            queues: self.queues.iter().map(|(&l, &q)| (l, q * c)).collect(),
        }
    }
}

/// Vehicles the movement can discharge in one slot of `slot` seconds under `phase`.
pub fn movement_service(
    movement: &Movement,
    phase: &Phase,
    sat: &SaturationParams,
    slot: f64,
) -> f64 {
    if !phase.contains(movement.id) {
        return 0.0;
    }
    sat.saturation_flow * movement.lane_count as f64 * movement.turn_factor * slot / 3600.0
}

/// Upstream minus downstream queue. Exit links are free sinks with zero queue.
pub fn movement_weight(movement: &Movement, queues: &QueueSnapshot) -> Result<f64, ControlError> {
    let missing = |link: LinkId| ControlError::MissingQueue {
        link,
        name: format!("link {link}"),
    };
    let up = queues
        .get(movement.from)
        .ok_or_else(|| missing(movement.from))?;
    let down = if movement.to_exit {
        0.0
    } else {
        queues
            .get(movement.to)
            .ok_or_else(|| missing(movement.to))?
    };
    Ok(up - down)
}

/// Pressure of every phase, in phase-table order.
pub fn phase_pressures(
    topology: &LocalTopology,
    queues: &QueueSnapshot,
    sat: &SaturationParams,
    slot: f64,
) -> Result<Vec<f64>, ControlError> {
    topology
        .intersection
        .phases
        .iter()
        .map(|phase| {
            phase.movements.iter().try_fold(0.0, |acc, &m| {
                let mv = topology.movement(m);
                let w = movement_weight(mv, queues).map_err(|e| topology.name_error(e))?;
                Ok(acc + w * movement_service(mv, phase, sat, slot))
            })
        })
        .collect()
}

/// Max-pressure phase. Ties keep the current phase when it is among the
/// maximizers, otherwise the lowest phase id wins.
pub fn select_phase(
    topology: &LocalTopology,
    queues: &QueueSnapshot,
    sat: &SaturationParams,
    slot: f64,
    current: Option<PhaseId>,
) -> Result<PhaseId, ControlError> {
    if topology.intersection.phases.is_empty() {
        return Err(ControlError::NoPhases(topology.intersection.name.clone()));
    }
    let pressures = phase_pressures(topology, queues, sat, slot)?;
    let best = pressures.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Relative tolerance keeps tie resolution stable under uniform scaling of queues.
    let tol = 1e-9 * best.abs().max(1e-12);
    let is_max = |p: f64| p >= best - tol;
    if let Some(c) = current {
        if pressures.get(c.0).copied().is_some_and(is_max) {
            return Ok(c);
        }
    }
    let idx = pressures
        .iter()
        .position(|&p| is_max(p))
        .expect("non-empty phase set has a maximizer");
    Ok(PhaseId(idx))
}
