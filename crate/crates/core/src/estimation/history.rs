use super::EstimationError;
use crate::network::LaneId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One report from a connected vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReading {
    pub vehicle: u64,
    pub lane: LaneId,
    /// Meters from the upstream end of the link.
    pub x: f64,
    /// Seconds.
    pub t: f64,
    /// m/s.
    pub speed: f64,
}

/// Per-lane, time-ordered probe buffers bounded by a horizon.
///
/// Batches are ingested whole, so readers never see half of a reporting
/// round. A reading aged exactly `horizon` is still inside the window.
#[derive(Clone, Debug, Default)]
pub struct ProbeHistory {
    horizon: f64,
    lanes: BTreeMap<LaneId, Vec<ProbeReading>>,
    last_batch: Option<f64>,
}

impl ProbeHistory {
    pub fn new(horizon: f64) -> Self {
        ProbeHistory {
            horizon,
            lanes: BTreeMap::new(),
            last_batch: None,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Time of the most recent ingested batch.
    pub fn last_batch(&self) -> Option<f64> {
        self.last_batch
    }

    /// Adds one reporting round taken at time `t`, then evicts readings older
    /// than the horizon. Rejects batches older than the previous one.
    pub fn ingest(&mut self, t: f64, batch: &[ProbeReading]) -> Result<(), EstimationError> {
        if let Some(last) = self.last_batch {
            if t < last {
                return Err(EstimationError::OutOfOrder { batch: t, last });
            }
        }
        for r in batch {
            if !(r.speed >= 0.0) || !(r.x >= 0.0) || r.t > t {
                return Err(EstimationError::BadReading {
                    lane: r.lane.0,
                    what: format!("x={} t={} v={}", r.x, r.t, r.speed),
                });
            }
        }
        for r in batch {
            let buf = self.lanes.entry(r.lane).or_default();
            // Readings within a batch may arrive in any order; keep each lane sorted by time.
            let at = buf.partition_point(|o| o.t <= r.t);
            buf.insert(at, *r);
        }
        self.last_batch = Some(t);
        self.prune(t);
        Ok(())
    }

    /// Drops readings with `t_now - t > horizon`.
    pub fn prune(&mut self, t_now: f64) {
        let horizon = self.horizon;
        for buf in self.lanes.values_mut() {
            let stale = buf.partition_point(|r| t_now - r.t > horizon);
            buf.drain(..stale);
        }
    }

    /// All buffered readings of a lane.
    pub fn lane(&self, lane: LaneId) -> &[ProbeReading] {
        self.lanes.get(&lane).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Readings of a lane with age in `[0, horizon]` at `t_now`.
    pub fn window(&self, lane: LaneId, t_now: f64) -> &[ProbeReading] {
        let buf = self.lane(lane);
        let lo = buf.partition_point(|r| t_now - r.t > self.horizon);
        let hi = buf.partition_point(|r| r.t <= t_now);
        &buf[lo..hi.max(lo)]
    }

    pub fn len(&self) -> usize {
        self.lanes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
