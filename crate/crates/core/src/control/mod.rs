//! Decentralized signal control: backpressure phase selection over perfect or
//! estimated queues, and a fixed-timing baseline.

mod controller;
mod fixed;
mod pressure;

pub use controller::{BpController, ControllerKind, EstimatedQueues, LocalTopology, SignalCommand};
pub use fixed::{
    critical_flow_ratios, fixed_timing_step, movement_flows, optimize_fixed_timing, FixedStage,
    FixedState, FixedTimingPlan, WebsterLimits,
};
pub use pressure::{
    movement_service, movement_weight, phase_pressures, select_phase, QueueSnapshot,
};

use crate::network::LinkId;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ControlError {
    #[error("intersection `{0}` has an empty phase set")]
    NoPhases(String),
    #[error("queue snapshot has no entry for link `{name}` ({link})")]
    MissingQueue { link: LinkId, name: String },
    #[error("invalid control timing: {0}")]
    BadTiming(String),
    #[error("invalid fixed timing plan: {0}")]
    BadPlan(String),
}

/// Base saturation flow; per-movement lane counts and turn factors live on
/// the network's movements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    /// Vehicles per hour per through lane.
    pub saturation_flow: f64,
}

impl Default for SaturationParams {
    fn default() -> Self {
        SaturationParams {
            saturation_flow: 1800.0,
        }
    }
}

/// Slot length and the clearance interval inserted on every phase change.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTiming {
    pub slot: f64,
    pub yellow: f64,
    pub all_red: f64,
}

impl Default for ControlTiming {
    fn default() -> Self {
        ControlTiming {
            slot: 10.0,
            yellow: 3.0,
            all_red: 2.0,
        }
    }
}

impl ControlTiming {
    pub fn lost_time(&self) -> f64 {
        self.yellow + self.all_red
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.slot > 0.0) {
            return Err(ControlError::BadTiming(format!(
                "slot {} must be > 0",
                self.slot
            )));
        }
        if self.yellow < 0.0 || self.all_red < 0.0 {
            return Err(ControlError::BadTiming("negative clearance".into()));
        }
        if self.lost_time() >= self.slot {
            return Err(ControlError::BadTiming(format!(
                "lost time {} must be shorter than the slot {}",
                self.lost_time(),
                self.slot
            )));
        }
        Ok(())
    }
}
