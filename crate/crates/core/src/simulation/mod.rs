//! Deterministic, seeded microscopic simulation.
//!
//! Vehicles follow Newell's simplified car-following rule built from the same
//! three parameters as the estimator's speed-density relation (free-flow speed,
//! shockwave speed, jam density). Stop lines discharge at the saturation
//! headway of each movement, capped per control slot, and full downstream
//! links block discharge.

pub mod demand;
mod engine;
pub mod events;
mod metrics;
mod scenario;

pub use demand::{Demand, DemandError, DemandProfile, EntryDemand, TurningTable};
pub use engine::{SignalState, Simulation, SlotAgreement, Vehicle};
pub use events::{Event, EventKind};
pub use metrics::{stopped_queue_length, MetricsWindow};
pub use scenario::{run_scenario, ScenarioOutcome};

use crate::control::{ControlTiming, ControllerKind, FixedTimingPlan, SaturationParams};
use crate::estimation::{EstimatorParams, KMH, VEH_PER_KM};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invariant violated at t={time} s: {message}")]
    Invariant { time: f64, message: String },
    #[error(transparent)]
    Control(#[from] crate::control::ControlError),
}

/// Physical traffic parameters of the simulated vehicles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleDynamics {
    /// m/s
    pub free_flow_speed: f64,
    /// m/s
    pub shockwave_speed: f64,
    /// veh/m
    pub jam_density: f64,
}

impl Default for VehicleDynamics {
    fn default() -> Self {
        VehicleDynamics {
            free_flow_speed: 60.0 * KMH,
            shockwave_speed: 25.0 * KMH,
            jam_density: 143.0 * VEH_PER_KM,
        }
    }
}

impl VehicleDynamics {
    /// Spacing of stopped vehicles, `1 / rho_jam`.
    pub fn jam_spacing(&self) -> f64 {
        1.0 / self.jam_density
    }

    /// Newell reaction lag `1 / (w rho_jam)`.
    pub fn reaction_time(&self) -> f64 {
        1.0 / (self.shockwave_speed * self.jam_density)
    }
}

/// Simulation-level settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Tick length, seconds.
    pub step: f64,
    /// Probe reporting interval, seconds.
    pub reporting_interval: f64,
    /// Fraction of vehicles that report probes.
    pub penetration: f64,
    /// Below this speed (m/s) a vehicle counts as stopped.
    pub stop_speed: f64,
    /// Standard deviation of Gaussian noise added to probe position (m) and speed (m/s); 0 disables.
    pub probe_noise: f64,
    /// Metrics aggregation window, seconds.
    pub metrics_window: f64,
    /// Interval of the vehicles-in-system samples, seconds.
    pub sample_interval: f64,
    /// Check physical invariants on every tick.
    pub check_invariants: bool,
    pub record_events: bool,
    pub record_probes: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            step: 0.5,
            reporting_interval: 10.0,
            penetration: 1.0,
            stop_speed: 5.0 * KMH,
            probe_noise: 0.0,
            metrics_window: 600.0,
            sample_interval: 60.0,
            check_invariants: cfg!(debug_assertions),
            record_events: false,
            record_probes: false,
        }
    }
}

/// Everything a run needs besides network, demand and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub sim: SimParams,
    pub dynamics: VehicleDynamics,
    pub estimator: EstimatorParams,
    pub saturation: SaturationParams,
    pub timing: ControlTiming,
    /// One controller kind per intersection, in intersection order.
    pub controllers: Vec<ControllerKind>,
    /// Fixed plans per intersection; computed from demand when absent.
    pub fixed_plans: Option<Vec<FixedTimingPlan>>,
}

impl SimConfig {
    pub fn uniform(kind: ControllerKind, intersections: usize) -> Self {
        SimConfig {
            sim: SimParams::default(),
            dynamics: VehicleDynamics::default(),
            estimator: EstimatorParams::default(),
            saturation: SaturationParams::default(),
            timing: ControlTiming::default(),
            controllers: vec![kind; intersections],
            fixed_plans: None,
        }
    }
}

/// Number of whole ticks in `span`, if `span` is a multiple of `step`.
pub(crate) fn ticks_in(span: f64, step: f64) -> Option<u64> {
    let n = (span / step).round();
    ((n * step - span).abs() <= 1e-9 * span.abs().max(1.0) && n >= 0.0).then_some(n as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newell_parameters() {
        let d = VehicleDynamics::default();
        assert!((d.jam_spacing() - 6.993).abs() < 1e-3);
        assert!((d.reaction_time() - 1.007).abs() < 1e-3);
    }

    #[test]
    fn tick_division() {
        assert_eq!(ticks_in(10.0, 0.5), Some(20));
        assert_eq!(ticks_in(10.2, 0.5), None);
        assert_eq!(ticks_in(0.0, 0.5), Some(0));
    }
}
