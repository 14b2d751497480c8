//! Queue estimation from connected-vehicle probes.
//!
//! Three steps, each its own submodule:
//! 1. [`kernel`]: adaptive-smoothing speed interpolation over same-lane probes,
//! 2. [`diagram`]: Newell-Franklin speed-to-density inversion,
//! 3. [`field`]: per-cell fields summed into link queues.

pub mod diagram;
pub mod field;
pub mod history;
pub mod kernel;
pub mod replay;

pub use diagram::{density_to_speed, speed_to_density};
pub use field::{estimate_cell_field, estimate_links, link_queue, CellEstimate, CellField};
pub use history::{ProbeHistory, ProbeReading};
pub use kernel::{estimate_speed, kernel_weight};

use serde::{Deserialize, Serialize};

pub const KMH: f64 = 1.0 / 3.6;
pub const VEH_PER_KM: f64 = 1e-3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EstimationError {
    #[error("estimator parameter `{name}` must be positive, got {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("speed {speed} m/s outside [0, {max}] m/s")]
    SpeedDomain { speed: f64, max: f64 },
    #[error("density {density} veh/m outside [0, {max}] veh/m")]
    DensityDomain { density: f64, max: f64 },
    #[error("probe batch at t={batch} s is older than the last ingested batch at t={last} s")]
    OutOfOrder { batch: f64, last: f64 },
    #[error("probe reading for lane {lane} has {what}")]
    BadReading { lane: usize, what: String },
    #[error("cell field does not cover lane `{0}`")]
    MissingLane(String),
}

/// Parameters of the estimation pipeline, in SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    /// Spatial kernel scale, meters.
    pub sigma: f64,
    /// Temporal kernel scale, seconds.
    pub tau: f64,
    /// History horizon, seconds.
    pub horizon: f64,
    /// Free-flow speed, m/s.
    pub free_flow_speed: f64,
    /// Shockwave speed, m/s.
    pub shockwave_speed: f64,
    /// Jam density, vehicles per meter.
    pub jam_density: f64,
    /// Below this total kernel mass a position is assumed to be in free flow.
    pub z_floor: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            sigma: 20.0,
            tau: 5.0,
            horizon: 40.0,
            free_flow_speed: 60.0 * KMH,
            shockwave_speed: 25.0 * KMH,
            jam_density: 143.0 * VEH_PER_KM,
            z_floor: 1e-6,
        }
    }
}

impl EstimatorParams {
    /// Ties the temporal scale to a probe reporting interval (half of it).
    pub fn with_reporting_interval(mut self, interval: f64) -> Self {
        self.tau = interval / 2.0;
        self
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let checks = [
            ("sigma", self.sigma),
            ("tau", self.tau),
            ("horizon", self.horizon),
            ("free_flow_speed", self.free_flow_speed),
            ("shockwave_speed", self.shockwave_speed),
            ("jam_density", self.jam_density),
            ("z_floor", self.z_floor),
        ];
        for (name, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EstimationError::BadParam { name, value });
            }
        }
        Ok(())
    }

    /// Bumper-to-bumper spacing at jam density, meters.
    pub fn jam_spacing(&self) -> f64 {
        1.0 / self.jam_density
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_in_si() {
        let p = EstimatorParams::default();
        assert!((p.free_flow_speed - 16.666_666_666_666_668).abs() < 1e-12);
        assert!((p.shockwave_speed - 6.944_444_444_444_445).abs() < 1e-12);
        assert!((p.jam_density - 0.143).abs() < 1e-15);
        assert!((p.jam_spacing() - 6.993).abs() < 1e-3);
        p.validate().unwrap();
    }

    #[test]
    fn tau_follows_reporting_interval() {
        let p = EstimatorParams::default().with_reporting_interval(6.0);
        assert_eq!(p.tau, 3.0);
    }

    #[test]
    fn rejects_nonpositive() {
        let p = EstimatorParams {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            p.validate(),
            Err(EstimationError::BadParam { name: "sigma", .. })
        ));
    }
}
