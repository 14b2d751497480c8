//! Space-time kernel interpolation of probe speeds.

use super::{EstimatorParams, ProbeReading};

/// Exponential space-time kernel `exp(-|dx|/sigma - |dt|/tau)`.
pub fn kernel_weight(dx: f64, dt: f64, params: &EstimatorParams) -> f64 {
    (-dx.abs() / params.sigma - dt.abs() / params.tau).exp()
}

/// Kernel-weighted mean of probe speeds at `(x, t)`.
///
/// Readings must come from the lane being estimated. When the total kernel
/// mass falls below `z_floor` (no informative data nearby) the position is
/// assumed to be in free flow.
pub fn estimate_speed(x: f64, t: f64, readings: &[ProbeReading], params: &EstimatorParams) -> f64 {
    let mut mass = 0.0;
    let mut weighted = 0.0;
    for r in readings {
        let phi = kernel_weight(x - r.x, t - r.t, params);
        mass += phi;
        weighted += phi * r.speed;
    }
    finish(mass, weighted, params)
}

pub(crate) fn finish(mass: f64, weighted: f64, params: &EstimatorParams) -> f64 {
    if mass < params.z_floor {
        return params.free_flow_speed;
    }
    (weighted / mass).clamp(0.0, params.free_flow_speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::LaneId;

    fn reading(x: f64, t: f64, speed: f64) -> ProbeReading {
        ProbeReading {
            vehicle: 0,
            lane: LaneId(0),
            x,
            t,
            speed,
        }
    }

    #[test]
    fn kernel_values() {
        let p = EstimatorParams::default();
        assert_eq!(kernel_weight(0.0, 0.0, &p), 1.0);
        assert!((kernel_weight(20.0, 0.0, &p) - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((kernel_weight(-20.0, 5.0, &p) - 0.135_335_283_236_612_7).abs() < 1e-15);
        assert!(kernel_weight(1e-9, 0.0, &p) < 1.0);
    }

    #[test]
    fn single_reading_dominates() {
        let p = EstimatorParams::default();
        assert_eq!(
            estimate_speed(100.0, 50.0, &[reading(100.0, 50.0, 8.0)], &p),
            8.0
        );
    }

    #[test]
    fn empty_is_free_flow() {
        let p = EstimatorParams::default();
        assert_eq!(estimate_speed(100.0, 50.0, &[], &p), p.free_flow_speed);
    }

    #[test]
    fn symmetric_pair_averages() {
        let p = EstimatorParams::default();
        let rs = [reading(80.0, 45.0, 4.0), reading(120.0, 55.0, 12.0)];
        assert!((estimate_speed(100.0, 50.0, &rs, &p) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn far_data_falls_back() {
        let p = EstimatorParams::default();
        // exp(-300/20) ~ 3e-7 < 1e-6
        let rs = [reading(0.0, 50.0, 0.0)];
        assert_eq!(estimate_speed(300.0, 50.0, &rs, &p), p.free_flow_speed);
        assert_eq!(estimate_speed(250.0, 50.0, &rs, &p), 0.0);
    }
}
