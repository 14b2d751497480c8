//! Newell-Franklin equilibrium speed-density relation and its inverse.

use super::{EstimationError, EstimatorParams};

/// Relative distance to free-flow speed inside which density is exactly zero.
pub const FREE_FLOW_EPS: f64 = 1e-9;
/// Densities below this (1e-6 veh/km) snap to zero.
pub const DENSITY_SNAP: f64 = 1e-9;

/// `rho_jam / (1 - (v_f / w) ln(1 - v / v_f))`, in vehicles per meter.
pub fn speed_to_density(speed: f64, params: &EstimatorParams) -> Result<f64, EstimationError> {
    let vf = params.free_flow_speed;
    if !(speed >= -FREE_FLOW_EPS * vf && speed <= vf * (1.0 + FREE_FLOW_EPS)) {
        return Err(EstimationError::SpeedDomain { speed, max: vf });
    }
    let v = speed.clamp(0.0, vf);
    if v >= vf * (1.0 - FREE_FLOW_EPS) {
        return Ok(0.0);
    }
    let rho = params.jam_density / (1.0 - (vf / params.shockwave_speed) * (1.0 - v / vf).ln());
    Ok(if rho < DENSITY_SNAP { 0.0 } else { rho })
}

/// Inverse relation: `v_f (1 - exp((w / v_f)(1 - rho_jam / rho)))`, with `v_f` at zero density.
pub fn density_to_speed(density: f64, params: &EstimatorParams) -> Result<f64, EstimationError> {
    let jam = params.jam_density;
    if !(density >= 0.0 && density <= jam * (1.0 + 1e-12)) {
        return Err(EstimationError::DensityDomain { density, max: jam });
    }
    if density == 0.0 {
        return Ok(params.free_flow_speed);
    }
    let vf = params.free_flow_speed;
    let rho = density.min(jam);
    Ok(vf * (1.0 - ((params.shockwave_speed / vf) * (1.0 - jam / rho)).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{KMH, VEH_PER_KM};

    #[test]
    fn endpoints() {
        let p = EstimatorParams::default();
        assert_eq!(speed_to_density(0.0, &p).unwrap(), 143.0 * VEH_PER_KM);
        assert_eq!(speed_to_density(p.free_flow_speed, &p).unwrap(), 0.0);
        assert_eq!(density_to_speed(p.jam_density, &p).unwrap(), 0.0);
        assert_eq!(density_to_speed(0.0, &p).unwrap(), p.free_flow_speed);
    }

    #[test]
    fn half_free_flow_speed() {
        let p = EstimatorParams::default();
        let rho = speed_to_density(30.0 * KMH, &p).unwrap() / VEH_PER_KM;
        let expected = 143.0 / (1.0 + 2.4 * std::f64::consts::LN_2);
        assert!((rho - expected).abs() < 1e-9, "{rho} vs {expected}");
        assert!((rho - 53.69).abs() < 0.01);
    }

    #[test]
    fn domain_errors() {
        let p = EstimatorParams::default();
        assert!(speed_to_density(-0.1, &p).is_err());
        assert!(speed_to_density(p.free_flow_speed * 1.01, &p).is_err());
        assert!(density_to_speed(-1e-3, &p).is_err());
        assert!(density_to_speed(p.jam_density * 1.01, &p).is_err());
    }

    #[test]
    fn near_free_flow_is_zero() {
        let p = EstimatorParams::default();
        let v = p.free_flow_speed * (1.0 - 1e-12);
        assert_eq!(speed_to_density(v, &p).unwrap(), 0.0);
    }

    #[test]
    fn round_trip_grid() {
        let p = EstimatorParams::default();
        for kmh in (1..=55).step_by(2) {
            let v = kmh as f64 * KMH;
            let back = density_to_speed(speed_to_density(v, &p).unwrap(), &p).unwrap();
            assert!((back - v).abs() <= 1e-9 * v, "{kmh} km/h -> {back}");
        }
    }
}
