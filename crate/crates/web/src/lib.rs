//! Browser bindings for the `bpeq` demo page.
//!
//! Each operation has a plain Rust function returning JSON (tested natively)
//! and a thin `wasm_bindgen` export that turns errors into JS exceptions.

use bpeq::control::ControllerKind;
use bpeq::estimation::{
    density_to_speed, estimate_speed, EstimatorParams, ProbeReading, KMH, VEH_PER_KM,
};
use bpeq::harness::scenarios::{isolated_network, isolated_tidal_demand};
use bpeq::network::LaneId;
use bpeq::simulation::{run_scenario, Demand, SimConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn diagram_params(
    free_kmh: f64,
    wave_kmh: f64,
    jam_per_km: f64,
) -> Result<EstimatorParams, String> {
    let p = EstimatorParams {
        free_flow_speed: free_kmh * KMH,
        shockwave_speed: wave_kmh * KMH,
        jam_density: jam_per_km * VEH_PER_KM,
        ..EstimatorParams::default()
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

/// Speed and flow against density, `points` samples from 0 to jam density.
pub fn fundamental_diagram(
    free_kmh: f64,
    wave_kmh: f64,
    jam_per_km: f64,
    points: usize,
) -> Result<Value, String> {
    let p = diagram_params(free_kmh, wave_kmh, jam_per_km)?;
    if points < 2 {
        return Err("need at least 2 points".into());
    }
    let mut density = Vec::with_capacity(points);
    let mut speed = Vec::with_capacity(points);
    let mut flow = Vec::with_capacity(points);
    for i in 0..points {
        let rho = p.jam_density * i as f64 / (points - 1) as f64;
        let v = density_to_speed(rho, &p).map_err(|e| e.to_string())?;
        density.push(rho / VEH_PER_KM);
        speed.push(v / KMH);
        flow.push(rho * v * 3600.0);
    }
    Ok(json!({ "density": density, "speed": speed, "flow": flow }))
}

/// Estimated speed over a space-time grid of one lane from the given probes.
///
/// `probes` is a JSON array of `{x, t, v}` with meters, seconds and km/h. The
/// grid has `nx` columns over `[0, length]` and `nt` rows over `[t0, t1]`.
#[allow(clippy::too_many_arguments)]
pub fn speed_field(
    probes: &str,
    sigma: f64,
    tau: f64,
    length: f64,
    t0: f64,
    t1: f64,
    nx: usize,
    nt: usize,
) -> Result<Value, String> {
    let params = EstimatorParams {
        sigma,
        tau,
        ..EstimatorParams::default()
    };
    params.validate().map_err(|e| e.to_string())?;
    if nx < 2 || nt < 2 || length.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err("grid needs nx, nt >= 2, length > 0 and t1 > t0".into());
    }
    let raw: Vec<Value> = serde_json::from_str(probes).map_err(|e| e.to_string())?;
    let mut readings = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        let field = |k: &str| {
            r.get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| format!("probe {i}: missing number `{k}`"))
        };
        readings.push(ProbeReading {
            vehicle: i as u64,
            lane: LaneId(0),
            x: field("x")?,
            t: field("t")?,
            speed: field("v")? * KMH,
        });
    }
    let rows: Vec<Vec<f64>> = (0..nt)
        .map(|j| {
            let t = t0 + (t1 - t0) * j as f64 / (nt - 1) as f64;
            (0..nx)
                .map(|i| {
                    let x = length * i as f64 / (nx - 1) as f64;
                    estimate_speed(x, t, &readings, &params) / KMH
                })
                .collect()
        })
        .collect();
    Ok(json!({ "speed": rows, "free_flow": params.free_flow_speed / KMH }))
}

/// Fixed-time, perfect-count BP and BP-EQ on the isolated intersection under
/// tidal demand with the given mean rate (veh/h per road) and swing.
pub fn compare_controllers(
    rate: f64,
    swing: f64,
    penetration: f64,
    seed: u64,
    duration: f64,
) -> Result<Value, String> {
    if !(0.0..=1.0).contains(&penetration) {
        return Err(format!("penetration {penetration} outside [0, 1]"));
    }
    if !(duration > 0.0 && duration <= 4.0 * 3600.0) {
        return Err("duration must be in (0, 14400] s".into());
    }
    let net = isolated_network();
    let profile = isolated_tidal_demand(rate, swing, 1200.0, duration);
    let demand = Demand::resolve(&profile, &net).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for kind in [
        ControllerKind::Fixed,
        ControllerKind::BpPerfect,
        ControllerKind::BpEq,
    ] {
        let mut cfg = SimConfig::uniform(kind, 1);
        cfg.sim.penetration = penetration;
        let o = run_scenario(&net, &demand, cfg, seed, duration).map_err(|e| e.to_string())?;
        rows.push(json!({
            "controller": kind.to_string(),
            "mean_delay": o.mean_delay(),
            "throughput": o.total_throughput(),
            "spawned": o.spawned,
            "agreement": o.agreement_rate(),
            "in_system": o.in_system.iter().map(|&(t, n)| [t, n as f64]).collect::<Vec<_>>(),
        }));
    }
    Ok(Value::Array(rows))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fundamentalDiagram)]
pub fn fundamental_diagram_js(
    free_kmh: f64,
    wave_kmh: f64,
    jam_per_km: f64,
    points: usize,
) -> Result<String, JsValue> {
    to_js(fundamental_diagram(free_kmh, wave_kmh, jam_per_km, points))
}

#[wasm_bindgen(js_name = speedField)]
#[allow(clippy::too_many_arguments)]
pub fn speed_field_js(
    probes: &str,
    sigma: f64,
    tau: f64,
    length: f64,
    t0: f64,
    t1: f64,
    nx: usize,
    nt: usize,
) -> Result<String, JsValue> {
    to_js(speed_field(probes, sigma, tau, length, t0, t1, nx, nt))
}

#[wasm_bindgen(js_name = compareControllers)]
pub fn compare_controllers_js(
    rate: f64,
    swing: f64,
    penetration: f64,
    seed: u32,
    duration: f64,
) -> Result<String, JsValue> {
    to_js(compare_controllers(
        rate,
        swing,
        penetration,
        seed as u64,
        duration,
    ))
}
