use super::kernel::finish;
use super::{speed_to_density, EstimationError, EstimatorParams, ProbeHistory};
use crate::network::{LaneId, LinkId, Network};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellEstimate {
    /// m/s, within `[0, v_f]`.
    pub speed: f64,
    /// veh/m, within `[0, rho_jam]`.
    pub density: f64,
}

/// Estimated speed and density of every cell of a set of lanes at one instant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellField {
    pub time: f64,
    pub lanes: BTreeMap<LaneId, Vec<CellEstimate>>,
}

impl CellField {
    pub fn lane(&self, lane: LaneId) -> Option<&[CellEstimate]> {
        self.lanes.get(&lane).map(Vec::as_slice)
    }
}

/// Estimates every lane of the network at `t_now`.
pub fn estimate_cell_field(
    network: &Network,
    history: &ProbeHistory,
    t_now: f64,
    params: &EstimatorParams,
) -> CellField {
    estimate_links(
        network,
        network.links().iter().map(|l| l.id),
        history,
        t_now,
        params,
    )
}

/// Estimates the lanes of the given links at `t_now`.
///
/// Each lane only sees its own readings with age in `[0, horizon]`. Only cells
/// sandwiched between probes of the most recent batch on that lane (widened by
/// one jam spacing either side, the room a probe vehicle occupies) take the
/// kernel estimate; every other cell is assumed to be in free flow. Without
/// this, a stopped queue tail would spread jam density far upstream and
/// readings of vehicles that have since left would linger for the horizon.
pub fn estimate_links(
    network: &Network,
    links: impl IntoIterator<Item = LinkId>,
    history: &ProbeHistory,
    t_now: f64,
    params: &EstimatorParams,
) -> CellField {
    let mut field = CellField {
        time: t_now,
        lanes: BTreeMap::new(),
    };
    let free = CellEstimate {
        speed: params.free_flow_speed,
        density: 0.0,
    };
    let margin = params.jam_spacing();
    let latest = history.last_batch();
    let mut time_factor = Vec::new();
    for link in links {
        for &lane_id in &network.link(link).lanes {
            let lane = network.lane(lane_id);
            let readings = history.window(lane_id, t_now);
            let span = latest.and_then(|b| {
                readings
                    .iter()
                    .filter(|r| r.t >= b)
                    .fold(None, |acc: Option<(f64, f64)>, r| {
                        Some(acc.map_or((r.x, r.x), |(lo, hi)| (lo.min(r.x), hi.max(r.x))))
                    })
            });
            let Some((lo, hi)) = span else {
                field.lanes.insert(lane_id, vec![free; lane.cells.len()]);
                continue;
            };
            let (lo, hi) = (lo - margin, hi + margin);
            // The kernel factorizes; the temporal part is shared by every cell.
            time_factor.clear();
            time_factor.extend(
                readings
                    .iter()
                    .map(|r| (-(t_now - r.t).abs() / params.tau).exp()),
            );
            let cells = lane
                .cells
                .iter()
                .map(|cell| {
                    let half = cell.length / 2.0;
                    if cell.center + half < lo || cell.center - half > hi {
                        return free;
                    }
                    let mut mass = 0.0;
                    let mut weighted = 0.0;
                    for (r, tf) in readings.iter().zip(&time_factor) {
                        let phi = tf * (-(cell.center - r.x).abs() / params.sigma).exp();
                        mass += phi;
                        weighted += phi * r.speed;
                    }
                    let speed = finish(mass, weighted, params);
                    let density =
                        speed_to_density(speed, params).expect("estimated speed lies in [0, v_f]");
                    CellEstimate { speed, density }
                })
                .collect();
            field.lanes.insert(lane_id, cells);
        }
    }
    field
}

/// Vehicles on a link: the sum of `density * cell length` over all its lanes.
pub fn link_queue(
    network: &Network,
    link: LinkId,
    field: &CellField,
) -> Result<f64, EstimationError> {
    let mut total = 0.0;
    for &lane_id in &network.link(link).lanes {
        let lane = network.lane(lane_id);
        let cells = field
            .lane(lane_id)
            .ok_or_else(|| EstimationError::MissingLane(lane.name.clone()))?;
        total += lane
            .cells
            .iter()
            .zip(cells)
            .map(|(c, e)| e.density * c.length)
            .sum::<f64>();
    }
    Ok(total)
}
