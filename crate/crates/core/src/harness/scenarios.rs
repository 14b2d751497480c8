//! Bundled reference scenarios: an isolated four-leg intersection and a
//! rectangular grid of four-leg intersections.
//!
//! A road that ends at an intersection is two links side by side: the main
//! link `{name}` with a through lane and a shared through/right lane, and the
//! one-lane left-turn bay `{name}:left`. Keeping left-turning traffic on its
//! own link gives it its own queue in the pressure computation. Roads leaving
//! the network are a single three-lane exit link. Signals use the standard
//! eight-phase set (opposing throughs, opposing lefts, and through plus left
//! per approach).

use crate::control::{critical_flow_ratios, ControlTiming, SaturationParams};
use crate::network::{
    ApproachDoc, IntersectionDoc, LaneDoc, LinkDoc, MovementDoc, Network, NetworkDocument, TurnKind,
};
use crate::simulation::{Demand, DemandProfile, EntryDemand, TurningTable};
use std::collections::BTreeMap;

/// Approach names, clockwise from north.
pub const APPROACHES: [&str; 4] = ["n", "e", "s", "w"];

/// Suffix of left-turn bay links.
pub const BAY_SUFFIX: &str = ":left";

/// Turning split of the isolated profiles: (left, through, right).
pub const TURN_SPLIT: (f64, f64, f64) = (0.2, 0.6, 0.2);
/// Grid routes turn less so that trips cross several intersections.
pub const GRID_TURN_SPLIT: (f64, f64, f64) = (0.1, 0.8, 0.1);

/// Per-road arrival rate (veh/h) of the isolated low-demand profile.
pub const ISOLATED_LOW_RATE: f64 = 300.0;
/// Mean per-road arrival rate (veh/h) of the isolated high-demand profile.
pub const ISOLATED_HIGH_RATE: f64 = 500.0;
/// The high profile is tidal: the heavy axis carries `1 + swing` times the
/// mean rate, the light axis `1 - swing`, and they swap every period.
pub const ISOLATED_HIGH_SWING: f64 = 0.8;
pub const ISOLATED_HIGH_PERIOD: f64 = 1200.0;
/// Grid demand as a share of the estimated capacity.
pub const GRID_LOAD: f64 = 0.7;

pub const ISOLATED_LINK_LENGTH: f64 = 500.0;
pub const GRID_LINK_LENGTH: f64 = 300.0;

/// Links of one road.
struct Road {
    main: String,
    bay: Option<String>,
}

struct Builder {
    doc: NetworkDocument,
}

impl Builder {
    fn new() -> Self {
        Builder {
            doc: NetworkDocument {
                cell_length: crate::network::DEFAULT_CELL_LENGTH,
                links: Vec::new(),
                lanes: Vec::new(),
                movements: Vec::new(),
                conflicts: Vec::new(),
                phases: Vec::new(),
                intersections: Vec::new(),
            },
        }
    }

    /// Adds a road; it gets a left-turn bay when `to` is an intersection.
    fn road(
        &mut self,
        name: &str,
        from: &str,
        to: &str,
        length: f64,
        to_intersection: bool,
    ) -> Road {
        let link = |id: String, lanes: Option<u32>| LinkDoc {
            id,
            length,
            from: from.into(),
            to: to.into(),
            lanes,
        };
        if to_intersection {
            let bay = format!("{name}{BAY_SUFFIX}");
            self.doc.links.push(link(name.into(), None));
            self.doc.links.push(link(bay.clone(), None));
            Road {
                main: name.into(),
                bay: Some(bay),
            }
        } else {
            self.doc.links.push(link(name.into(), Some(3)));
            Road {
                main: name.into(),
                bay: None,
            }
        }
    }

    /// Movements, lanes and phases of a node whose incoming and outgoing
    /// roads are listed clockwise from north. Each turn has one movement per
    /// link of the receiving road; the one into a bay is suffixed `_bay`.
    fn four_leg(&mut self, node: &str, incoming: &[Road; 4], outgoing: &[Road; 4]) {
        for (i, (d, inc)) in APPROACHES.iter().zip(incoming).enumerate() {
            let bay = inc.bay.as_ref().expect("approach roads have a bay");
            let mut by_turn: BTreeMap<&str, Vec<String>> = BTreeMap::new();
            for (turn, kind, target, src) in [
                ("left", TurnKind::Left, (i + 1) % 4, bay),
                ("through", TurnKind::Through, (i + 2) % 4, &inc.main),
                ("right", TurnKind::Right, (i + 3) % 4, &inc.main),
            ] {
                let out = &outgoing[target];
                let base = format!("{node}.{d}_{turn}");
                let mut targets = vec![(base.clone(), &out.main)];
                if let Some(b) = &out.bay {
                    targets.push((format!("{base}_bay"), b));
                }
                for (id, to) in targets {
                    self.doc.movements.push(MovementDoc {
                        id: id.clone(),
                        from: src.clone(),
                        to: to.clone(),
                        turn: kind,
                        lanes: None,
                        turn_factor: None,
                    });
                    by_turn.entry(turn).or_default().push(id);
                }
            }
            let lanes = [
                (&inc.main, by_turn["through"].clone()),
                (
                    &inc.main,
                    [by_turn["through"].clone(), by_turn["right"].clone()].concat(),
                ),
                (bay, by_turn["left"].clone()),
            ];
            for (link, movements) in lanes {
                let k = self.doc.lanes.iter().filter(|l| &l.link == link).count();
                self.doc.lanes.push(LaneDoc {
                    id: format!("{link}/{k}"),
                    link: link.clone(),
                    movements,
                    cells: None,
                });
            }
        }
        self.doc.intersections.push(IntersectionDoc {
            id: node.into(),
            approaches: Some(
                incoming
                    .iter()
                    .map(|r| ApproachDoc::Links(vec![r.main.clone(), r.bay.clone().expect("bay")]))
                    .collect(),
            ),
        });
    }

    fn build(self) -> Network {
        Network::build(&self.doc).expect("bundled network is valid")
    }
}

/// Document of the isolated intersection `c`: 500 m approach roads `{n,e,s,w}_in`
/// (each with its `:left` bay) and exits `{n,e,s,w}_out`.
pub fn isolated_document() -> NetworkDocument {
    let mut b = Builder::new();
    let incoming = APPROACHES.map(|d| {
        b.road(
            &format!("{d}_in"),
            &format!("{d}_end"),
            "c",
            ISOLATED_LINK_LENGTH,
            true,
        )
    });
    let outgoing = APPROACHES.map(|d| {
        b.road(
            &format!("{d}_out"),
            "c",
            &format!("{d}_end"),
            ISOLATED_LINK_LENGTH,
            false,
        )
    });
    b.four_leg("c", &incoming, &outgoing);
    b.doc
}

pub fn isolated_network() -> Network {
    Builder {
        doc: isolated_document(),
    }
    .build()
}

pub fn is_bay(name: &str) -> bool {
    name.ends_with(BAY_SUFFIX)
}

/// Turning tables for every non-exit link. A main link splits between
/// through and right; a bay sends everything left. Where the receiving road
/// has a bay, the choice between its two links follows the chance of turning
/// left next.
fn turning_for(net: &Network, split: (f64, f64, f64)) -> Vec<TurningTable> {
    let (left, through, right) = split;
    net.links()
        .iter()
        .filter(|l| !l.is_exit)
        .map(|l| {
            let ratios: BTreeMap<String, f64> = net
                .movements_from(l.id)
                .map(|m| {
                    let turn = match m.turn {
                        TurnKind::Left => 1.0,
                        TurnKind::Through => through / (through + right),
                        TurnKind::Right => right / (through + right),
                    };
                    let to = net.link(m.to);
                    let next = if to.is_exit {
                        1.0
                    } else if is_bay(&to.name) {
                        left
                    } else {
                        1.0 - left
                    };
                    (m.name.clone(), turn * next)
                })
                .collect();
            TurningTable {
                link: l.name.clone(),
                ratios,
            }
        })
        .collect()
}

/// Splits a per-road arrival rate between every entry link's main link and bay.
fn entries_for(net: &Network, rate: f64, left: f64) -> Vec<EntryDemand> {
    net.entry_links()
        .map(|l| EntryDemand {
            link: l.name.clone(),
            rates: vec![[
                0.0,
                if is_bay(&l.name) {
                    rate * left
                } else {
                    rate * (1.0 - left)
                },
            ]],
        })
        .collect()
}

/// Constant `rate` veh/h on every approach road of the isolated intersection.
pub fn isolated_demand(rate: f64) -> DemandProfile {
    let net = isolated_network();
    DemandProfile {
        entries: entries_for(&net, rate, TURN_SPLIT.0),
        turning: turning_for(&net, TURN_SPLIT),
    }
}

/// Tidal variant of [`isolated_demand`]: the north-south roads carry
/// `rate * (1 + swing)` and the east-west roads `rate * (1 - swing)` for the
/// first `period` seconds, then the two swap, alternating for `span` seconds.
/// The mean per road stays `rate`.
pub fn isolated_tidal_demand(rate: f64, swing: f64, period: f64, span: f64) -> DemandProfile {
    let net = isolated_network();
    let pieces = (span / period).ceil().max(1.0) as usize;
    let mut profile = isolated_demand(rate);
    for e in &mut profile.entries {
        let share = e.rates[0][1] / rate;
        let north_south = e.link.starts_with('n') || e.link.starts_with('s');
        e.rates = (0..pieces)
            .map(|k| {
                let heavy = k.is_multiple_of(2) == north_south;
                let r = if heavy {
                    rate * (1.0 + swing)
                } else {
                    rate * (1.0 - swing)
                };
                [k as f64 * period, r * share]
            })
            .collect();
    }
    debug_assert_eq!(profile.entries.len(), net.entry_links().count());
    profile
}

pub fn isolated_low_demand() -> DemandProfile {
    isolated_demand(ISOLATED_LOW_RATE)
}

/// Tidal profile lasting `span` seconds; the last piece holds afterwards.
pub fn isolated_high_demand(span: f64) -> DemandProfile {
    isolated_tidal_demand(
        ISOLATED_HIGH_RATE,
        ISOLATED_HIGH_SWING,
        ISOLATED_HIGH_PERIOD,
        span,
    )
}

/// `rows x cols` grid of intersections `i{r}{c}` (row 0 is the north edge)
/// joined by 300 m roads named `{from}>{to}`. Boundary nodes are `N{c}`,
/// `S{c}`, `W{r}` and `E{r}`; each has one entry road and one exit road.
pub fn grid_document(rows: usize, cols: usize) -> NetworkDocument {
    assert!(rows > 0 && cols > 0, "grid needs at least one intersection");
    let node = |r: usize, c: usize| format!("i{r}{c}");
    // Neighbor of (r, c) in approach direction d (n, e, s, w).
    let neighbor = |r: usize, c: usize, d: usize| -> String {
        match d {
            0 if r == 0 => format!("N{c}"),
            0 => node(r - 1, c),
            1 if c + 1 == cols => format!("E{r}"),
            1 => node(r, c + 1),
            2 if r + 1 == rows => format!("S{c}"),
            2 => node(r + 1, c),
            3 if c == 0 => format!("W{r}"),
            _ => node(r, c - 1),
        }
    };
    let mut b = Builder::new();
    let mut roads: BTreeMap<(String, String), Road> = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = node(r, c);
            for d in 0..4 {
                let other = neighbor(r, c, d);
                let name = format!("{other}>{here}");
                let road = b.road(&name, &other, &here, GRID_LINK_LENGTH, true);
                roads.insert((other.clone(), here.clone()), road);
                if !other.starts_with('i') {
                    let name = format!("{here}>{other}");
                    let road = b.road(&name, &here, &other, GRID_LINK_LENGTH, false);
                    roads.insert((here.clone(), other), road);
                }
            }
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let here = node(r, c);
            let take = |from: String, to: String| {
                let road = &roads[&(from, to)];
                Road {
                    main: road.main.clone(),
                    bay: road.bay.clone(),
                }
            };
            let incoming = [0, 1, 2, 3].map(|d| take(neighbor(r, c, d), here.clone()));
            let outgoing = [0, 1, 2, 3].map(|d| take(here.clone(), neighbor(r, c, d)));
            b.four_leg(&here, &incoming, &outgoing);
        }
    }
    b.doc
}

pub fn grid_network(rows: usize, cols: usize) -> Network {
    Builder {
        doc: grid_document(rows, cols),
    }
    .build()
}

/// Constant `rate` veh/h on every entry road of a grid.
pub fn grid_demand(net: &Network, rate: f64) -> DemandProfile {
    DemandProfile {
        entries: entries_for(net, rate, GRID_TURN_SPLIT.0),
        turning: turning_for(net, GRID_TURN_SPLIT),
    }
}

/// Per-road entry rate (veh/h) at which the busiest grid intersection reaches
/// its estimated capacity: critical flow ratios summing to the share of each
/// control slot left green after a phase change.
pub fn grid_capacity_rate(net: &Network, sat: &SaturationParams, timing: &ControlTiming) -> f64 {
    let unit = Demand::resolve(&grid_demand(net, 1.0), net).expect("bundled grid demand resolves");
    let y = critical_flow_ratios(net, &unit, 3600.0, sat)
        .into_iter()
        .fold(0.0, f64::max);
    (timing.slot - timing.lost_time()) / timing.slot / y
}

/// Grid demand at [`GRID_LOAD`] of the estimated capacity.
pub fn grid_default_demand(
    net: &Network,
    sat: &SaturationParams,
    timing: &ControlTiming,
) -> DemandProfile {
    grid_demand(net, GRID_LOAD * grid_capacity_rate(net, sat, timing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_shape() {
        let net = isolated_network();
        assert_eq!(net.intersections().len(), 1);
        let c = &net.intersections()[0];
        assert_eq!(c.phases.len(), 8);
        assert_eq!(c.incoming.len(), 8);
        assert_eq!(net.links().len(), 12);
        assert_eq!(net.lanes().len(), 4 * 3 + 4 * 3);
        assert!(net.lanes().iter().all(|l| l.cells.len() == 50));
        let t = net.movement_by_name("c.n_through").unwrap();
        assert_eq!(net.movement(t).lane_count, 2);
        assert_eq!(net.link(net.movement(t).to).name, "s_out");
        let l = net.movement_by_name("c.n_left").unwrap();
        assert_eq!(net.link(net.movement(l).from).name, "n_in:left");
        assert_eq!(net.link(net.movement(l).to).name, "e_out");
        let r = net.movement_by_name("c.n_right").unwrap();
        assert_eq!(net.link(net.movement(r).to).name, "w_out");
    }

    #[test]
    fn grid_shape() {
        let net = grid_network(3, 3);
        assert_eq!(net.intersections().len(), 9);
        // 36 approach roads of two links each, 12 single-link exits.
        assert_eq!(net.links().len(), 72 + 12);
        assert_eq!(net.entry_links().count(), 24);
        assert!(net.intersections().iter().all(|n| n.phases.len() == 8));
        let m = net.movement_by_name("i11.n_through_bay").unwrap();
        assert_eq!(net.link(net.movement(m).to).name, "i11>i21:left");
    }

    #[test]
    fn demand_resolves_with_expected_mix() {
        let net = isolated_network();
        let d = Demand::resolve(&isolated_low_demand(), &net).unwrap();
        let main = net.link_by_name("n_in").unwrap();
        let bay = net.link_by_name("n_in:left").unwrap();
        let total = d.rate_at(main, 0.0) + d.rate_at(bay, 0.0);
        assert!((total - ISOLATED_LOW_RATE).abs() < 1e-9);
        assert!((d.rate_at(bay, 0.0) / total - TURN_SPLIT.0).abs() < 1e-12);

        let grid = grid_network(2, 3);
        let d = Demand::resolve(&grid_demand(&grid, 400.0), &grid).unwrap();
        let link = grid.link_by_name("N0>i00").unwrap();
        let through: f64 = d
            .ratios(link)
            .iter()
            .filter(|(m, _)| grid.movement(*m).turn == TurnKind::Through)
            .map(|(_, r)| r)
            .sum();
        let (_, t, r) = GRID_TURN_SPLIT;
        assert!((through - t / (t + r)).abs() < 1e-12);
    }

    #[test]
    fn tidal_profile_alternates_around_mean() {
        let net = isolated_network();
        let d = Demand::resolve(&isolated_high_demand(3600.0), &net).unwrap();
        let road = |name: &str, t: f64| {
            let main = net.link_by_name(name).unwrap();
            let bay = net.link_by_name(&format!("{name}{BAY_SUFFIX}")).unwrap();
            d.rate_at(main, t) + d.rate_at(bay, t)
        };
        let heavy = ISOLATED_HIGH_RATE * (1.0 + ISOLATED_HIGH_SWING);
        let light = ISOLATED_HIGH_RATE * (1.0 - ISOLATED_HIGH_SWING);
        assert!((road("n_in", 0.0) - heavy).abs() < 1e-9);
        assert!((road("e_in", 0.0) - light).abs() < 1e-9);
        assert!((road("s_in", ISOLATED_HIGH_PERIOD) - light).abs() < 1e-9);
        assert!((road("w_in", ISOLATED_HIGH_PERIOD) - heavy).abs() < 1e-9);
        let main = net.link_by_name("n_in").unwrap();
        let bay = net.link_by_name("n_in:left").unwrap();
        let mean = d.mean_rate(main, 3600.0) + d.mean_rate(bay, 3600.0);
        // Three pieces: heavy, light, heavy.
        assert!((mean - (2.0 * heavy + light) / 3.0).abs() < 1e-9);
    }

    #[test]
    fn grid_capacity_uses_usable_green() {
        let net = grid_network(3, 3);
        let sat = SaturationParams::default();
        let timing = ControlTiming::default();
        let rate = grid_capacity_rate(&net, &sat, &timing);
        let d = Demand::resolve(&grid_demand(&net, rate), &net).unwrap();
        let y = critical_flow_ratios(&net, &d, 3600.0, &sat)
            .into_iter()
            .fold(0.0, f64::max);
        assert!((y - 0.5).abs() < 1e-9, "{y}");
    }
}
