//! TOML-friendly document form of a network and its validating builder.
//!
//! ```toml
//! cell_length = 10.0
//!
//! [[links]]
//! id = "n_in"
//! length = 500.0
//! from = "n_end"     # nodes not listed under [[intersections]] are boundaries
//! to = "c"
//! lanes = 2          # auto-generated lanes, used when no [[lanes]] name this link
//!
//! [[lanes]]
//! id = "n_in/0"
//! link = "n_in"
//! movements = ["n_left"]
//! cells = [250.0, 250.0]   # optional explicit tiling
//!
//! [[movements]]
//! id = "n_left"
//! from = "n_in"
//! to = "e_out"
//! turn = "left"             # through | left | right
//! lanes = 1                 # optional; defaults to the lanes that allow it
//! turn_factor = 0.714       # optional; defaults by turn kind
//!
//! [[conflicts]]
//! intersection = "c"
//! pairs = [["n_through", "e_through"]]
//!
//! [[phases]]
//! id = "ns"
//! intersection = "c"
//! movements = ["n_through", "s_through"]
//!
//! [[intersections]]
//! id = "c"
//! approaches = ["n_in", "e_in", "s_in", ["w_in", "w_bay"]]   # optional: standard four-leg phases
//! ```

use super::{
    enumerate_standard_phases, uniform_cells, Approach, Cell, ConflictMatrix, FourLegLayout,
    Intersection, IntersectionId, Lane, LaneId, Link, LinkId, Movement, MovementId, Network,
    NetworkError, Phase, PhaseId, TurnKind,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_CELL_LENGTH: f64 = 10.0;

fn default_cell_length() -> f64 {
    DEFAULT_CELL_LENGTH
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    #[serde(default = "default_cell_length")]
    pub cell_length: f64,
    pub links: Vec<LinkDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lanes: Vec<LaneDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub movements: Vec<MovementDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<ConflictDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<PhaseDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intersections: Vec<IntersectionDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub id: String,
    pub length: f64,
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneDoc {
    pub id: String,
    pub link: String,
    #[serde(default)]
    pub movements: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub turn: TurnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictDoc {
    pub intersection: String,
    pub pairs: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDoc {
    pub id: String,
    pub intersection: String,
    pub movements: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionDoc {
    pub id: String,
    /// Incoming links clockwise from north; requests the standard four-leg
    /// phase set. An approach split over several links lists them all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approaches: Option<Vec<ApproachDoc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ApproachDoc {
    Link(String),
    Links(Vec<String>),
}

impl ApproachDoc {
    pub fn links(&self) -> &[String] {
        match self {
            ApproachDoc::Link(l) => std::slice::from_ref(l),
            ApproachDoc::Links(ls) => ls,
        }
    }
}

impl NetworkDocument {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("network document serializes")
    }
}

fn check_unique<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<(), NetworkError> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(NetworkError::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

pub(super) fn build(doc: &NetworkDocument) -> Result<Network, NetworkError> {
    check_unique(
        "intersection",
        doc.intersections.iter().map(|i| i.id.as_str()),
    )?;
    check_unique("link", doc.links.iter().map(|l| l.id.as_str()))?;
    check_unique("lane", doc.lanes.iter().map(|l| l.id.as_str()))?;
    check_unique("movement", doc.movements.iter().map(|m| m.id.as_str()))?;

    let intersection_names: BTreeMap<String, IntersectionId> = doc
        .intersections
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.clone(), IntersectionId(i)))
        .collect();

    // Links.
    let mut links = Vec::with_capacity(doc.links.len());
    let mut link_names = BTreeMap::new();
    for (i, d) in doc.links.iter().enumerate() {
        if !(d.length > 0.0) || !d.length.is_finite() {
            return Err(NetworkError::NonPositiveLength(d.id.clone()));
        }
        let upstream = intersection_names.get(&d.from).copied();
        let downstream = intersection_names.get(&d.to).copied();
        links.push(Link {
            id: LinkId(i),
            name: d.id.clone(),
            length: d.length,
            lanes: Vec::new(),
            from_node: d.from.clone(),
            to_node: d.to.clone(),
            upstream,
            downstream,
            is_entry: upstream.is_none(),
            is_exit: downstream.is_none(),
        });
        link_names.insert(d.id.clone(), LinkId(i));
    }
    let find_link = |kind: &'static str, owner: &str, name: &str| {
        link_names
            .get(name)
            .copied()
            .ok_or_else(|| NetworkError::UnknownLink {
                kind,
                owner: owner.to_string(),
                link: name.to_string(),
            })
    };

    // Movements.
    let mut movements = Vec::with_capacity(doc.movements.len());
    let mut movement_names = BTreeMap::new();
    for (i, d) in doc.movements.iter().enumerate() {
        let from = find_link("movement", &d.id, &d.from)?;
        let to = find_link("movement", &d.id, &d.to)?;
        let (fl, tl) = (&links[from.0], &links[to.0]);
        if fl.to_node != tl.from_node {
            return Err(NetworkError::Disconnected {
                movement: d.id.clone(),
                from: d.from.clone(),
                to: d.to.clone(),
            });
        }
        let intersection =
            fl.downstream
                .ok_or_else(|| NetworkError::MovementOutsideIntersection {
                    movement: d.id.clone(),
                })?;
        let turn_factor = d
            .turn_factor
            .unwrap_or_else(|| d.turn.default_turn_factor());
        if !(turn_factor > 0.0 && turn_factor <= 1.0) {
            return Err(NetworkError::BadTurnFactor {
                movement: d.id.clone(),
                factor: turn_factor,
            });
        }
        if d.lanes == Some(0) {
            return Err(NetworkError::BadLaneCount {
                movement: d.id.clone(),
            });
        }
        movements.push(Movement {
            id: MovementId(i),
            name: d.id.clone(),
            from,
            to,
            turn: d.turn,
            lane_count: d.lanes.unwrap_or(0),
            turn_factor,
            intersection,
            to_exit: tl.is_exit,
        });
        movement_names.insert(d.id.clone(), MovementId(i));
    }
    let find_movement = |kind: &'static str, owner: &str, name: &str| {
        movement_names
            .get(name)
            .copied()
            .ok_or_else(|| NetworkError::UnknownMovement {
                kind,
                owner: owner.to_string(),
                movement: name.to_string(),
            })
    };

    // Lanes: explicit lane documents first (in document order per link), else auto lanes.
    let mut lane_docs_by_link: BTreeMap<LinkId, Vec<&LaneDoc>> = BTreeMap::new();
    for d in &doc.lanes {
        let link = find_link("lane", &d.id, &d.link)?;
        lane_docs_by_link.entry(link).or_default().push(d);
    }
    let mut lanes = Vec::new();
    let mut lane_names = BTreeMap::new();
    for (li, ld) in doc.links.iter().enumerate() {
        let link_id = LinkId(li);
        let length = links[li].length;
        let specs: Vec<(String, Vec<MovementId>, Option<&Vec<f64>>)> =
            match lane_docs_by_link.get(&link_id) {
                Some(docs) => docs
                    .iter()
                    .map(|d| {
                        let ms = d
                            .movements
                            .iter()
                            .map(|m| {
                                let id = find_movement("lane", &d.id, m)?;
                                if movements[id.0].from != link_id {
                                    return Err(NetworkError::UnknownMovement {
                                        kind: "lane",
                                        owner: d.id.clone(),
                                        movement: m.clone(),
                                    });
                                }
                                Ok(id)
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok((d.id.clone(), ms, d.cells.as_ref()))
                    })
                    .collect::<Result<_, NetworkError>>()?,
                None => {
                    let outgoing: Vec<MovementId> = movements
                        .iter()
                        .filter(|m| m.from == link_id)
                        .map(|m| m.id)
                        .collect();
                    (0..ld.lanes.unwrap_or(1))
                        .map(|k| (format!("{}/{}", ld.id, k), outgoing.clone(), None))
                        .collect()
                }
            };
        if specs.is_empty() {
            return Err(NetworkError::NoLanes(ld.id.clone()));
        }
        for (name, ms, cells) in specs {
            let cells = match cells {
                Some(lengths) => explicit_cells(&name, lengths, length)?,
                None => uniform_cells(length, doc.cell_length),
            };
            let id = LaneId(lanes.len());
            if lane_names.insert(name.clone(), id).is_some() {
                return Err(NetworkError::DuplicateId {
                    kind: "lane",
                    id: name,
                });
            }
            links[li].lanes.push(id);
            lanes.push(Lane {
                id,
                name,
                link: link_id,
                cells,
                movements: ms,
            });
        }
    }

    for m in movements.iter_mut() {
        let serving = lanes.iter().filter(|l| l.movements.contains(&m.id)).count() as u32;
        if serving == 0 {
            return Err(NetworkError::BadLaneCount {
                movement: m.name.clone(),
            });
        }
        if m.lane_count == 0 {
            m.lane_count = serving;
        }
    }

    // Intersections.
    let mut intersections = Vec::with_capacity(doc.intersections.len());
    for (ni, d) in doc.intersections.iter().enumerate() {
        let id = IntersectionId(ni);
        let incoming: Vec<LinkId> = links
            .iter()
            .filter(|l| l.downstream == Some(id))
            .map(|l| l.id)
            .collect();
        let outgoing: Vec<LinkId> = links
            .iter()
            .filter(|l| l.upstream == Some(id))
            .map(|l| l.id)
            .collect();
        let own: Vec<MovementId> = movements
            .iter()
            .filter(|m| m.intersection == id)
            .map(|m| m.id)
            .collect();

        let mut conflicts = ConflictMatrix::default();
        for c in doc.conflicts.iter().filter(|c| c.intersection == d.id) {
            for [a, b] in &c.pairs {
                let a = find_movement("conflict", &d.id, a)?;
                let b = find_movement("conflict", &d.id, b)?;
                conflicts.insert(a, b);
            }
        }

        let explicit: Vec<&PhaseDoc> = doc
            .phases
            .iter()
            .filter(|p| p.intersection == d.id)
            .collect();
        let mut phase_specs: Vec<(String, Vec<MovementId>)> = Vec::new();
        for p in &explicit {
            let ms = p
                .movements
                .iter()
                .map(|m| find_movement("phase", &p.id, m))
                .collect::<Result<Vec<_>, _>>()?;
            phase_specs.push((p.id.clone(), ms));
        }
        if let Some(approaches) = &d.approaches {
            let mut layout = FourLegLayout::default();
            for approach in approaches {
                let mut a = Approach::default();
                for name in approach.links() {
                    let link = find_link("intersection", &d.id, name)?;
                    for m in movements.iter().filter(|m| m.from == link) {
                        match m.turn {
                            TurnKind::Through => a.through.push(m.id),
                            TurnKind::Left => a.left.push(m.id),
                            TurnKind::Right => {}
                        }
                    }
                }
                layout.approaches.push(a);
            }
            let standard = enumerate_standard_phases(&d.id, &layout)?;
            for (a, b) in standard.conflicts {
                conflicts.insert(a, b);
            }
            if explicit.is_empty() {
                phase_specs = standard
                    .phases
                    .into_iter()
                    .map(|(n, ms)| (format!("{}:{}", d.id, n), ms))
                    .collect();
            }
        }

        let mut phases = Vec::with_capacity(phase_specs.len());
        for (name, ms) in phase_specs {
            validate_phase(&name, &ms, id, &movements, &conflicts)?;
            phases.push(Phase {
                id: PhaseId(phases.len()),
                name,
                movements: ms,
            });
        }
        for &m in &own {
            let mv = &movements[m.0];
            if mv.turn.is_controlled() && !phases.iter().any(|p| p.contains(m)) {
                return Err(NetworkError::UncoveredMovement {
                    intersection: d.id.clone(),
                    movement: mv.name.clone(),
                });
            }
        }
        intersections.push(Intersection {
            id,
            name: d.id.clone(),
            incoming,
            outgoing,
            movements: own,
            phases,
            conflicts,
        });
    }
    for p in &doc.phases {
        if !intersection_names.contains_key(&p.intersection) {
            return Err(NetworkError::UnknownIntersection {
                kind: "phase",
                owner: p.id.clone(),
                intersection: p.intersection.clone(),
            });
        }
    }
    for c in &doc.conflicts {
        if !intersection_names.contains_key(&c.intersection) {
            return Err(NetworkError::UnknownIntersection {
                kind: "conflict",
                owner: c.intersection.clone(),
                intersection: c.intersection.clone(),
            });
        }
    }

    Ok(Network {
        links,
        lanes,
        movements,
        intersections,
        link_names,
        lane_names,
        movement_names,
        intersection_names,
    })
}

fn explicit_cells(
    lane: &str,
    lengths: &[f64],
    link_length: f64,
) -> Result<Vec<Cell>, NetworkError> {
    let mut cells = Vec::with_capacity(lengths.len());
    let mut start = 0.0;
    for (index, &len) in lengths.iter().enumerate() {
        if !(len > 0.0) {
            return Err(NetworkError::BadCell {
                lane: lane.to_string(),
                index,
            });
        }
        cells.push(Cell {
            index,
            length: len,
            center: start + len / 2.0,
        });
        start += len;
    }
    if cells.is_empty() || (start - link_length).abs() > 1e-9 * link_length.max(1.0) {
        return Err(NetworkError::CellTiling {
            lane: lane.to_string(),
            sum: start,
            length: link_length,
        });
    }
    Ok(cells)
}

fn validate_phase(
    name: &str,
    ms: &[MovementId],
    intersection: IntersectionId,
    movements: &[Movement],
    conflicts: &ConflictMatrix,
) -> Result<(), NetworkError> {
    let mut distinct = ms.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(NetworkError::PhaseTooSmall {
            phase: name.to_string(),
            count: distinct.len(),
        });
    }
    for &m in ms {
        let mv = &movements[m.0];
        if mv.intersection != intersection {
            return Err(NetworkError::ForeignMovement {
                phase: name.to_string(),
                movement: mv.name.clone(),
            });
        }
        if !mv.turn.is_controlled() {
            return Err(NetworkError::RightTurnInPhase {
                phase: name.to_string(),
                movement: mv.name.clone(),
            });
        }
    }
    for (i, &a) in ms.iter().enumerate() {
        for &b in &ms[i + 1..] {
            if conflicts.conflicts(a, b) {
                return Err(NetworkError::ConflictingPhase {
                    phase: name.to_string(),
                    a: movements[a.0].name.clone(),
                    b: movements[b.0].name.clone(),
                });
            }
        }
    }
    Ok(())
}
