//! Static road network: links, lanes, cells, movements, phases and intersections.
//!
//! A [`Network`] is built once from a [`NetworkDocument`] and is never mutated
//! afterwards. Simulation and control only hold shared references to it.

mod document;
mod phases;

pub use document::{
    ApproachDoc, ConflictDoc, IntersectionDoc, LaneDoc, LinkDoc, MovementDoc, NetworkDocument,
    PhaseDoc, DEFAULT_CELL_LENGTH,
};
pub use phases::{enumerate_standard_phases, Approach, FourLegLayout, StandardPhasing};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

macro_rules! index_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_id!(
    /// Index of a link in [`Network::links`].
    LinkId
);
index_id!(
    /// Index of a lane in [`Network::lanes`].
    LaneId
);
index_id!(
    /// Index of a movement in [`Network::movements`].
    MovementId
);
index_id!(
    /// Index of an intersection in [`Network::intersections`].
    IntersectionId
);
index_id!(
    /// Position of a phase in its intersection's phase table. Lower ids win ties.
    PhaseId
);

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetworkError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("link `{0}` must have positive length")]
    NonPositiveLength(String),
    #[error("link `{0}` has no lanes")]
    NoLanes(String),
    #[error(
        "lane `{lane}`: cells do not tile the link (cells sum to {sum} m, link is {length} m)"
    )]
    CellTiling { lane: String, sum: f64, length: f64 },
    #[error("lane `{lane}`: cell {index} has non-positive length")]
    BadCell { lane: String, index: usize },
    #[error("{kind} `{owner}` references unknown link `{link}`")]
    UnknownLink {
        kind: &'static str,
        owner: String,
        link: String,
    },
    #[error("{kind} `{owner}` references unknown movement `{movement}`")]
    UnknownMovement {
        kind: &'static str,
        owner: String,
        movement: String,
    },
    #[error("{kind} `{owner}` references unknown intersection `{intersection}`")]
    UnknownIntersection {
        kind: &'static str,
        owner: String,
        intersection: String,
    },
    #[error("movement `{movement}`: link `{from}` does not end where link `{to}` starts")]
    Disconnected {
        movement: String,
        from: String,
        to: String,
    },
    #[error("movement `{movement}` does not cross an intersection")]
    MovementOutsideIntersection { movement: String },
    #[error("movement `{movement}`: lane count must be >= 1")]
    BadLaneCount { movement: String },
    #[error("movement `{movement}`: turn factor {factor} outside (0, 1]")]
    BadTurnFactor { movement: String, factor: f64 },
    #[error("phase `{phase}` has {count} movement(s); a phase needs at least 2")]
    PhaseTooSmall { phase: String, count: usize },
    #[error("phase `{phase}` contains conflicting movements `{a}` and `{b}`")]
    ConflictingPhase { phase: String, a: String, b: String },
    #[error(
        "phase `{phase}` contains right-turn movement `{movement}`, which is not signal-controlled"
    )]
    RightTurnInPhase { phase: String, movement: String },
    #[error("phase `{phase}` contains movement `{movement}` of another intersection")]
    ForeignMovement { phase: String, movement: String },
    #[error("intersection `{intersection}`: movement `{movement}` is not served by any phase")]
    UncoveredMovement {
        intersection: String,
        movement: String,
    },
    #[error("intersection `{intersection}`: explicit phase list required ({reason})")]
    ExplicitPhasesRequired {
        intersection: String,
        reason: String,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Through,
    Left,
    Right,
}

impl TurnKind {
    /// Right turns exist for routing but are never signal-controlled.
    pub fn is_controlled(self) -> bool {
        !matches!(self, TurnKind::Right)
    }

    pub fn default_turn_factor(self) -> f64 {
        match self {
            TurnKind::Through => 1.0,
            TurnKind::Left => 0.714,
            TurnKind::Right => 0.85,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    /// Length `d_i` in meters.
    pub length: f64,
    /// Center of the cell, meters from the upstream end of the link.
    pub center: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub name: String,
    pub length: f64,
    pub lanes: Vec<LaneId>,
    pub from_node: String,
    pub to_node: String,
    /// Intersection at the upstream end, if any.
    pub upstream: Option<IntersectionId>,
    /// Intersection at the stop line, if any.
    pub downstream: Option<IntersectionId>,
    pub is_entry: bool,
    pub is_exit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lane {
    pub id: LaneId,
    pub name: String,
    pub link: LinkId,
    /// Cells ordered from the upstream end to the stop line.
    pub cells: Vec<Cell>,
    pub movements: Vec<MovementId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Movement {
    pub id: MovementId,
    pub name: String,
    pub from: LinkId,
    pub to: LinkId,
    pub turn: TurnKind,
    /// Lanes used by the movement (`x` in the service formula).
    pub lane_count: u32,
    pub turn_factor: f64,
    pub intersection: IntersectionId,
    /// Downstream link leaves the network; its queue is taken as zero.
    pub to_exit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub id: PhaseId,
    pub name: String,
    pub movements: Vec<MovementId>,
}

impl Phase {
    pub fn contains(&self, movement: MovementId) -> bool {
        self.movements.contains(&movement)
    }
}

/// Symmetric set of conflicting movement pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConflictMatrix {
    pairs: BTreeSet<(MovementId, MovementId)>,
}

impl ConflictMatrix {
    pub fn insert(&mut self, a: MovementId, b: MovementId) {
        self.pairs.insert(ordered(a, b));
    }

    pub fn conflicts(&self, a: MovementId, b: MovementId) -> bool {
        self.pairs.contains(&ordered(a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MovementId, MovementId)> + '_ {
        self.pairs.iter().copied()
    }
}

fn ordered(a: MovementId, b: MovementId) -> (MovementId, MovementId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    pub id: IntersectionId,
    pub name: String,
    pub incoming: Vec<LinkId>,
    pub outgoing: Vec<LinkId>,
    /// All movements crossing this intersection, right turns included.
    pub movements: Vec<MovementId>,
    pub phases: Vec<Phase>,
    pub conflicts: ConflictMatrix,
}

impl Intersection {
    pub fn phase(&self, id: PhaseId) -> &Phase {
        &self.phases[id.0]
    }

    /// Links whose queues this intersection's controller may observe.
    pub fn incident_links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.incoming.iter().chain(self.outgoing.iter()).copied()
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    links: Vec<Link>,
    lanes: Vec<Lane>,
    movements: Vec<Movement>,
    intersections: Vec<Intersection>,
    link_names: BTreeMap<String, LinkId>,
    lane_names: BTreeMap<String, LaneId>,
    movement_names: BTreeMap<String, MovementId>,
    intersection_names: BTreeMap<String, IntersectionId>,
}

impl Network {
    /// Builds and validates a network from its document form.
    pub fn build(doc: &NetworkDocument) -> Result<Network, NetworkError> {
        document::build(doc)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn movements(&self) -> &[Movement] {
        &self.movements
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn lane(&self, id: LaneId) -> &Lane {
        &self.lanes[id.0]
    }

    pub fn movement(&self, id: MovementId) -> &Movement {
        &self.movements[id.0]
    }

    pub fn intersection(&self, id: IntersectionId) -> &Intersection {
        &self.intersections[id.0]
    }

    pub fn link_by_name(&self, name: &str) -> Option<LinkId> {
        self.link_names.get(name).copied()
    }

    pub fn lane_by_name(&self, name: &str) -> Option<LaneId> {
        self.lane_names.get(name).copied()
    }

    pub fn movement_by_name(&self, name: &str) -> Option<MovementId> {
        self.movement_names.get(name).copied()
    }

    pub fn intersection_by_name(&self, name: &str) -> Option<IntersectionId> {
        self.intersection_names.get(name).copied()
    }

    /// Movements leaving `link` at its stop line.
    pub fn movements_from(&self, link: LinkId) -> impl Iterator<Item = &Movement> + '_ {
        self.movements.iter().filter(move |m| m.from == link)
    }

    pub fn entry_links(&self) -> impl Iterator<Item = &Link> + '_ {
        self.links.iter().filter(|l| l.is_entry)
    }

    /// Total lane-meters of a link.
    pub fn lane_meters(&self, link: LinkId) -> f64 {
        let l = self.link(link);
        l.length * l.lanes.len() as f64
    }

    pub fn longest_link(&self) -> f64 {
        self.links.iter().map(|l| l.length).fold(0.0, f64::max)
    }
}

/// Splits `length` into cells of `cell_length`; the last cell absorbs any remainder.
pub fn uniform_cells(length: f64, cell_length: f64) -> Vec<Cell> {
    let count = ((length / cell_length) + 1e-9).floor().max(1.0) as usize;
    let mut cells = Vec::with_capacity(count);
    let mut start = 0.0;
    for index in 0..count {
        let len = if index + 1 == count {
            length - start
        } else {
            cell_length
        };
        cells.push(Cell {
            index,
            length: len,
            center: start + len / 2.0,
        });
        start += len;
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cells_tile_exactly() {
        let cells = uniform_cells(500.0, 10.0);
        assert_eq!(cells.len(), 50);
        assert_eq!(cells[0].center, 5.0);
        assert_eq!(cells[49].center, 495.0);
        let sum: f64 = cells.iter().map(|c| c.length).sum();
        assert_eq!(sum, 500.0);
    }

    #[test]
    fn last_cell_absorbs_remainder() {
        let cells = uniform_cells(505.0, 10.0);
        assert_eq!(cells.len(), 50);
        assert_eq!(cells[49].length, 15.0);
        assert_eq!(cells[49].center, 497.5);
        let short = uniform_cells(4.0, 10.0);
        assert_eq!(short.len(), 1);
        assert_eq!(short[0].length, 4.0);
    }

    #[test]
    fn conflict_matrix_is_symmetric() {
        let mut m = ConflictMatrix::default();
        m.insert(MovementId(3), MovementId(1));
        assert!(m.conflicts(MovementId(1), MovementId(3)));
        assert!(m.conflicts(MovementId(3), MovementId(1)));
        assert!(!m.conflicts(MovementId(1), MovementId(2)));
    }
}
