//! Standard phase set of a four-leg intersection.
//!
//! With right turns uncontrolled and single-movement phases excluded, the
//! compatible movement pairs of a four-leg intersection are exactly:
//! opposing throughs, opposing lefts, and through + left of the same approach.
//! That gives eight two-movement phases when all four approaches carry both.
//!
//! An approach may be split over several links (a left-turn bay beside the
//! through lanes, say), and a turn may then have several movements, one per
//! receiving link. Movements of the same approach and turn always run together.

use super::{MovementId, NetworkError};

/// Controlled movements of one approach, grouped by turn.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Approach {
    pub through: Vec<MovementId>,
    pub left: Vec<MovementId>,
}

/// Approaches listed clockwise: north, east, south, west.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FourLegLayout {
    pub approaches: Vec<Approach>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardPhasing {
    pub conflicts: Vec<(MovementId, MovementId)>,
    /// Phases as (name, movements), in table order.
    pub phases: Vec<(String, Vec<MovementId>)>,
}

const APPROACH_NAMES: [&str; 4] = ["N", "E", "S", "W"];

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Kind {
    Through,
    Left,
}

#[derive(Copy, Clone, Debug)]
struct Slot<'a> {
    movements: &'a [MovementId],
    approach: usize,
    kind: Kind,
}

fn compatible(a: Slot<'_>, b: Slot<'_>) -> bool {
    let opposing = (a.approach + 2) % 4 == b.approach;
    let same = a.approach == b.approach;
    match (a.kind, b.kind) {
        (Kind::Through, Kind::Through) | (Kind::Left, Kind::Left) => opposing,
        _ => same,
    }
}

/// Table position of a compatible pair: through pairs, then left pairs, then
/// same-approach pairs; north/south before east/west within each group.
fn rank(a: Slot<'_>, b: Slot<'_>) -> (usize, usize) {
    match (a.kind, b.kind) {
        (Kind::Through, Kind::Through) => (0, a.approach.min(b.approach)),
        (Kind::Left, Kind::Left) => (1, a.approach.min(b.approach)),
        _ => (2, a.approach),
    }
}

fn phase_name(a: Slot<'_>, b: Slot<'_>) -> String {
    let axis = |i: usize| if i.is_multiple_of(2) { "NS" } else { "EW" };
    match (a.kind, b.kind) {
        (Kind::Through, Kind::Through) => format!("{}_through", axis(a.approach)),
        (Kind::Left, Kind::Left) => format!("{}_left", axis(a.approach)),
        _ => format!("{}_through_left", APPROACH_NAMES[a.approach]),
    }
}

/// Derives the conflict matrix and the two-movement phase table of a standard
/// four-leg intersection. Anything other than four approaches with at least
/// one controlled movement each is rejected.
pub fn enumerate_standard_phases(
    intersection: &str,
    layout: &FourLegLayout,
) -> Result<StandardPhasing, NetworkError> {
    if layout.approaches.len() != 4 {
        return Err(NetworkError::ExplicitPhasesRequired {
            intersection: intersection.to_string(),
            reason: format!("{} approaches, not four", layout.approaches.len()),
        });
    }
    let mut slots = Vec::new();
    for (approach, a) in layout.approaches.iter().enumerate() {
        if a.through.is_empty() && a.left.is_empty() {
            return Err(NetworkError::ExplicitPhasesRequired {
                intersection: intersection.to_string(),
                reason: format!(
                    "approach {} has no controlled movement",
                    APPROACH_NAMES[approach]
                ),
            });
        }
        for (movements, kind) in [(&a.through, Kind::Through), (&a.left, Kind::Left)] {
            if !movements.is_empty() {
                slots.push(Slot {
                    movements,
                    approach,
                    kind,
                });
            }
        }
    }

    let mut conflicts = Vec::new();
    let mut pairs = Vec::new();
    for (i, &a) in slots.iter().enumerate() {
        for &b in &slots[i + 1..] {
            if compatible(a, b) {
                let (first, second) = if (a.kind, b.kind) == (Kind::Left, Kind::Through) {
                    (b, a)
                } else {
                    (a, b)
                };
                pairs.push((rank(first, second), first, second));
            } else {
                for &x in a.movements {
                    conflicts.extend(b.movements.iter().map(|&y| (x, y)));
                }
            }
        }
    }
    pairs.sort_by_key(|(r, _, _)| *r);
    let phases = pairs
        .into_iter()
        .map(|(_, a, b)| (phase_name(a, b), [a.movements, b.movements].concat()))
        .collect();
    Ok(StandardPhasing { conflicts, phases })
}
