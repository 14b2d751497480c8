//! Fixed-timing baseline: stage schedule lookup and a Webster-style offline
//! plan with offsets along the heaviest corridor.

use super::{ControlError, SaturationParams};
use crate::network::{IntersectionId, LinkId, MovementId, Network, PhaseId, TurnKind};
use crate::simulation::Demand;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedStage {
    pub phase: PhaseId,
    /// Green seconds.
    pub green: f64,
    /// Clearance (yellow + all-red) following the green.
    pub lost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedTimingPlan {
    pub stages: Vec<FixedStage>,
    pub cycle: f64,
    pub offset: f64,
    /// Demand exceeded the intersection's capacity when the plan was built.
    #[serde(default)]
    pub oversaturated: bool,
}

impl FixedTimingPlan {
    pub fn new(stages: Vec<FixedStage>, offset: f64) -> Result<Self, ControlError> {
        let cycle = stages.iter().map(|s| s.green + s.lost).sum();
        let plan = FixedTimingPlan {
            stages,
            cycle,
            offset,
            oversaturated: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if self.stages.is_empty() {
            return Err(ControlError::BadPlan("no stages".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !(s.green > 0.0) || s.lost < 0.0 {
                return Err(ControlError::BadPlan(format!(
                    "stage {i}: green {} must be > 0 and lost {} >= 0",
                    s.green, s.lost
                )));
            }
        }
        let sum: f64 = self.stages.iter().map(|s| s.green + s.lost).sum();
        if (sum - self.cycle).abs() > 1e-9 * self.cycle.max(1.0) {
            return Err(ControlError::BadPlan(format!(
                "greens and lost times sum to {sum}, cycle is {}",
                self.cycle
            )));
        }
        Ok(())
    }
}

/// Signal state under a fixed plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedState {
    pub stage: usize,
    pub phase: PhaseId,
    /// False during the clearance interval after the stage's green.
    pub green: bool,
}

/// Stage active at clock `t`, from `(t + offset) mod cycle`.
pub fn fixed_timing_step(plan: &FixedTimingPlan, t: f64) -> FixedState {
    let local = (t + plan.offset).rem_euclid(plan.cycle);
    let mut start = 0.0;
    for (stage, s) in plan.stages.iter().enumerate() {
        if local < start + s.green {
            return FixedState {
                stage,
                phase: s.phase,
                green: true,
            };
        }
        if local < start + s.green + s.lost {
            return FixedState {
                stage,
                phase: s.phase,
                green: false,
            };
        }
        start += s.green + s.lost;
    }
    let last = plan.stages.len() - 1;
    FixedState {
        stage: last,
        phase: plan.stages[last].phase,
        green: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebsterLimits {
    pub min_cycle: f64,
    pub max_cycle: f64,
    pub min_green: f64,
    /// Clearance after each stage.
    pub lost_per_stage: f64,
}

impl Default for WebsterLimits {
    fn default() -> Self {
        WebsterLimits {
            min_cycle: 40.0,
            max_cycle: 120.0,
            min_green: 5.0,
            lost_per_stage: 5.0,
        }
    }
}

/// Mean hourly flow of every movement implied by entry rates and turning ratios.
pub fn movement_flows(
    network: &Network,
    demand: &Demand,
    duration: f64,
) -> BTreeMap<MovementId, f64> {
    let link_flow = link_flows(network, demand, duration);
    let mut out = BTreeMap::new();
    for link in network.links() {
        for &(m, r) in demand.ratios(link.id) {
            *out.entry(m).or_insert(0.0) += link_flow[link.id.0] * r;
        }
    }
    out
}

fn link_flows(network: &Network, demand: &Demand, duration: f64) -> Vec<f64> {
    let n = network.links().len();
    let mut base = vec![0.0; n];
    for e in demand.entries() {
        base[e.0] += demand.mean_rate(e, duration);
    }
    let mut flow = base.clone();
    for _ in 0..1000 {
        let mut next = base.clone();
        for link in network.links() {
            for &(m, r) in demand.ratios(link.id) {
                next[network.movement(m).to.0] += flow[link.id.0] * r;
            }
        }
        let delta = next
            .iter()
            .zip(&flow)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        flow = next;
        if delta < 1e-9 {
            break;
        }
    }
    flow
}

struct StageDraft {
    phase: PhaseId,
    ratio: f64,
}

/// Greedy cover of the controlled movements by phases, each stage weighted by
/// the largest flow ratio among the movements it covers first.
fn draft_stages(
    network: &Network,
    id: IntersectionId,
    flows: &BTreeMap<MovementId, f64>,
    sat: &SaturationParams,
) -> Vec<StageDraft> {
    let n = network.intersection(id);
    // Movements of one turn from one link share lanes, so their flows add up.
    let ratio = |m: MovementId| {
        let mv = network.movement(m);
        let flow: f64 = n
            .movements
            .iter()
            .map(|&o| network.movement(o))
            .filter(|o| o.from == mv.from && o.turn == mv.turn)
            .map(|o| flows.get(&o.id).copied().unwrap_or(0.0))
            .sum();
        flow / (sat.saturation_flow * mv.lane_count as f64 * mv.turn_factor)
    };
    let mut uncovered: BTreeSet<MovementId> = n
        .movements
        .iter()
        .copied()
        .filter(|&m| network.movement(m).turn.is_controlled())
        .collect();
    let mut drafts = Vec::new();
    while !uncovered.is_empty() {
        let best = n
            .phases
            .iter()
            .map(|p| {
                (
                    p.movements.iter().filter(|m| uncovered.contains(m)).count(),
                    p,
                )
            })
            .filter(|(c, _)| *c > 0)
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.id.cmp(&a.1.id)));
        let Some((_, phase)) = best else { break };
        let first: Vec<MovementId> = phase
            .movements
            .iter()
            .copied()
            .filter(|m| uncovered.contains(m))
            .collect();
        for m in &first {
            uncovered.remove(m);
        }
        drafts.push(StageDraft {
            phase: phase.id,
            ratio: first.iter().map(|&m| ratio(m)).fold(0.0, f64::max),
        });
    }
    drafts.sort_by_key(|d| d.phase);
    drafts
}

fn webster_cycle(total_ratio: f64, lost: f64, limits: &WebsterLimits) -> f64 {
    let raw = if total_ratio < 1.0 {
        (1.5 * lost + 5.0) / (1.0 - total_ratio)
    } else {
        limits.max_cycle
    };
    raw.clamp(limits.min_cycle, limits.max_cycle).ceil()
}

/// Splits `green_total` proportionally to `ratios` (equally when all are zero),
/// holding every stage at `min_green` or above and rounding to whole seconds;
/// the last stage absorbs rounding.
fn split_greens(ratios: &[f64], green_total: f64, min_green: f64) -> Vec<f64> {
    let n = ratios.len();
    let total: f64 = ratios.iter().sum();
    if total <= 0.0 || green_total <= min_green * n as f64 {
        return round_split(&vec![green_total / n as f64; n], green_total);
    }
    let mut fixed = vec![false; n];
    let mut greens = vec![0.0; n];
    loop {
        let free_ratio: f64 = (0..n).filter(|&i| !fixed[i]).map(|i| ratios[i]).sum();
        let free_green = green_total - fixed.iter().filter(|&&f| f).count() as f64 * min_green;
        let mut changed = false;
        for i in 0..n {
            greens[i] = if fixed[i] {
                min_green
            } else {
                free_green * ratios[i] / free_ratio
            };
            if !fixed[i] && greens[i] < min_green {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    round_split(&greens, green_total)
}

fn round_split(greens: &[f64], green_total: f64) -> Vec<f64> {
    let n = greens.len();
    let mut out: Vec<f64> = greens[..n - 1].iter().map(|g| g.round()).collect();
    let used: f64 = out.iter().sum();
    out.push(green_total - used);
    out
}

/// Sum of critical flow ratios `Y` of every intersection under `demand`;
/// 1.0 marks the capacity of a signal serving the greedy stage cover with
/// no lost time.
pub fn critical_flow_ratios(
    network: &Network,
    demand: &Demand,
    duration: f64,
    sat: &SaturationParams,
) -> Vec<f64> {
    let flows = movement_flows(network, demand, duration);
    network
        .intersections()
        .iter()
        .map(|n| {
            draft_stages(network, n.id, &flows, sat)
                .iter()
                .map(|s| s.ratio)
                .sum()
        })
        .collect()
}

/// Webster-style plans for every intersection.
///
/// Stages come from a greedy phase cover; the cycle is Webster's
/// `(1.5 L + 5) / (1 - Y)` clamped to the limits, shared network-wide for
/// coordination; greens are proportional to critical flow ratios. Offsets
/// progress the through movements of the heaviest entry corridor at free-flow
/// speed. Intersections whose critical ratios sum to 1 or more are flagged
/// oversaturated and get the maximum cycle.
pub fn optimize_fixed_timing(
    network: &Network,
    demand: &Demand,
    duration: f64,
    sat: &SaturationParams,
    limits: &WebsterLimits,
    free_flow_speed: f64,
) -> Vec<FixedTimingPlan> {
    let flows = movement_flows(network, demand, duration);
    let drafts: Vec<Vec<StageDraft>> = network
        .intersections()
        .iter()
        .map(|n| draft_stages(network, n.id, &flows, sat))
        .collect();
    let cycle = drafts
        .iter()
        .filter(|d| !d.is_empty())
        .map(|d| {
            let y: f64 = d.iter().map(|s| s.ratio).sum();
            webster_cycle(y, d.len() as f64 * limits.lost_per_stage, limits)
        })
        .fold(limits.min_cycle, f64::max);

    let mut plans: Vec<FixedTimingPlan> = drafts
        .iter()
        .map(|d| {
            if d.is_empty() {
                return FixedTimingPlan {
                    stages: Vec::new(),
                    cycle,
                    offset: 0.0,
                    oversaturated: false,
                };
            }
            let y: f64 = d.iter().map(|s| s.ratio).sum();
            let lost = d.len() as f64 * limits.lost_per_stage;
            let ratios: Vec<f64> = d.iter().map(|s| s.ratio).collect();
            let greens = split_greens(&ratios, cycle - lost, limits.min_green);
            FixedTimingPlan {
                stages: d
                    .iter()
                    .zip(greens)
                    .map(|(s, green)| FixedStage {
                        phase: s.phase,
                        green,
                        lost: limits.lost_per_stage,
                    })
                    .collect(),
                cycle,
                offset: 0.0,
                oversaturated: y >= 1.0,
            }
        })
        .collect();

    for (n, offset) in corridor_offsets(network, demand, duration, &plans, free_flow_speed) {
        plans[n.0].offset = offset;
    }
    plans
}

fn corridor_offsets(
    network: &Network,
    demand: &Demand,
    duration: f64,
    plans: &[FixedTimingPlan],
    free_flow_speed: f64,
) -> Vec<(IntersectionId, f64)> {
    let flows = link_flows(network, demand, duration);
    let Some(start) = network
        .entry_links()
        .filter(|l| l.downstream.is_some())
        .max_by(|a, b| {
            flows[a.id.0]
                .total_cmp(&flows[b.id.0])
                .then(b.id.cmp(&a.id))
        })
    else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut visited = BTreeSet::new();
    let mut link: LinkId = start.id;
    // Global time at which the platoon leaves the previous stop line on green.
    let mut depart: Option<f64> = None;
    while let Some(n) = network.link(link).downstream {
        if !visited.insert(n) {
            break;
        }
        let Some(through) = network
            .movements_from(link)
            .find(|m| m.turn == TurnKind::Through)
        else {
            break;
        };
        let plan = &plans[n.0];
        let Some(stage_start) = stage_start(plan, through.id, network) else {
            break;
        };
        let offset = match depart {
            None => 0.0,
            Some(t0) => {
                let arrive = t0 + network.link(link).length / free_flow_speed;
                (stage_start - arrive).rem_euclid(plan.cycle)
            }
        };
        out.push((n, offset));
        depart = Some(stage_start - offset);
        link = through.to;
    }
    out
}

fn stage_start(plan: &FixedTimingPlan, movement: MovementId, network: &Network) -> Option<f64> {
    let n = network.movement(movement).intersection;
    let mut start = 0.0;
    for s in &plan.stages {
        if network.intersection(n).phase(s.phase).contains(movement) {
            return Some(start);
        }
        start += s.green + s.lost;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_stage() -> FixedTimingPlan {
        FixedTimingPlan::new(
            vec![
                FixedStage {
                    phase: PhaseId(0),
                    green: 27.0,
                    lost: 3.0,
                },
                FixedStage {
                    phase: PhaseId(1),
                    green: 27.0,
                    lost: 3.0,
                },
            ],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn schedule_lookup() {
        let plan = two_stage();
        assert_eq!(plan.cycle, 60.0);
        assert_eq!(fixed_timing_step(&plan, 0.0).phase, PhaseId(0));
        assert!(fixed_timing_step(&plan, 0.0).green);
        assert!(!fixed_timing_step(&plan, 28.0).green);
        assert_eq!(fixed_timing_step(&plan, 30.0).phase, PhaseId(1));
        assert_eq!(fixed_timing_step(&plan, 60.0).phase, PhaseId(0));
        assert_eq!(fixed_timing_step(&plan, -1.0).phase, PhaseId(1));
    }

    #[test]
    fn offset_shifts_schedule() {
        let mut plan = two_stage();
        plan.offset = 30.0;
        assert_eq!(fixed_timing_step(&plan, 0.0).phase, PhaseId(1));
    }

    #[test]
    fn bad_plans_rejected() {
        assert!(FixedTimingPlan::new(vec![], 0.0).is_err());
        let mut plan = two_stage();
        plan.cycle = 50.0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn split_proportional_and_min_green() {
        assert_eq!(split_greens(&[0.2, 0.1], 60.0, 5.0), vec![40.0, 20.0]);
        assert_eq!(split_greens(&[0.0, 0.0], 30.0, 5.0), vec![15.0, 15.0]);
        let g = split_greens(&[0.5, 0.001], 60.0, 5.0);
        assert_eq!(g, vec![55.0, 5.0]);
    }

    #[test]
    fn webster_cycle_clamped() {
        let l = WebsterLimits::default();
        assert_eq!(webster_cycle(0.0, 10.0, &l), 40.0);
        assert_eq!(webster_cycle(0.5, 20.0, &l), 70.0);
        assert_eq!(webster_cycle(0.99, 20.0, &l), 120.0);
        assert_eq!(webster_cycle(1.3, 20.0, &l), 120.0);
    }
}
