//! Synthetic demand: piecewise-constant Poisson arrivals at entry links and
//! fixed turning ratios per incoming link.

use crate::network::{LinkId, MovementId, Network, TurnKind};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DemandError {
    #[error("demand references unknown link `{0}`")]
    UnknownLink(String),
    #[error("demand on `{0}`, which is not an entry link")]
    NotEntry(String),
    #[error("entry `{link}`: {message}")]
    BadRates { link: String, message: String },
    #[error("turning table for `{link}` references `{movement}`, which does not leave that link")]
    UnknownMovement { link: String, movement: String },
    #[error("turning ratios for `{link}` sum to {sum}, not 1")]
    RatioSum { link: String, sum: f64 },
    #[error("turning ratio {ratio} for `{movement}` is negative")]
    NegativeRatio { movement: String, ratio: f64 },
    #[error("link `{0}` feeds an intersection but has no turning table")]
    MissingTurning(String),
}

/// Document form, as written in scenario configs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandProfile {
    #[serde(default)]
    pub entries: Vec<EntryDemand>,
    #[serde(default)]
    pub turning: Vec<TurningTable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDemand {
    pub link: String,
    /// `[start_s, vehicles_per_hour]` pieces; each holds until the next start.
    pub rates: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurningTable {
    pub link: String,
    /// Movement id to probability.
    pub ratios: BTreeMap<String, f64>,
}

impl DemandProfile {
    /// Multiplies every arrival rate by `factor`.
    pub fn scaled(&self, factor: f64) -> DemandProfile {
        let mut out = self.clone();
        for e in &mut out.entries {
            for piece in &mut e.rates {
                piece[1] *= factor;
            }
        }
        out
    }
}

/// Demand resolved against a network.
#[derive(Clone, Debug, PartialEq)]
pub struct Demand {
    entries: Vec<(LinkId, Vec<(f64, f64)>)>,
    turning: BTreeMap<LinkId, Vec<(MovementId, f64)>>,
}

const MAX_ROUTE_LINKS: usize = 64;

impl Demand {
    pub fn resolve(profile: &DemandProfile, network: &Network) -> Result<Demand, DemandError> {
        let find = |name: &str| {
            network
                .link_by_name(name)
                .ok_or_else(|| DemandError::UnknownLink(name.to_string()))
        };
        let mut entries = Vec::new();
        for e in &profile.entries {
            let link = find(&e.link)?;
            if !network.link(link).is_entry {
                return Err(DemandError::NotEntry(e.link.clone()));
            }
            let bad = |message: String| DemandError::BadRates {
                link: e.link.clone(),
                message,
            };
            let mut prev = f64::NEG_INFINITY;
            for &[start, rate] in &e.rates {
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(bad(format!("rate {rate} must be >= 0")));
                }
                if !(start > prev) {
                    return Err(bad("piece starts must be strictly increasing".into()));
                }
                prev = start;
            }
            entries.push((link, e.rates.iter().map(|&[s, r]| (s, r)).collect()));
        }
        entries.sort_by_key(|(l, _)| *l);

        let mut turning = BTreeMap::new();
        for t in &profile.turning {
            let link = find(&t.link)?;
            let mut ratios = Vec::new();
            for (name, &ratio) in &t.ratios {
                let m = network
                    .movement_by_name(name)
                    .filter(|&m| network.movement(m).from == link)
                    .ok_or_else(|| DemandError::UnknownMovement {
                        link: t.link.clone(),
                        movement: name.clone(),
                    })?;
                if ratio < 0.0 {
                    return Err(DemandError::NegativeRatio {
                        movement: name.clone(),
                        ratio,
                    });
                }
                ratios.push((m, ratio));
            }
            let sum: f64 = ratios.iter().map(|(_, r)| r).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(DemandError::RatioSum {
                    link: t.link.clone(),
                    sum,
                });
            }
            ratios.sort_by_key(|(m, _)| *m);
            turning.insert(link, ratios);
        }
        for link in network.links().iter().filter(|l| !l.is_exit) {
            if turning.contains_key(&link.id) {
                continue;
            }
            let out: Vec<MovementId> = network.movements_from(link.id).map(|m| m.id).collect();
            if out.len() == 1 {
                turning.insert(link.id, vec![(out[0], 1.0)]);
            } else {
                return Err(DemandError::MissingTurning(link.name.clone()));
            }
        }
        Ok(Demand { entries, turning })
    }

    pub fn entries(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.entries.iter().map(|(l, _)| *l)
    }

    fn rate_of(pieces: &[(f64, f64)], t: f64) -> f64 {
        pieces
            .iter()
            .rev()
            .find(|(start, _)| *start <= t)
            .map_or(0.0, |&(_, r)| r)
    }

    pub fn rate_at(&self, link: LinkId, t: f64) -> f64 {
        self.entries
            .iter()
            .find(|(l, _)| *l == link)
            .map_or(0.0, |(_, p)| Self::rate_of(p, t))
    }

    /// Time-averaged arrival rate (veh/h) over `[0, duration]`.
    pub fn mean_rate(&self, link: LinkId, duration: f64) -> f64 {
        let Some((_, pieces)) = self.entries.iter().find(|(l, _)| *l == link) else {
            return 0.0;
        };
        if duration <= 0.0 {
            return Self::rate_of(pieces, 0.0);
        }
        let mut total = 0.0;
        for (i, &(start, rate)) in pieces.iter().enumerate() {
            let end = pieces.get(i + 1).map_or(duration, |p| p.0).min(duration);
            let start = start.max(0.0);
            if end > start {
                total += rate * (end - start);
            }
        }
        total / duration
    }

    pub fn ratios(&self, link: LinkId) -> &[(MovementId, f64)] {
        self.turning.get(&link).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Poisson arrival counts of every entry over `[t, t + dt)`, in entry order.
    pub(crate) fn arrivals(&self, t: f64, dt: f64, rng: &mut impl Rng) -> Vec<(LinkId, u64)> {
        self.entries
            .iter()
            .map(|(link, pieces)| {
                let mean = Self::rate_of(pieces, t) * dt / 3600.0;
                (*link, sample_poisson(mean, rng))
            })
            .collect()
    }

    /// Movement sequence from `entry` to an exit, drawn link by link from the turning ratios.
    pub fn sample_route(
        &self,
        network: &Network,
        entry: LinkId,
        rng: &mut impl Rng,
    ) -> Vec<MovementId> {
        let mut route = Vec::new();
        let mut link = entry;
        while !network.link(link).is_exit {
            let ratios = self.ratios(link);
            let u: f64 = rng.random();
            let chosen = if route.len() >= MAX_ROUTE_LINKS {
                // Break improbable loops: head for an exit, else go straight.
                network
                    .movements_from(link)
                    .find(|m| m.to_exit)
                    .or_else(|| {
                        network
                            .movements_from(link)
                            .find(|m| m.turn == TurnKind::Through)
                    })
                    .map(|m| m.id)
            } else {
                pick(ratios, u)
            };
            let Some(m) = chosen.or_else(|| ratios.first().map(|(m, _)| *m)) else {
                break;
            };
            route.push(m);
            link = network.movement(m).to;
        }
        route
    }

    pub fn scaled(&self, factor: f64) -> Demand {
        let mut out = self.clone();
        for (_, pieces) in &mut out.entries {
            for p in pieces.iter_mut() {
                p.1 *= factor;
            }
        }
        out
    }
}

fn pick(ratios: &[(MovementId, f64)], u: f64) -> Option<MovementId> {
    let mut acc = 0.0;
    for &(m, r) in ratios {
        acc += r;
        if u < acc {
            return Some(m);
        }
    }
    ratios.iter().rev().find(|(_, r)| *r > 0.0).map(|(m, _)| *m)
}

fn sample_poisson(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    use rand_distr::{Distribution, Poisson};
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenarios;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn piecewise_rates() {
        let net = scenarios::isolated_network();
        let mut profile = scenarios::isolated_demand(600.0);
        profile.entries[0].rates = vec![[0.0, 100.0], [1800.0, 300.0]];
        let d = Demand::resolve(&profile, &net).unwrap();
        let link = net.link_by_name(&profile.entries[0].link).unwrap();
        assert_eq!(d.rate_at(link, 0.0), 100.0);
        assert_eq!(d.rate_at(link, 1799.5), 100.0);
        assert_eq!(d.rate_at(link, 1800.0), 300.0);
        assert!((d.mean_rate(link, 3600.0) - 200.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_sum_checked() {
        let net = scenarios::isolated_network();
        let mut profile = scenarios::isolated_demand(600.0);
        for r in profile.turning[0].ratios.values_mut() {
            *r = 0.4;
        }
        assert!(matches!(
            Demand::resolve(&profile, &net),
            Err(DemandError::RatioSum { .. })
        ));
    }

    #[test]
    fn routes_end_at_exits() {
        let net = scenarios::grid_network(3, 3);
        let d = Demand::resolve(&scenarios::grid_demand(&net, 300.0), &net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for entry in d.entries().collect::<Vec<_>>() {
            for _ in 0..50 {
                let route = d.sample_route(&net, entry, &mut rng);
                let last = net.movement(*route.last().unwrap()).to;
                assert!(net.link(last).is_exit);
                for w in route.windows(2) {
                    assert_eq!(net.movement(w[0]).to, net.movement(w[1]).from);
                }
            }
        }
    }

    #[test]
    fn zero_rate_never_spawns() {
        let net = scenarios::isolated_network();
        let d = Demand::resolve(&scenarios::isolated_demand(0.0), &net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for tick in 0..7200 {
            assert!(d
                .arrivals(tick as f64 * 0.5, 0.5, &mut rng)
                .iter()
                .all(|(_, n)| *n == 0));
        }
    }
}
