//! Cross-product experiments over controllers, penetration rates and seeds.

use super::config::{ConfigError, ControllerAssignment, Scenario, ScenarioConfig, SweepSection};
use crate::control::ControllerKind;
use crate::simulation::{run_scenario, ScenarioOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub controller: String,
    pub penetration: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: RunKey,
    pub outcome: Result<ScenarioOutcome, String>,
}

/// Per-run aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean_delay: f64,
    pub throughput: u64,
    pub peak_queue: f64,
    pub agreement: Option<f64>,
}

impl RunRecord {
    pub fn summary(&self) -> Option<RunSummary> {
        let o = self.outcome.as_ref().ok()?;
        Some(RunSummary {
            mean_delay: o.mean_delay(),
            throughput: o.total_throughput(),
            peak_queue: o.max_stopped_queue(),
            agreement: o.agreement_rate(),
        })
    }
}

/// Everything a sweep produced, in axis order: controller, penetration, seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    /// Scenario label, used as the demand regime in summaries.
    pub scenario: String,
    pub duration: f64,
    pub runs: Vec<RunRecord>,
}

impl SweepResults {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.outcome.is_err())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub controllers: Vec<ControllerKind>,
    pub penetrations: Vec<f64>,
    pub seeds: Vec<u64>,
    pub max_runs: usize,
}

impl SweepSpec {
    /// The config's own sweep section, or the config's single point.
    pub fn from_config(cfg: &ScenarioConfig) -> SweepSpec {
        match &cfg.sweep {
            Some(SweepSection {
                penetrations,
                controllers,
                replications,
                max_runs,
            }) => SweepSpec {
                controllers: controllers.clone(),
                penetrations: penetrations.clone(),
                seeds: replications.map_or_else(|| cfg.seeds.clone(), |n| (0..n).collect()),
                max_runs: *max_runs,
            },
            None => SweepSpec {
                controllers: Vec::new(),
                penetrations: vec![cfg.penetration],
                seeds: cfg.seeds.clone(),
                max_runs: SweepSection::default().max_runs,
            },
        }
    }

    pub fn run_count(&self) -> usize {
        self.controllers.len().max(1) * self.penetrations.len() * self.seeds.len()
    }
}

/// Runs every (controller, penetration, seed) point of `spec` in parallel.
///
/// An empty controller axis keeps the scenario's own assignment. Failed runs
/// are recorded and the rest of the sweep continues.
pub fn run_sweep(scenario: &Scenario, spec: &SweepSpec) -> Result<SweepResults, ConfigError> {
    let invalid = |message: String| ConfigError::Invalid {
        key: "sweep".into(),
        line: None,
        message,
    };
    if spec.penetrations.is_empty() || spec.seeds.is_empty() {
        return Err(invalid("axes must be nonempty".into()));
    }
    if spec.run_count() > spec.max_runs {
        return Err(invalid(format!(
            "{} runs exceed the cap of {}",
            spec.run_count(),
            spec.max_runs
        )));
    }
    let assignments: Vec<ControllerAssignment> = if spec.controllers.is_empty() {
        vec![scenario.config.controller.clone()]
    } else {
        spec.controllers
            .iter()
            .map(|&k| ControllerAssignment::Uniform(k))
            .collect()
    };
    let names: Vec<String> = scenario
        .network
        .intersections()
        .iter()
        .map(|n| n.name.clone())
        .collect();
    let mut points = Vec::new();
    for a in &assignments {
        let mut cfg = scenario.config.clone();
        cfg.controller = a.clone();
        let mut sim = cfg.sim_config(&names)?;
        sim.fixed_plans = scenario.sim.fixed_plans.clone();
        for &p in &spec.penetrations {
            for &seed in &spec.seeds {
                let mut sim = sim.clone();
                sim.sim.penetration = p;
                points.push((a.label(), p, seed, sim));
            }
        }
    }
    let duration = scenario.config.duration_s;
    let runs = points
        .into_par_iter()
        .map(|(controller, penetration, seed, sim)| {
            let outcome = run_scenario(&scenario.network, &scenario.demand, sim, seed, duration)
                .map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("{controller} p={penetration} seed={seed} failed: {e}");
            }
            RunRecord {
                key: RunKey {
                    controller,
                    penetration,
                    seed,
                },
                outcome,
            }
        })
        .collect();
    Ok(SweepResults {
        scenario: scenario.config.label(),
        duration,
        runs,
    })
}
