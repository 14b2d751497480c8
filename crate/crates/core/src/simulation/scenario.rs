use super::engine::Simulation;
use super::engine::SlotAgreement;
use super::{Demand, Event, MetricsWindow, SimConfig, SimError};
use crate::control::{optimize_fixed_timing, ControllerKind, WebsterLimits};
use crate::estimation::ProbeReading;
use crate::network::Network;
use serde::{Deserialize, Serialize};

/// Everything a finished run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub seed: u64,
    pub duration: f64,
    pub windows: Vec<MetricsWindow>,
    /// `(time, vehicles in system)` samples.
    pub in_system: Vec<(f64, u64)>,
    pub spawned: u64,
    pub exited: u64,
    /// Per-intersection agreement between estimated and perfect decisions (BP-EQ only).
    pub agreement: Vec<SlotAgreement>,
    /// Control slots that reused a stale estimate.
    pub stale_slots: u64,
    #[serde(skip)]
    pub events: Vec<Event>,
    #[serde(skip)]
    pub probes: Vec<ProbeReading>,
}

impl ScenarioOutcome {
    /// Delay averaged over all completed trips, weighting windows by throughput.
    pub fn mean_delay(&self) -> f64 {
        let n: u64 = self.windows.iter().map(|w| w.throughput).sum();
        if n == 0 {
            return 0.0;
        }
        self.windows
            .iter()
            .map(|w| w.average_delay * w.throughput as f64)
            .sum::<f64>()
            / n as f64
    }

    pub fn total_throughput(&self) -> u64 {
        self.windows.iter().map(|w| w.throughput).sum()
    }

    pub fn max_stopped_queue(&self) -> f64 {
        self.windows
            .iter()
            .map(|w| w.max_stopped_queue)
            .fold(0.0, f64::max)
    }

    /// Share of control slots where BP-EQ matched the perfect-queue choice.
    pub fn agreement_rate(&self) -> Option<f64> {
        let slots: u64 = self.agreement.iter().map(|a| a.slots).sum();
        (slots > 0)
            .then(|| self.agreement.iter().map(|a| a.agreed).sum::<u64>() as f64 / slots as f64)
    }
}

/// Runs one seeded simulation for `duration` seconds. Fixed plans, when
/// needed and not supplied, are built from the demand averaged over the run.
pub fn run_scenario(
    network: &Network,
    demand: &Demand,
    mut cfg: SimConfig,
    seed: u64,
    duration: f64,
) -> Result<ScenarioOutcome, SimError> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(SimError::Config(format!(
            "duration {duration} must be finite and >= 0"
        )));
    }
    if cfg.fixed_plans.is_none() && cfg.controllers.contains(&ControllerKind::Fixed) {
        cfg.fixed_plans = Some(optimize_fixed_timing(
            network,
            demand,
            duration,
            &cfg.saturation,
            &WebsterLimits::default(),
            cfg.dynamics.free_flow_speed,
        ));
    }
    let mut sim = Simulation::new(network, demand, cfg, seed)?;
    sim.run_until(duration)?;
    let (spawned, exited) = (sim.spawned(), sim.exited());
    let (windows, in_system, agreement, events, probes, stale_slots) = sim.take_outputs();
    Ok(ScenarioOutcome {
        seed,
        duration,
        windows,
        in_system,
        spawned,
        exited,
        agreement,
        stale_slots,
        events,
        probes,
    })
}
