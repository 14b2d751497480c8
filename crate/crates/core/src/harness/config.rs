//! Scenario configuration files.
//!
//! A scenario is a TOML document. Only `network` and `demand` are required;
//! everything else falls back to the defaults below.
//!
//! ```toml
//! name = "isolated-high"
//! network = "builtin:isolated"        # or a path to a network document
//! demand = "builtin:isolated_high"    # or a path, or an inline table
//! controller = "bp_eq"                # or { default = "bp_eq", overrides = { c = "fixed" } }
//! penetration = 0.3
//! seeds = [0, 1, 2, 3, 4]
//! duration_s = 3600
//! metrics_window_s = 600
//!
//! [estimator]
//! sigma_m = 20
//!
//! [sweep]
//! penetrations = [0.1, 0.2, 0.3, 1.0]
//! controllers = ["bp_eq", "fixed"]
//! ```
//!
//! Speeds are in km/h and densities in veh/km, as their key suffixes say;
//! everything is converted to SI on resolution.

use crate::control::{
    optimize_fixed_timing, ControlTiming, ControllerKind, FixedStage, FixedTimingPlan,
    SaturationParams, WebsterLimits,
};
use crate::estimation::{EstimatorParams, KMH, VEH_PER_KM};
use crate::harness::scenarios;
use crate::network::{Network, NetworkDocument, TurnKind};
use crate::simulation::{Demand, DemandProfile, SimConfig, SimParams, VehicleDynamics};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{}{key}: {message}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid {
        key: String,
        line: Option<usize>,
        message: String,
    },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            line: None,
            message: message.into(),
        }
    }

    /// Attaches the line of `key` in `source`, when it can be found.
    fn locate(self, source: &str) -> Self {
        match self {
            ConfigError::Invalid {
                key,
                line: None,
                message,
            } => {
                let line = key_line(source, &key);
                ConfigError::Invalid { key, line, message }
            }
            other => other,
        }
    }
}

/// First line assigning the last segment of a dotted `key`, 1-based.
fn key_line(source: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next()?;
    source
        .lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(leaf)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Demand: a builtin profile name, a path to a profile document, or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSource {
    Named(String),
    Inline(DemandProfile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControllerAssignment {
    Uniform(ControllerKind),
    PerIntersection {
        default: ControllerKind,
        #[serde(default)]
        overrides: BTreeMap<String, ControllerKind>,
    },
}

impl Default for ControllerAssignment {
    fn default() -> Self {
        ControllerAssignment::Uniform(ControllerKind::BpEq)
    }
}

impl ControllerAssignment {
    /// Short label used in reports: the kind, or `mixed`.
    pub fn label(&self) -> String {
        match self {
            ControllerAssignment::Uniform(k) => k.to_string(),
            ControllerAssignment::PerIntersection { default, overrides } => {
                if overrides.values().all(|k| k == default) {
                    default.to_string()
                } else {
                    "mixed".to_string()
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub step_s: f64,
    pub reporting_interval_s: f64,
    pub probe_noise_m: f64,
    pub stop_speed_kmh: f64,
    pub sample_interval_s: f64,
    /// Defaults to on in debug builds.
    pub check_invariants: Option<bool>,
    pub record_events: bool,
    pub record_probes: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let p = SimParams::default();
        SimulationSection {
            step_s: p.step,
            reporting_interval_s: p.reporting_interval,
            probe_noise_m: p.probe_noise,
            stop_speed_kmh: p.stop_speed / KMH,
            sample_interval_s: p.sample_interval,
            check_invariants: None,
            record_events: false,
            record_probes: false,
        }
    }
}

/// Fundamental-diagram parameters shared by the vehicles and the estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    pub free_flow_speed_kmh: f64,
    pub shockwave_speed_kmh: f64,
    pub jam_density_veh_per_km: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        let d = VehicleDynamics::default();
        TrafficSection {
            free_flow_speed_kmh: d.free_flow_speed / KMH,
            shockwave_speed_kmh: d.shockwave_speed / KMH,
            jam_density_veh_per_km: d.jam_density / VEH_PER_KM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub sigma_m: f64,
    /// Defaults to half the reporting interval.
    pub tau_s: Option<f64>,
    pub horizon_s: f64,
    pub z_floor: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let e = EstimatorParams::default();
        EstimatorSection {
            sigma_m: e.sigma,
            tau_s: None,
            horizon_s: e.horizon,
            z_floor: e.z_floor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub slot_s: f64,
    pub yellow_s: f64,
    pub all_red_s: f64,
    pub saturation_flow_vph: f64,
    /// Applied to left-turn movements that set no factor of their own.
    pub left_turn_factor: Option<f64>,
}

impl Default for ControlSection {
    fn default() -> Self {
        let t = ControlTiming::default();
        ControlSection {
            slot_s: t.slot,
            yellow_s: t.yellow,
            all_red_s: t.all_red,
            saturation_flow_vph: SaturationParams::default().saturation_flow,
            left_turn_factor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageDoc {
    pub phase: String,
    pub green_s: f64,
    pub lost_s: f64,
}

/// Hand-written fixed plan for one intersection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPlanDoc {
    pub stages: Vec<StageDoc>,
    #[serde(default)]
    pub offset_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub penetrations: Vec<f64>,
    pub controllers: Vec<ControllerKind>,
    /// When set, replaces the seed list with `0..replications`.
    pub replications: Option<u64>,
    pub max_runs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            penetrations: vec![0.1, 0.2, 0.3, 1.0],
            controllers: vec![ControllerKind::BpEq, ControllerKind::Fixed],
            replications: None,
            max_runs: 1000,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_penetration() -> f64 {
    1.0
}

fn default_duration() -> f64 {
    3600.0
}

fn default_window() -> f64 {
    SimParams::default().metrics_window
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub network: String,
    pub demand: DemandSource,
    #[serde(default)]
    pub controller: ControllerAssignment,
    #[serde(default = "default_penetration")]
    pub penetration: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_window")]
    pub metrics_window_s: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub fixed_plans: BTreeMap<String, FixedPlanDoc>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

/// A configuration resolved against its network and demand.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub network: Network,
    pub demand: Demand,
    pub sim: SimConfig,
}

impl ScenarioConfig {
    /// A config naming only a network and a demand; everything else default.
    pub fn minimal(network: &str, demand: DemandSource) -> Self {
        ScenarioConfig {
            name: None,
            network: network.to_string(),
            demand,
            controller: ControllerAssignment::default(),
            penetration: default_penetration(),
            seeds: default_seeds(),
            duration_s: default_duration(),
            metrics_window_s: default_window(),
            output_dir: None,
            simulation: SimulationSection::default(),
            traffic: TrafficSection::default(),
            estimator: EstimatorSection::default(),
            control: ControlSection::default(),
            fixed_plans: BTreeMap::new(),
            sweep: None,
        }
    }

    pub fn from_toml(source: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(source).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| e.locate(source))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs serialize")
    }

    /// Display name: `name`, or the network reference.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.network.clone())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(
                    key,
                    format!("must be positive, got {v}"),
                ))
            }
        };
        check_penetration("penetration", self.penetration)?;
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid(
                "seeds",
                "at least one seed is required",
            ));
        }
        positive("duration_s", self.duration_s)?;
        positive("metrics_window_s", self.metrics_window_s)?;
        if !divides(self.metrics_window_s, self.duration_s) {
            return Err(ConfigError::invalid(
                "metrics_window_s",
                format!(
                    "window {} s does not divide duration {} s",
                    self.metrics_window_s, self.duration_s
                ),
            ));
        }
        let s = &self.simulation;
        positive("simulation.step_s", s.step_s)?;
        positive("simulation.reporting_interval_s", s.reporting_interval_s)?;
        positive("simulation.sample_interval_s", s.sample_interval_s)?;
        positive("simulation.stop_speed_kmh", s.stop_speed_kmh)?;
        if !(s.probe_noise_m >= 0.0 && s.probe_noise_m.is_finite()) {
            return Err(ConfigError::invalid(
                "simulation.probe_noise_m",
                "must be >= 0",
            ));
        }
        let t = &self.traffic;
        positive("traffic.free_flow_speed_kmh", t.free_flow_speed_kmh)?;
        positive("traffic.shockwave_speed_kmh", t.shockwave_speed_kmh)?;
        positive("traffic.jam_density_veh_per_km", t.jam_density_veh_per_km)?;
        let e = &self.estimator;
        positive("estimator.sigma_m", e.sigma_m)?;
        if let Some(tau) = e.tau_s {
            positive("estimator.tau_s", tau)?;
        }
        positive("estimator.horizon_s", e.horizon_s)?;
        positive("estimator.z_floor", e.z_floor)?;
        let c = &self.control;
        positive("control.slot_s", c.slot_s)?;
        positive("control.saturation_flow_vph", c.saturation_flow_vph)?;
        if c.yellow_s < 0.0 || c.all_red_s < 0.0 || c.yellow_s + c.all_red_s >= c.slot_s {
            return Err(ConfigError::invalid(
                "control.slot_s",
                "yellow + all-red must be non-negative and shorter than the slot",
            ));
        }
        if let Some(f) = c.left_turn_factor {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ConfigError::invalid(
                    "control.left_turn_factor",
                    "must be in (0, 1]",
                ));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.penetrations.is_empty() || sw.controllers.is_empty() {
                return Err(ConfigError::invalid("sweep", "axes must be nonempty"));
            }
            for &p in &sw.penetrations {
                check_penetration("sweep.penetrations", p)?;
            }
            if sw.replications == Some(0) {
                return Err(ConfigError::invalid(
                    "sweep.replications",
                    "must be at least 1",
                ));
            }
        }
        Ok(())
    }

    /// SI simulation parameters implied by the config.
    pub fn sim_config(&self, intersections: &[String]) -> Result<SimConfig, ConfigError> {
        let s = &self.simulation;
        let dynamics = VehicleDynamics {
            free_flow_speed: self.traffic.free_flow_speed_kmh * KMH,
            shockwave_speed: self.traffic.shockwave_speed_kmh * KMH,
            jam_density: self.traffic.jam_density_veh_per_km * VEH_PER_KM,
        };
        let mut estimator = EstimatorParams {
            sigma: self.estimator.sigma_m,
            tau: 0.0,
            horizon: self.estimator.horizon_s,
            free_flow_speed: dynamics.free_flow_speed,
            shockwave_speed: dynamics.shockwave_speed,
            jam_density: dynamics.jam_density,
            z_floor: self.estimator.z_floor,
        }
        .with_reporting_interval(s.reporting_interval_s);
        if let Some(tau) = self.estimator.tau_s {
            estimator.tau = tau;
        }
        let controllers = match &self.controller {
            ControllerAssignment::Uniform(k) => vec![*k; intersections.len()],
            ControllerAssignment::PerIntersection { default, overrides } => {
                if let Some(name) = overrides.keys().find(|n| !intersections.contains(n)) {
                    return Err(ConfigError::invalid(
                        "controller.overrides",
                        format!("unknown intersection `{name}`"),
                    ));
                }
                intersections
                    .iter()
                    .map(|n| overrides.get(n).copied().unwrap_or(*default))
                    .collect()
            }
        };
        Ok(SimConfig {
            sim: SimParams {
                step: s.step_s,
                reporting_interval: s.reporting_interval_s,
                penetration: self.penetration,
                stop_speed: s.stop_speed_kmh * KMH,
                probe_noise: s.probe_noise_m,
                metrics_window: self.metrics_window_s,
                sample_interval: s.sample_interval_s,
                check_invariants: s.check_invariants.unwrap_or(cfg!(debug_assertions)),
                record_events: s.record_events,
                record_probes: s.record_probes,
            },
            dynamics,
            estimator,
            saturation: SaturationParams {
                saturation_flow: self.control.saturation_flow_vph,
            },
            timing: ControlTiming {
                slot: self.control.slot_s,
                yellow: self.control.yellow_s,
                all_red: self.control.all_red_s,
            },
            controllers,
            fixed_plans: None,
        })
    }

    /// Loads the network and demand and builds the simulation config.
    /// Relative paths are taken from `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario, ConfigError> {
        self.validate()?;
        let network = self.load_network(base_dir)?;
        let profile = self.load_demand(base_dir, &network)?;
        let demand = Demand::resolve(&profile, &network)
            .map_err(|e| ConfigError::invalid("demand", e.to_string()))?;
        let names: Vec<String> = network
            .intersections()
            .iter()
            .map(|n| n.name.clone())
            .collect();
        let mut sim = self.sim_config(&names)?;
        if !self.fixed_plans.is_empty() {
            sim.fixed_plans = Some(self.fixed_plans(&network, &demand, &sim)?);
        }
        Ok(Scenario {
            config: self.clone(),
            network,
            demand,
            sim,
        })
    }

    fn load_network(&self, base_dir: &Path) -> Result<Network, ConfigError> {
        let mut doc = match self.network.strip_prefix(BUILTIN_PREFIX) {
            Some("isolated") => scenarios::isolated_document(),
            Some(grid) if grid.starts_with("grid") => {
                let (rows, cols) = parse_grid(grid).ok_or_else(|| {
                    ConfigError::invalid(
                        "network",
                        format!("bad grid `{grid}`, use grid or gridRxC"),
                    )
                })?;
                scenarios::grid_document(rows, cols)
            }
            Some(other) => {
                return Err(ConfigError::invalid(
                    "network",
                    format!("unknown builtin network `{other}`"),
                ))
            }
            None => {
                let path = base_dir.join(&self.network);
                let text = read(&path)?;
                NetworkDocument::from_toml(&text).map_err(|e| ConfigError::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
        };
        if let Some(f) = self.control.left_turn_factor {
            for m in doc
                .movements
                .iter_mut()
                .filter(|m| m.turn == TurnKind::Left)
            {
                m.turn_factor.get_or_insert(f);
            }
        }
        Network::build(&doc).map_err(|e| ConfigError::invalid("network", e.to_string()))
    }

    fn load_demand(
        &self,
        base_dir: &Path,
        network: &Network,
    ) -> Result<DemandProfile, ConfigError> {
        let name = match &self.demand {
            DemandSource::Inline(p) => return Ok(p.clone()),
            DemandSource::Named(name) => name,
        };
        let Some(builtin) = name.strip_prefix(BUILTIN_PREFIX) else {
            let path = base_dir.join(name);
            let text = read(&path)?;
            return toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path,
                message: e.to_string(),
            });
        };
        let isolated = || {
            if network.link_by_name("n_in").is_none() {
                Err(ConfigError::invalid(
                    "demand",
                    format!("`{name}` needs network builtin:isolated"),
                ))
            } else {
                Ok(())
            }
        };
        match builtin {
            "isolated_low" => isolated().map(|_| scenarios::isolated_low_demand()),
            "isolated_high" => isolated().map(|_| scenarios::isolated_high_demand(self.duration_s)),
            "grid" => {
                let sat = SaturationParams {
                    saturation_flow: self.control.saturation_flow_vph,
                };
                let timing = ControlTiming {
                    slot: self.control.slot_s,
                    yellow: self.control.yellow_s,
                    all_red: self.control.all_red_s,
                };
                Ok(scenarios::grid_default_demand(network, &sat, &timing))
            }
            other => Err(ConfigError::invalid(
                "demand",
                format!("unknown builtin demand `{other}`"),
            )),
        }
    }

    /// Webster plans for every intersection with the hand-written ones swapped in.
    fn fixed_plans(
        &self,
        network: &Network,
        demand: &Demand,
        sim: &SimConfig,
    ) -> Result<Vec<FixedTimingPlan>, ConfigError> {
        let mut plans = optimize_fixed_timing(
            network,
            demand,
            self.duration_s,
            &sim.saturation,
            &WebsterLimits::default(),
            sim.dynamics.free_flow_speed,
        );
        for (name, doc) in &self.fixed_plans {
            let key = format!("fixed_plans.{name}");
            let id = network.intersection_by_name(name).ok_or_else(|| {
                ConfigError::invalid(&key, format!("unknown intersection `{name}`"))
            })?;
            let n = network.intersection(id);
            let stages = doc
                .stages
                .iter()
                .map(|s| {
                    let phase = n
                        .phases
                        .iter()
                        .find(|p| p.name == s.phase || p.name == format!("{}:{}", n.name, s.phase))
                        .ok_or_else(|| {
                            ConfigError::invalid(&key, format!("unknown phase `{}`", s.phase))
                        })?;
                    Ok(FixedStage {
                        phase: phase.id,
                        green: s.green_s,
                        lost: s.lost_s,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            plans[id.0] = FixedTimingPlan::new(stages, doc.offset_s)
                .map_err(|e| ConfigError::invalid(&key, e.to_string()))?;
        }
        Ok(plans)
    }
}

fn check_penetration(key: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            key,
            format!("penetration {p} outside [0, 1]"),
        ))
    }
}

fn divides(window: f64, duration: f64) -> bool {
    let n = (duration / window).round();
    n >= 1.0 && (n * window - duration).abs() <= 1e-9 * duration
}

/// `grid` is 3x3; `gridRxC` sets the size.
fn parse_grid(s: &str) -> Option<(usize, usize)> {
    let rest = s.strip_prefix("grid")?;
    if rest.is_empty() {
        return Some((3, 3));
    }
    let (r, c) = rest.split_once('x')?;
    let (r, c) = (r.parse().ok()?, c.parse().ok()?);
    (r > 0 && c > 0).then_some((r, c))
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and validates a scenario config.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::from_toml(&read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "network = \"builtin:isolated\"\ndemand = \"builtin:isolated_low\"\n";

    fn parse(s: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::from_toml(s, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.penetration, 1.0);
        assert_eq!(cfg.seeds.len(), 5);
        let sc = cfg.resolve(Path::new(".")).unwrap();
        let s = &sc.sim;
        assert_eq!(s.timing, ControlTiming::default());
        assert_eq!(s.estimator, EstimatorParams::default());
        assert_eq!(s.dynamics, VehicleDynamics::default());
        assert_eq!(s.saturation.saturation_flow, 1800.0);
        assert_eq!(s.controllers, vec![ControllerKind::BpEq]);
        let left = sc.network.movement_by_name("c.n_left").unwrap();
        assert_eq!(sc.network.movement(left).turn_factor, 0.714);
        assert_eq!(
            sc.network.lane(sc.network.links()[0].lanes[0]).cells[0].length,
            10.0
        );
    }

    #[test]
    fn penetration_out_of_range() {
        let err = parse(&format!("{MINIMAL}penetration = 1.5\n")).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("line 3") && msg.contains("penetration"),
            "{msg}"
        );
    }

    #[test]
    fn window_must_divide_duration() {
        let err = parse(&format!(
            "{MINIMAL}duration_s = 3600\nmetrics_window_s = 420\n"
        ))
        .unwrap_err();
        assert!(err.to_string().contains("does not divide"), "{err}");
        assert!(err.to_string().starts_with("line 4"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse("network = \"builtin:isolated\"\ndemand = \n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse(&format!("{MINIMAL}colour = 1\n")).is_err());
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{MINIMAL}penetration = 0.3\nseeds = [7, 9]\n\
             controller = {{ default = \"bp_eq\", overrides = {{ c = \"fixed\" }} }}\n\
             [estimator]\nsigma_m = 30\ntau_s = 4\n[sweep]\npenetrations = [0.1]\ncontrollers = [\"fixed\"]\n"
        );
        let cfg = parse(&text).unwrap();
        let again = parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let sc = again.resolve(Path::new(".")).unwrap();
        assert_eq!(sc.sim.controllers, vec![ControllerKind::Fixed]);
        assert_eq!(sc.sim.estimator.tau, 4.0);
        assert_eq!(sc.sim.estimator.sigma, 30.0);
    }

    #[test]
    fn tau_follows_reporting_interval() {
        let cfg = parse(&format!(
            "{MINIMAL}[simulation]\nreporting_interval_s = 6\n"
        ))
        .unwrap();
        let sc = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(sc.sim.estimator.tau, 3.0);
    }

    #[test]
    fn fixed_plan_override() {
        let text = format!(
            "{MINIMAL}controller = \"fixed\"\n[fixed_plans.c]\nstages = [\
             {{ phase = \"NS_through\", green_s = 20, lost_s = 5 }}, \
             {{ phase = \"EW_through\", green_s = 20, lost_s = 5 }}]\n"
        );
        let sc = parse(&text).unwrap().resolve(Path::new(".")).unwrap();
        let plan = &sc.sim.fixed_plans.as_ref().unwrap()[0];
        assert_eq!(plan.cycle, 50.0);
        assert_eq!(plan.stages.len(), 2);
    }

    #[test]
    fn builtin_grid_sizes() {
        assert_eq!(parse_grid("grid"), Some((3, 3)));
        assert_eq!(parse_grid("grid2x4"), Some((2, 4)));
        assert_eq!(parse_grid("grid0x4"), None);
        let cfg = ScenarioConfig::minimal(
            "builtin:grid2x2",
            DemandSource::Named("builtin:grid".into()),
        );
        let sc = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(sc.network.intersections().len(), 4);
        let wrong = ScenarioConfig::minimal(
            "builtin:grid",
            DemandSource::Named("builtin:isolated_low".into()),
        );
        assert!(wrong.resolve(Path::new(".")).is_err());
    }
}
