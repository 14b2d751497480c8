//! `bpeq` command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 one or more runs failed,
//! 3 report could not be written.

use super::config::{load_config, ConfigError, ScenarioConfig, SweepSection};
use super::report::{emit_report, read_results, Format, ReportError};
use super::sweep::{run_sweep, SweepResults, SweepSpec};
use crate::control::ControllerKind;
use crate::estimation::replay::{batches, read_log, write_reading, PROBE_LOG_HEADER};
use crate::estimation::{estimate_cell_field, link_queue, ProbeHistory};
use crate::simulation::events::write_jsonl;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Default output directory when neither the command line nor the config sets one.
pub const OUT_DIR_ENV: &str = "BPEQ_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "bpeq-out";

#[derive(Parser, Debug)]
#[command(
    name = "bpeq",
    version,
    about = "Backpressure signal control with estimated queues"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a scenario config and print the resolved setup.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a scenario for each of its seeds and write a report.
    Run(RunArgs),
    /// Run a controller x penetration x seed sweep and write a report.
    Sweep(SweepArgs),
    /// Rebuild report files from a saved `results.jsonl`.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Estimate link queues offline from a probe log.
    ReplayEstimate {
        /// Scenario config supplying the network and estimator parameters.
        #[arg(long)]
        config: PathBuf,
        /// Probe log (`vehicle,lane,x,t,v` lines).
        #[arg(long)]
        log: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Output directory; overrides the config and $BPEQ_OUT_DIR.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replaces the config's seed list; repeatable.
    #[arg(long)]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub penetration: Option<f64>,
    #[arg(long)]
    pub controller: Option<ControllerKind>,
    /// Seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Also write each run's event log and probe log.
    #[arg(long)]
    pub logs: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Scenario config; its `[sweep]` table gives the axes.
    #[arg(long, conflicts_with = "sweep", required_unless_present = "sweep")]
    pub config: Option<PathBuf>,
    /// Sweep file: `base = "<scenario config>"` plus the axes.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Replaces the penetration axis; repeatable.
    #[arg(long)]
    pub penetration: Vec<f64>,
    /// Replaces the controller axis; repeatable.
    #[arg(long)]
    pub controller: Vec<ControllerKind>,
    /// Replaces the seed list; repeatable.
    #[arg(long)]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

#[derive(Deserialize)]
struct SweepFile {
    base: PathBuf,
    #[serde(flatten)]
    axes: SweepSection,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Run(String),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(_) => 2,
            CliError::Report(_) => 3,
        }
    }
}

/// Runs the parsed command; the caller maps errors to exit codes.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Report { input, output } => {
            let results = read_results(&input)?;
            let dir = out_dir(&output, None);
            report(&results, &dir, output.format)
        }
        Command::ReplayEstimate { config, log, out } => replay(&config, &log, out.as_deref()),
    }
}

/// Parses `args`, executes, prints errors and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn out_dir(output: &OutputArgs, config: Option<&ScenarioConfig>) -> PathBuf {
    output
        .out_dir
        .clone()
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn validate(path: &Path) -> Result<(), CliError> {
    let cfg = load_config(path)?;
    let sc = cfg.resolve(base_dir(path))?;
    let spec = SweepSpec::from_config(&cfg);
    println!("{}: ok", path.display());
    println!(
        "  network: {} links, {} lanes, {} intersections",
        sc.network.links().len(),
        sc.network.lanes().len(),
        sc.network.intersections().len()
    );
    println!("  controller: {}", cfg.controller.label());
    println!(
        "  duration {} s, window {} s, seeds {:?}, penetration {}",
        cfg.duration_s, cfg.metrics_window_s, spec.seeds, cfg.penetration
    );
    if cfg.sweep.is_some() {
        println!("  sweep: {} runs", spec.run_count());
    }
    Ok(())
}

fn apply_overrides(cfg: &mut ScenarioConfig, seeds: &[u64], duration: Option<f64>) {
    if !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    if let Some(d) = duration {
        cfg.duration_s = d;
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, &args.seed, args.duration);
    if let Some(p) = args.penetration {
        cfg.penetration = p;
    }
    if let Some(k) = args.controller {
        cfg.controller = super::config::ControllerAssignment::Uniform(k);
    }
    if args.logs {
        cfg.simulation.record_events = true;
        cfg.simulation.record_probes = true;
    }
    cfg.sweep = None;
    let sc = cfg.resolve(base_dir(&args.config))?;
    let results = run_sweep(&sc, &SweepSpec::from_config(&cfg))?;
    let dir = out_dir(&args.output, Some(&cfg));
    if args.logs {
        write_logs(&results, &sc.network, &dir)?;
    }
    report(&results, &dir, args.output.format)
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let (path, mut cfg) = match (&args.config, &args.sweep) {
        (Some(path), _) => (path.clone(), load_config(path)?),
        (None, Some(sweep)) => {
            let text = fs::read_to_string(sweep).map_err(|source| ConfigError::Io {
                path: sweep.clone(),
                source,
            })?;
            let file: SweepFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: sweep.clone(),
                message: e.to_string(),
            })?;
            let path = base_dir(sweep).join(&file.base);
            let mut cfg = load_config(&path)?;
            cfg.sweep = Some(file.axes);
            (path, cfg)
        }
        (None, None) => unreachable!("clap requires --config or --sweep"),
    };
    apply_overrides(&mut cfg, &args.seed, args.duration);
    let axes = cfg.sweep.get_or_insert_with(SweepSection::default);
    if !args.penetration.is_empty() {
        axes.penetrations = args.penetration.clone();
    }
    if !args.controller.is_empty() {
        axes.controllers = args.controller.clone();
    }
    if !args.seed.is_empty() {
        axes.replications = None;
    }
    let sc = cfg.resolve(base_dir(&path))?;
    let results = run_sweep(&sc, &SweepSpec::from_config(&cfg))?;
    report(
        &results,
        &out_dir(&args.output, Some(&cfg)),
        args.output.format,
    )
}

/// Writes the report, then fails with exit code 2 if any run failed.
fn report(results: &SweepResults, dir: &Path, format: Format) -> Result<(), CliError> {
    let written = emit_report(results, dir, format)?;
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    print!("{}", super::report::summary(results));
    let failed = results.failures().count();
    if failed > 0 {
        return Err(CliError::Run(format!(
            "{failed} of {} runs failed",
            results.runs.len()
        )));
    }
    Ok(())
}

fn write_logs(
    results: &SweepResults,
    network: &crate::network::Network,
    dir: &Path,
) -> Result<(), CliError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Report(ReportError::Io { path, source })
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for r in &results.runs {
        let Ok(o) = &r.outcome else { continue };
        let stem = format!(
            "{}_p{}_s{}",
            r.key.controller, r.key.penetration, r.key.seed
        );
        let path = dir.join(format!("events_{stem}.jsonl"));
        let mut out = BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
        write_jsonl(&mut out, &o.events).map_err(io_err(&path))?;
        out.flush().map_err(io_err(&path))?;

        let path = dir.join(format!("probes_{stem}.csv"));
        let mut out = BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
        writeln!(out, "{PROBE_LOG_HEADER}").map_err(io_err(&path))?;
        for p in &o.probes {
            write_reading(&mut out, network, p).map_err(io_err(&path))?;
        }
        out.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

/// Replays a probe log batch by batch and prints every link's estimated queue.
fn replay(config: &Path, log: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let sc = cfg.resolve(base_dir(config))?;
    let text = fs::read(log).map_err(|source| ConfigError::Io {
        path: log.to_path_buf(),
        source,
    })?;
    let readings = read_log(&text[..], &sc.network).map_err(|e| ConfigError::Parse {
        path: log.to_path_buf(),
        message: e.to_string(),
    })?;
    let params = sc.sim.estimator;
    let mut history = ProbeHistory::new(params.horizon);
    let mut rows = Vec::new();
    for (t, batch) in batches(&readings) {
        history
            .ingest(t, batch)
            .map_err(|e| CliError::Run(format!("probe log at t={t}: {e}")))?;
        let field = estimate_cell_field(&sc.network, &history, t, &params);
        for link in sc.network.links() {
            let q = link_queue(&sc.network, link.id, &field).expect("field covers every lane");
            rows.push((t, link.name.clone(), q));
        }
    }
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p).map_err(|source| ReportError::Io {
            path: p.to_path_buf(),
            source,
        })?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let path = out.map_or_else(|| PathBuf::from("-"), Path::to_path_buf);
    let csv_err = |source| ReportError::Csv {
        path: path.clone(),
        source,
    };
    w.write_record(["t", "link", "queue"]).map_err(csv_err)?;
    for (t, link, q) in rows {
        w.write_record([t.to_string(), link, q.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|source| ReportError::Io { path, source })?;
    Ok(())
}
