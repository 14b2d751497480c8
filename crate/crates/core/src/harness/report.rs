//! Report files for a finished sweep.
//!
//! Layout of the output directory:
//! - `delay.csv`, `throughput.csv`, `max_queue.csv`, `in_system.csv`: one row
//!   per (run, window) with columns
//!   `window_start,window_end,controller,penetration,seed,value`;
//! - `metrics.csv` or `metrics.jsonl`: the same rows in long format with a
//!   `metric` column, for plotting;
//! - `runs.csv`: one summary row per run, including failures;
//! - `results.jsonl`: the raw results, reloadable by `bpeq report`;
//! - `summary.txt`: controllers ranked by mean delay per penetration.

use super::sweep::{RunKey, SweepResults};
use crate::control::ControllerKind;
use crate::simulation::MetricsWindow;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path} line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(format!("unknown format `{s}` (csv, jsonl)")),
        }
    }
}

/// Per-window metrics written to their own files.
pub const METRICS: [(&str, fn(&MetricsWindow) -> f64); 4] = [
    ("delay", |w| w.average_delay),
    ("throughput", |w| w.throughput as f64),
    ("max_queue", |w| w.max_stopped_queue),
    ("in_system", |w| w.in_system as f64),
];

#[derive(Serialize)]
struct MetricRow<'a> {
    window_start: f64,
    window_end: f64,
    controller: &'a str,
    penetration: f64,
    seed: u64,
    value: f64,
}

#[derive(Serialize)]
struct LongRow<'a> {
    controller: &'a str,
    penetration: f64,
    seed: u64,
    window_start: f64,
    window_end: f64,
    metric: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct RunRow<'a> {
    controller: &'a str,
    penetration: f64,
    seed: u64,
    status: &'a str,
    mean_delay: Option<f64>,
    throughput: Option<u64>,
    peak_queue: Option<f64>,
    agreement: Option<f64>,
    error: Option<&'a str>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn windows(results: &SweepResults) -> impl Iterator<Item = (&RunKey, &MetricsWindow)> {
    results
        .runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|o| (&r.key, o)))
        .flat_map(|(k, o)| o.windows.iter().map(move |w| (k, w)))
}

/// Writes every report file into `dir`, creating it if needed. Returns the
/// paths written.
pub fn emit_report(
    results: &SweepResults,
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>, ReportError> {
    if results.runs.is_empty() {
        return Err(ReportError::Empty);
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    for (name, get) in METRICS {
        let path = dir.join(format!("{name}.csv"));
        write_csv(
            &path,
            windows(results).map(|(k, w)| MetricRow {
                window_start: w.start,
                window_end: w.end,
                controller: &k.controller,
                penetration: k.penetration,
                seed: k.seed,
                value: get(w),
            }),
        )?;
        written.push(path);
    }

    let long = windows(results).flat_map(|(k, w)| {
        METRICS.iter().map(move |(name, get)| LongRow {
            controller: &k.controller,
            penetration: k.penetration,
            seed: k.seed,
            window_start: w.start,
            window_end: w.end,
            metric: name,
            value: get(w),
        })
    });
    match format {
        Format::Csv => {
            let path = dir.join("metrics.csv");
            write_csv(&path, long)?;
            written.push(path);
        }
        Format::Jsonl => {
            let path = dir.join("metrics.jsonl");
            let mut out = BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
            for row in long {
                let line = serde_json::to_string(&row).expect("rows serialize");
                writeln!(out, "{line}").map_err(io_err(&path))?;
            }
            out.flush().map_err(io_err(&path))?;
            written.push(path);
        }
    }

    let path = dir.join("runs.csv");
    write_csv(
        &path,
        results.runs.iter().map(|r| {
            let s = r.summary();
            RunRow {
                controller: &r.key.controller,
                penetration: r.key.penetration,
                seed: r.key.seed,
                status: if s.is_some() { "ok" } else { "failed" },
                mean_delay: s.as_ref().map(|s| s.mean_delay),
                throughput: s.as_ref().map(|s| s.throughput),
                peak_queue: s.as_ref().map(|s| s.peak_queue),
                agreement: s.as_ref().and_then(|s| s.agreement),
                error: r.outcome.as_ref().err().map(String::as_str),
            }
        }),
    )?;
    written.push(path);

    let path = dir.join("results.jsonl");
    write_results(results, &path)?;
    written.push(path);

    let path = dir.join("summary.txt");
    fs::write(&path, summary(results)).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

/// Raw results: a header line with the scenario, then one run per line.
fn write_results(results: &SweepResults, path: &Path) -> Result<(), ReportError> {
    let mut out = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    let header = serde_json::json!({ "scenario": results.scenario, "duration": results.duration });
    writeln!(out, "{header}").map_err(io_err(path))?;
    for r in &results.runs {
        let line = serde_json::to_string(r).expect("runs serialize");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Reads a `results.jsonl` written by [`emit_report`].
pub fn read_results(path: &Path) -> Result<SweepResults, ReportError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let json_err = |line: usize| {
        move |source| ReportError::Json {
            path: path.to_path_buf(),
            line,
            source,
        }
    };
    let mut lines = io::BufReader::new(file).lines();
    let Some(first) = lines.next() else {
        return Err(ReportError::Empty);
    };
    let header: serde_json::Value =
        serde_json::from_str(&first.map_err(io_err(path))?).map_err(json_err(1))?;
    let mut runs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        runs.push(serde_json::from_str(&line).map_err(json_err(i + 2))?);
    }
    Ok(SweepResults {
        scenario: header["scenario"].as_str().unwrap_or_default().to_string(),
        duration: header["duration"].as_f64().unwrap_or_default(),
        runs,
    })
}

/// Seed-mean delay per (penetration, controller), successful runs only.
pub fn mean_delays(results: &SweepResults) -> BTreeMap<(u64, String), (f64, usize)> {
    let mut acc: BTreeMap<(u64, String), (f64, usize)> = BTreeMap::new();
    for r in &results.runs {
        if let Some(s) = r.summary() {
            let e = acc
                .entry((r.key.penetration.to_bits(), r.key.controller.clone()))
                .or_default();
            e.0 += s.mean_delay;
            e.1 += 1;
        }
    }
    for v in acc.values_mut() {
        v.0 /= v.1 as f64;
    }
    acc
}

/// Plain-text ranking of controllers by seed-mean delay at each penetration.
pub fn summary(results: &SweepResults) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", results.scenario);
    let _ = writeln!(s, "duration: {} s", results.duration);
    let ok = results.runs.iter().filter(|r| r.outcome.is_ok()).count();
    let _ = writeln!(s, "runs: {} ok, {} failed", ok, results.runs.len() - ok);

    let mut by_p: BTreeMap<u64, Vec<(String, f64, usize)>> = BTreeMap::new();
    for ((p, c), (d, n)) in mean_delays(results) {
        by_p.entry(p).or_default().push((c, d, n));
    }
    let mut by_p: Vec<_> = by_p
        .into_iter()
        .map(|(p, v)| (f64::from_bits(p), v))
        .collect();
    by_p.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (p, mut rows) in by_p {
        rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let _ = writeln!(s, "\npenetration {p}: controllers by mean delay (s/veh)");
        for (rank, (c, d, n)) in rows.iter().enumerate() {
            let _ = writeln!(s, "  {}. {c:<10} {d:>9.2}  ({n} seeds)", rank + 1);
        }
    }

    let fixed = ControllerKind::Fixed.as_str();
    if results
        .runs
        .iter()
        .any(|r| r.key.controller == fixed || r.key.controller == "mixed")
    {
        let _ = writeln!(
            s,
            "\nnote: `fixed` plans not given in the config are Webster plans with travel-time offsets, a stand-in for a \
             simulation-optimized coordinated plan."
        );
    }
    let failed: Vec<_> = results.failures().collect();
    if !failed.is_empty() {
        let _ = writeln!(s, "\nfailed runs:");
        for r in failed {
            let _ = writeln!(
                s,
                "  {} p={} seed={}: {}",
                r.key.controller,
                r.key.penetration,
                r.key.seed,
                r.outcome.as_ref().err().map_or("", String::as_str)
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::RunRecord;
    use crate::simulation::ScenarioOutcome;

    fn outcome(delays: &[f64]) -> ScenarioOutcome {
        ScenarioOutcome {
            seed: 0,
            duration: 600.0 * delays.len() as f64,
            windows: delays
                .iter()
                .enumerate()
                .map(|(i, &d)| MetricsWindow {
                    start: 600.0 * i as f64,
                    end: 600.0 * (i + 1) as f64,
                    average_delay: d,
                    throughput: 10,
                    max_stopped_queue: 7.0,
                    in_system: 3,
                })
                .collect(),
            in_system: vec![],
            spawned: 0,
            exited: 0,
            agreement: vec![],
            stale_slots: 0,
            events: vec![],
            probes: vec![],
        }
    }

    fn record(controller: &str, seed: u64, delays: &[f64]) -> RunRecord {
        RunRecord {
            key: RunKey {
                controller: controller.into(),
                penetration: 1.0,
                seed,
            },
            outcome: Ok(outcome(delays)),
        }
    }

    fn results(runs: Vec<RunRecord>) -> SweepResults {
        SweepResults {
            scenario: "t".into(),
            duration: 3600.0,
            runs,
        }
    }

    #[test]
    fn six_windows_six_rows() {
        let dir = tempfile::tempdir().unwrap();
        let res = results(vec![record("bp_eq", 0, &[1.0; 6])]);
        emit_report(&res, dir.path(), Format::Csv).unwrap();
        let text = fs::read_to_string(dir.path().join("delay.csv")).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("window_start,window_end,controller,penetration,seed,value\n"));
        let long = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(long.lines().count(), 1 + 6 * METRICS.len());
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(&results(vec![]), dir.path(), Format::Csv).unwrap_err();
        assert_eq!(err.to_string(), "nothing to report");
    }

    #[test]
    fn ranking_follows_mean_delay() {
        let res = results(vec![
            record("fixed", 0, &[30.0, 50.0]),
            record("bp_eq", 0, &[20.0, 20.0]),
            record("fixed", 1, &[40.0]),
            record("bp_eq", 1, &[60.0]),
        ]);
        // bp_eq: (20 + 60) / 2 = 40; fixed: (40 + 40) / 2 = 40 -> tie broken by name.
        let s = summary(&res);
        let bp = s.find("1. bp_eq").unwrap();
        assert!(s.find("2. fixed").unwrap() > bp);
        assert!(s.contains("stand-in"));
        let res = results(vec![
            record("fixed", 0, &[10.0]),
            record("bp_eq", 0, &[20.0]),
        ]);
        let s = summary(&res);
        assert!(s.find("1. fixed").unwrap() < s.find("2. bp_eq").unwrap());
    }

    #[test]
    fn results_round_trip_and_failures() {
        let dir = tempfile::tempdir().unwrap();
        let mut failed = record("bp_eq", 1, &[]);
        failed.outcome = Err("boom".into());
        let res = results(vec![record("bp_eq", 0, &[3.0, 4.0]), failed]);
        emit_report(&res, dir.path(), Format::Jsonl).unwrap();
        let back = read_results(&dir.path().join("results.jsonl")).unwrap();
        assert_eq!(back, res);
        let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
        assert!(runs.contains("failed") && runs.contains("boom"));
        assert!(dir.path().join("metrics.jsonl").exists());
    }

    #[test]
    fn unwritable_dir() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let res = results(vec![record("bp_eq", 0, &[1.0])]);
        assert!(matches!(
            emit_report(&res, &file.join("sub"), Format::Csv),
            Err(ReportError::Io { .. })
        ));
    }
}
