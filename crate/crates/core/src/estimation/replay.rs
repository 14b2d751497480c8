//! Line-delimited probe log: `vehicle,lane,x,t,v` per line.
//!
//! Lanes are referenced by name. Blank lines and lines starting with `#` are
//! ignored. The simulator writes the same format, so a run's probe log can be
//! replayed through the estimator offline.

use super::ProbeReading;
use crate::network::Network;
use std::io::{self, BufRead, Write};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("probe log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const PROBE_LOG_HEADER: &str = "# vehicle,lane,x,t,v";

pub fn write_reading(out: &mut impl Write, network: &Network, r: &ProbeReading) -> io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{}",
        r.vehicle,
        network.lane(r.lane).name,
        r.x,
        r.t,
        r.speed
    )
}

pub fn read_log(input: impl BufRead, network: &Network) -> Result<Vec<ProbeReading>, ReplayError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(
            parse_line(line, network).map_err(|message| ReplayError::Parse {
                line: i + 1,
                message,
            })?,
        );
    }
    Ok(out)
}

fn parse_line(line: &str, network: &Network) -> Result<ProbeReading, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let num = |i: usize, name: &str| {
        fields[i]
            .parse::<f64>()
            .map_err(|e| format!("bad {name} `{}`: {e}", fields[i]))
    };
    let vehicle = fields[0]
        .parse::<u64>()
        .map_err(|e| format!("bad vehicle id `{}`: {e}", fields[0]))?;
    let lane = network
        .lane_by_name(fields[1])
        .ok_or_else(|| format!("unknown lane `{}`", fields[1]))?;
    let (x, t, speed) = (num(2, "x")?, num(3, "t")?, num(4, "v")?);
    let length = network.link(network.lane(lane).link).length;
    if !(0.0..=length).contains(&x) {
        return Err(format!("x={x} outside lane `{}` [0, {length}]", fields[1]));
    }
    if !(speed >= 0.0) {
        return Err(format!("negative speed {speed}"));
    }
    Ok(ProbeReading {
        vehicle,
        lane,
        x,
        t,
        speed,
    })
}

/// Groups a time-sorted reading list into reporting batches sharing one timestamp.
pub fn batches(readings: &[ProbeReading]) -> Vec<(f64, &[ProbeReading])> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < readings.len() {
        let t = readings[start].t;
        let end = start + readings[start..].iter().take_while(|r| r.t == t).count();
        out.push((t, &readings[start..end]));
        start = end;
    }
    out
}
