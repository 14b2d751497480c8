//! Event log records, written one JSON object per line.
//!
//! ```text
//! {"tick":12,"t":6.0,"event":"spawn","vehicle":3,"link":"n_in","connected":true}
//! {"tick":12,"t":6.0,"event":"enter","vehicle":3,"lane":"n_in/1"}
//! {"tick":80,"t":40.0,"event":"cross","vehicle":3,"movement":"n_through"}
//! {"tick":140,"t":70.0,"event":"exit","vehicle":3,"delay":4.5}
//! {"tick":20,"t":10.0,"event":"phase_switch","intersection":"c","from":"c:NS_through","to":"c:EW_through","lost_time":5.0}
//! {"tick":20,"t":10.0,"event":"probe","vehicle":3,"lane":"n_in/1","x":120.0,"v":16.6}
//! ```

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Spawn {
        vehicle: u64,
        link: String,
        connected: bool,
    },
    Enter {
        vehicle: u64,
        lane: String,
    },
    Cross {
        vehicle: u64,
        movement: String,
    },
    Exit {
        vehicle: u64,
        delay: f64,
    },
    PhaseSwitch {
        intersection: String,
        from: Option<String>,
        to: String,
        lost_time: f64,
    },
    Probe {
        vehicle: u64,
        lane: String,
        x: f64,
        v: f64,
    },
}

pub fn write_jsonl(out: &mut impl std::io::Write, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
