//! Backpressure traffic signal control driven by queue lengths estimated from
//! connected-vehicle probe data, with a seeded microscopic simulator and an
//! experiment harness.
//!
//! - [`network`]: links, lanes, cells, movements, phases and their validation.
//! - [`estimation`]: kernel speed interpolation, speed-to-density conversion and link queues.
//! - [`control`]: backpressure phase selection and the fixed-timing baseline.
//! - [`simulation`]: vehicles, signals, probes and metrics.
//! - [`harness`]: configs, sweeps, reports and the `bpeq` CLI.

pub mod control;
pub mod estimation;
pub mod harness;
pub mod network;
pub mod simulation;
