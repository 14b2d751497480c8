use super::Vehicle;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Aggregates over one evaluation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsWindow {
    pub start: f64,
    pub end: f64,
    /// Mean delay (s/veh) of trips completed in the window; 0 when none completed.
    pub average_delay: f64,
    /// Vehicles that left the network in the window.
    pub throughput: u64,
    /// Longest stopped queue (m) seen on any lane at any tick of the window.
    pub max_stopped_queue: f64,
    /// Vehicles in the network or waiting to enter it, at window end.
    pub in_system: u64,
}

/// Length (m) of the run of stopped vehicles reaching back from the stop line.
///
/// `vehicles` are ordered front (nearest the stop line) first. The run starts
/// only if the front vehicle is stopped within one jam spacing of the stop
/// line; it continues while successive vehicles are stopped and no more than
/// 1.5 jam spacings apart. Each vehicle occupies one jam spacing.
pub fn stopped_queue_length(
    vehicles: &VecDeque<Vehicle>,
    link_length: f64,
    jam_spacing: f64,
    stop_speed: f64,
) -> f64 {
    let mut iter = vehicles.iter();
    let Some(front) = iter.next() else {
        return 0.0;
    };
    if front.speed >= stop_speed || front.x < link_length - jam_spacing {
        return 0.0;
    }
    let mut tail = front.x;
    for v in iter {
        if v.speed >= stop_speed || tail - v.x > 1.5 * jam_spacing {
            break;
        }
        tail = v.x;
    }
    (link_length - tail + jam_spacing).min(link_length)
}

#[derive(Clone, Debug, Default)]
pub(crate) struct WindowAccumulator {
    delay_sum: f64,
    completed: u64,
    max_queue: f64,
}

impl WindowAccumulator {
    pub fn record_exit(&mut self, delay: f64) {
        self.delay_sum += delay;
        self.completed += 1;
    }

    pub fn record_queue(&mut self, length: f64) {
        self.max_queue = self.max_queue.max(length);
    }

    pub fn flush(&mut self, start: f64, end: f64, in_system: u64) -> MetricsWindow {
        let w = MetricsWindow {
            start,
            end,
            average_delay: if self.completed > 0 {
                self.delay_sum / self.completed as f64
            } else {
                0.0
            },
            throughput: self.completed,
            max_stopped_queue: self.max_queue,
            in_system,
        };
        *self = WindowAccumulator::default();
        w
    }
}
