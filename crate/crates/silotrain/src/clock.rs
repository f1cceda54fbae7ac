//! Wall-clock time source for training measurements.

use std::time::Instant;

use silotrain_core::protocol::Clock;

/// Microseconds since construction.
pub struct StdClock {
    start: Instant,
}

impl StdClock {
    pub fn new() -> Self {
        StdClock {
            start: Instant::now(),
        }
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now_micros(&mut self) -> u64 {
        self.start.elapsed().as_micros() as u64
    }
}
