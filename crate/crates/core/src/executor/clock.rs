use std::time::{Duration, Instant};

/// Source of supervisor ticks.
pub trait Clock {
    /// Blocks until `t_ms` after the start of the run.
    fn wait_until(&mut self, t_ms: u64);
}

/// Ticks advance instantly.
#[derive(Debug, Default, Clone, Copy)]
pub struct VirtualClock;

impl Clock for VirtualClock {
    fn wait_until(&mut self, _t_ms: u64) {}
}

#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    epoch: Instant,
}

impl WallClock {
    pub fn start() -> Self {
        WallClock {
            epoch: Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn wait_until(&mut self, t_ms: u64) {
        let target = self.epoch + Duration::from_millis(t_ms);
        let now = Instant::now();
        if target > now {
            std::thread::sleep(target - now);
        }
    }
}
