use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances by `step_secs` on every reading.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicI64,
    step_secs: i64,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step_secs: i64) -> Self {
        SteppingClock {
            next: AtomicI64::new(start.timestamp()),
            step_secs,
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let t = self.next.fetch_add(self.step_secs, Ordering::SeqCst);
        DateTime::from_timestamp(t, 0).expect("timestamp in range")
    }
}
