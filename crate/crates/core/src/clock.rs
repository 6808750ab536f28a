//! Timestamp sources. Logs stay byte-identical across replays only when the
//! timestamp is a function of the record position, so tests use
//! [`LogicalClock`].

use chrono::{DateTime, TimeZone, Utc};

pub trait Clock: Send + Sync {
    /// Timestamp for the `seq`-th event of a log.
    fn timestamp(&self, seq: u64) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn timestamp(&self, _seq: u64) -> DateTime<Utc> {
        Utc::now()
    }
}

/// `epoch + seq` seconds.
#[derive(Debug, Clone, Copy)]
pub struct LogicalClock {
    epoch: DateTime<Utc>,
}

impl LogicalClock {
    pub fn new(epoch: DateTime<Utc>) -> Self {
        Self { epoch }
    }
}

impl Default for LogicalClock {
    fn default() -> Self {
        Self { epoch: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap() }
    }
}

impl Clock for LogicalClock {
    fn timestamp(&self, seq: u64) -> DateTime<Utc> {
        self.epoch + chrono::Duration::seconds(seq as i64)
    }
}
