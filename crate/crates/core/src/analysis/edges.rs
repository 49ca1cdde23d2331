use crate::domain::Session;
use crate::dut::Level;
use crate::engine::{Run, SignalCapture};

/// One rise-to-rise cycle, in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Cycle {
    pub period: u64,
    pub high: u64,
}

/// Sample-index view of a run list.
pub(crate) struct Edges {
    /// Start index of every run, plus the total sample count at the end.
    starts: Vec<u64>,
    levels: Vec<Level>,
    rises: Vec<u64>,
    falls: Vec<u64>,
}

impl Edges {
    pub fn new(runs: &[Run]) -> Self {
        let mut starts = Vec::with_capacity(runs.len() + 1);
        let mut rises = Vec::new();
        let mut falls = Vec::new();
        let mut pos = 0;
        for (i, run) in runs.iter().enumerate() {
            starts.push(pos);
            if i > 0 {
                match run.level {
                    Level::High => rises.push(pos),
                    Level::Low => falls.push(pos),
                }
            }
            pos += run.len;
        }
        starts.push(pos);
        Self {
            starts,
            levels: runs.iter().map(|r| r.level).collect(),
            rises,
            falls,
        }
    }

    /// Complete cycles whose two bounding rising edges both fall inside
    /// `[from, to)`, with the sample before each edge also inside.
    pub fn cycles(&self, from: u64, to: u64) -> Vec<Cycle> {
        let lo = self.rises.partition_point(|&r| r <= from);
        let hi = self.rises.partition_point(|&r| r < to);
        let rises = &self.rises[lo..hi.max(lo)];
        rises
            .windows(2)
            .map(|w| {
                let fall = self.falls[self.falls.partition_point(|&f| f <= w[0])];
                Cycle { period: w[1] - w[0], high: fall - w[0] }
            })
            .collect()
    }

    /// Number of high samples in `[from, to)`.
    pub fn high_samples(&self, from: u64, to: u64) -> u64 {
        let mut total = 0;
        let first = self.starts.partition_point(|&s| s <= from).saturating_sub(1);
        for i in first..self.levels.len() {
            let (start, end) = (self.starts[i], self.starts[i + 1]);
            if start >= to {
                break;
            }
            if self.levels[i] == Level::High {
                total += end.min(to).saturating_sub(start.max(from));
            }
        }
        total
    }
}

/// Sample-index window `[from, to)` of session `index` after discarding the
/// first `settle_periods` expected periods.
pub(crate) fn session_window(
    capture: &SignalCapture,
    schedule: &[Session],
    index: usize,
    settle_periods: u32,
) -> (u64, u64) {
    let session = &schedule[index];
    let end_us = crate::domain::session_end(schedule, index, capture.duration_us);
    let settle_us = session.start_us + u64::from(settle_periods) * session.period_us;
    let rate = u128::from(capture.sample_rate_hz);
    let first_at_or_after = |us: u64| (u128::from(us) * rate).div_ceil(1_000_000) as u64;
    let n = capture.sample_count();
    let to = first_at_or_after(end_us).min(n);
    let from = first_at_or_after(settle_us).min(to);
    (from, to)
}
