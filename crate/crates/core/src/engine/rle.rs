use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dut::Level;

/// `len` consecutive samples at `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub level: Level,
    pub len: u64,
}

impl Run {
    pub fn new(level: Level, len: u64) -> Self {
        Self { level, len }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed capture: {0}")]
pub struct MalformedCapture(pub String);

pub fn encode_rle(levels: &[Level]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &level in levels {
        match runs.last_mut() {
            Some(run) if run.level == level => run.len += 1,
            _ => runs.push(Run::new(level, 1)),
        }
    }
    runs
}

/// Runs must be non-empty and alternate level.
pub fn validate_runs(runs: &[Run]) -> Result<(), MalformedCapture> {
    for (i, run) in runs.iter().enumerate() {
        if run.len == 0 {
            return Err(MalformedCapture(format!("run {i} has zero length")));
        }
        if i > 0 && runs[i - 1].level == run.level {
            return Err(MalformedCapture(format!("runs {} and {i} share a level", i - 1)));
        }
    }
    Ok(())
}

pub fn decode_rle(runs: &[Run]) -> Result<Vec<Level>, MalformedCapture> {
    validate_runs(runs)?;
    let total: u64 = runs.iter().map(|r| r.len).sum();
    let mut out = Vec::with_capacity(total as usize);
    for run in runs {
        out.extend(std::iter::repeat_n(run.level, run.len as usize));
    }
    Ok(out)
}

const COMPACT_VERSION: u8 = 1;
const LEN_BYTES: usize = 6;
const MAX_COMPACT_LEN: u64 = (1 << 48) - 1;

/// Binary form of a run list: a version byte, the first run's level, then
/// each run length as a 48-bit little-endian integer. Levels are implied by
/// alternation, so the size is `2 + 6 * runs`.
pub fn encode_compact(runs: &[Run]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + LEN_BYTES * runs.len());
    out.push(COMPACT_VERSION);
    out.push(runs.first().map_or(0, |r| r.level.bit()));
    for run in runs {
        debug_assert!(run.len <= MAX_COMPACT_LEN);
        out.extend_from_slice(&run.len.to_le_bytes()[..LEN_BYTES]);
    }
    out
}

pub fn decode_compact(bytes: &[u8]) -> Result<Vec<Run>, MalformedCapture> {
    let [version, first, body @ ..] = bytes else {
        return Err(MalformedCapture("compact capture shorter than its header".into()));
    };
    if *version != COMPACT_VERSION {
        return Err(MalformedCapture(format!("unknown compact version {version}")));
    }
    if body.len() % LEN_BYTES != 0 {
        return Err(MalformedCapture("truncated run length".into()));
    }
    let mut level = Level::try_from(*first).map_err(MalformedCapture)?;
    let mut runs = Vec::with_capacity(body.len() / LEN_BYTES);
    for chunk in body.chunks_exact(LEN_BYTES) {
        let mut buf = [0u8; 8];
        buf[..LEN_BYTES].copy_from_slice(chunk);
        runs.push(Run::new(level, u64::from_le_bytes(buf)));
        level = level.toggled();
    }
    validate_runs(&runs)?;
    Ok(runs)
}
