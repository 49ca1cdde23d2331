use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{sample_count, CaptureConfig, ConfigError};
use super::rle::{decode_rle, encode_compact, validate_runs, MalformedCapture, Run};
use crate::domain::{validate_schedule, ScheduleError, Session};
use crate::dut::{self, DutProfile, DutProgram, Level, Pin, PinEventTrace, PortSample, PrintLog, RunError};
use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("pin {pin} is not present on profile {profile}")]
    ConfigMismatch { pin: Pin, profile: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// A fixed-rate sampled trace of one DUT pin, stored as alternating runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalCapture {
    pub sample_rate_hz: u32,
    pub duration_us: u64,
    pub pin: Pin,
    pub profile: String,
    pub runs: Vec<Run>,
}

impl SignalCapture {
    pub fn sample_count(&self) -> u64 {
        sample_count(self.duration_us, self.sample_rate_hz)
    }

    pub fn sample_interval_us(&self) -> f64 {
        1e6 / f64::from(self.sample_rate_hz)
    }

    /// Checks run alternation and that the runs cover exactly the samples
    /// implied by rate and duration.
    pub fn validate(&self) -> Result<(), MalformedCapture> {
        validate_runs(&self.runs)?;
        let covered: u64 = self.runs.iter().map(|r| r.len).sum();
        if covered != self.sample_count() {
            return Err(MalformedCapture(format!(
                "runs cover {covered} samples, header implies {}",
                self.sample_count()
            )));
        }
        Ok(())
    }

    pub fn decode(&self) -> Result<Vec<Level>, MalformedCapture> {
        self.validate()?;
        decode_rle(&self.runs)
    }

    pub fn transitions(&self) -> usize {
        self.runs.len().saturating_sub(1)
    }

    /// Binary run payload; see [`encode_compact`].
    pub fn compact_runs(&self) -> Vec<u8> {
        encode_compact(&self.runs)
    }

    pub fn is_all_low(&self) -> bool {
        self.runs.iter().all(|r| r.level == Level::Low)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaptureOutput {
    pub capture: SignalCapture,
    pub print_log: PrintLog,
}

/// One capture to perform, for batch use with [`capture_many`].
#[derive(Clone, Copy, Debug)]
pub struct CaptureRequest<'a> {
    pub program: &'a DutProgram,
    pub profile: DutProfile,
    pub sessions: &'a [Session],
    pub config: CaptureConfig,
}

/// Runs `program` from reset against `sessions` and samples `cfg.pin`.
///
/// Each session start writes the commanded period (µs) to IN0 and the duty
/// cycle (whole percent) to IN1. Sample `k` reads the pin at tick
/// `floor(k * clock / rate)`, i.e. the level at or immediately before the
/// sample instant.
pub fn capture(
    program: &DutProgram,
    profile: &DutProfile,
    sessions: &[Session],
    cfg: &CaptureConfig,
) -> Result<CaptureOutput, EngineError> {
    cfg.validate()?;
    if !profile.has_pin(cfg.pin) {
        return Err(EngineError::ConfigMismatch {
            pin: cfg.pin,
            profile: profile.id.to_owned(),
        });
    }
    validate_schedule(sessions, cfg.duration_us)?;

    let ports: Vec<PortSample> = sessions
        .iter()
        .map(|s| PortSample {
            tick_us: s.start_us,
            in0: s.period_us as u16,
            in1: s.duty_percent(),
        })
        .collect();
    let trace = dut::run(program, profile, &ports, cfg.duration_us)?;
    let runs = sample_trace(&trace, cfg.pin, cfg.sample_rate_hz);
    Ok(CaptureOutput {
        capture: SignalCapture {
            sample_rate_hz: cfg.sample_rate_hz,
            duration_us: cfg.duration_us,
            pin: cfg.pin,
            profile: profile.id.to_owned(),
            runs,
        },
        print_log: trace.print_log,
    })
}

pub fn capture_many(
    requests: &[CaptureRequest<'_>],
    exec: Execution,
) -> Vec<Result<CaptureOutput, EngineError>> {
    par::map(exec, requests, |r| capture(r.program, &r.profile, r.sessions, &r.config))
}

/// Samples one pin of a trace straight into runs, without materializing the
/// individual samples.
pub fn sample_trace(trace: &PinEventTrace, pin: Pin, rate_hz: u32) -> Vec<Run> {
    let n = sample_count(trace.duration_us, rate_hz);
    // number of sample instants strictly before `tick`
    let samples_before = |tick: u64| -> u64 {
        let num = u128::from(tick) * u128::from(rate_hz);
        let den = u128::from(trace.tick_hz);
        (num.div_ceil(den) as u64).min(n)
    };

    let mut runs: Vec<Run> = Vec::new();
    let mut push = |level: Level, len: u64| {
        if len == 0 {
            return;
        }
        match runs.last_mut() {
            Some(last) if last.level == level => last.len += len,
            _ => runs.push(Run::new(level, len)),
        }
    };
    let mut level = Level::Low;
    let mut emitted = 0;
    for event in trace.events_for(pin) {
        let upto = samples_before(event.tick);
        push(level, upto - emitted);
        emitted = upto;
        level = event.level;
    }
    push(level, n - emitted);
    runs
}
