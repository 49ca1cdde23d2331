use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An interval of constant commanded PWM period and duty cycle. A session
/// ends where the next one starts, or at the end of the capture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub start_us: u64,
    pub period_us: u64,
    /// High-time fraction in `[0, 1]`.
    pub duty: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule has no sessions")]
    Empty,
    #[error("first session must start at 0 us, starts at {0}")]
    FirstStart(u64),
    #[error("session {index} starts at {start} us, not after the previous session")]
    NotIncreasing { index: usize, start: u64 },
    #[error("session {index} starts at {start} us, at or past the capture end {duration} us")]
    PastEnd { index: usize, start: u64, duration: u64 },
    #[error("session {index}: period {period} us outside [2, 65535]")]
    Period { index: usize, period: u64 },
    #[error("session {index}: duty {duty} outside [0, 1]")]
    Duty { index: usize, duty: f64 },
    #[error("session {index}: high or low phase shorter than 1 us")]
    PhaseTooShort { index: usize },
}

impl Session {
    pub fn new(start_us: u64, period_us: u64, duty: f64) -> Self {
        Self { start_us, period_us, duty }
    }

    /// Duty cycle as the whole percentage written to the DUT's IN1 port.
    pub fn duty_percent(&self) -> u16 {
        (self.duty * 100.0).round().clamp(0.0, 100.0) as u16
    }

    /// Sessions with duty 0 or 1 have no edges and are judged on level alone.
    pub fn is_constant_level(&self) -> bool {
        self.duty <= 0.0 || self.duty >= 1.0
    }

    fn check(&self, index: usize) -> Result<(), ScheduleError> {
        if !(2..=u16::MAX as u64).contains(&self.period_us) {
            return Err(ScheduleError::Period { index, period: self.period_us });
        }
        if !(0.0..=1.0).contains(&self.duty) || self.duty.is_nan() {
            return Err(ScheduleError::Duty { index, duty: self.duty });
        }
        if !self.is_constant_level() {
            let high = self.duty * self.period_us as f64;
            let low = self.period_us as f64 - high;
            if high < 1.0 || low < 1.0 {
                return Err(ScheduleError::PhaseTooShort { index });
            }
        }
        Ok(())
    }
}

/// Checks that sessions are individually valid, start at 0, are strictly
/// ordered and all begin before `duration_us`, so together they tile the
/// capture window.
pub fn validate_schedule(sessions: &[Session], duration_us: u64) -> Result<(), ScheduleError> {
    let first = sessions.first().ok_or(ScheduleError::Empty)?;
    if first.start_us != 0 {
        return Err(ScheduleError::FirstStart(first.start_us));
    }
    for (index, session) in sessions.iter().enumerate() {
        session.check(index)?;
        if index > 0 && session.start_us <= sessions[index - 1].start_us {
            return Err(ScheduleError::NotIncreasing { index, start: session.start_us });
        }
        if session.start_us >= duration_us {
            return Err(ScheduleError::PastEnd {
                index,
                start: session.start_us,
                duration: duration_us,
            });
        }
    }
    Ok(())
}

/// End of session `index` in microseconds.
pub(crate) fn session_end(sessions: &[Session], index: usize, duration_us: u64) -> u64 {
    sessions
        .get(index + 1)
        .map(|next| next.start_us)
        .unwrap_or(duration_us)
}
