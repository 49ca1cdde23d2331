//! PWM measurement, per-session scoring and hardware-vs-software PWM
//! classification over sampled captures.

mod edges;
mod jitter;
mod measure;
mod score;

use thiserror::Error;

use crate::domain::ScheduleError;
use crate::engine::MalformedCapture;

pub use jitter::{classify_jitter, JitterConfig, JitterVerdict, PwmClass};
pub use measure::{measure_pwm, AnalysisConfig, PwmMeasurement, SessionMeasurement};
pub use score::{score_measurement, score_session, Deadbands};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Malformed(#[from] MalformedCapture),
    #[error("schedule does not fit the capture: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("sample rate {rate_hz} Hz is below the {required_hz} Hz needed to resolve jitter")]
    InsufficientResolution { rate_hz: u32, required_hz: u32 },
}
