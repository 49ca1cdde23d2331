use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dut::{Pin, MAX_DURATION_US};

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 5_000;
/// One sample per virtual tick of the 1 MHz profile.
pub const MAX_SAMPLE_RATE_HZ: u32 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureConfig {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: u32,
    pub duration_us: u64,
    pub pin: Pin,
}

fn default_rate() -> u32 {
    DEFAULT_SAMPLE_RATE_HZ
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("sample rate {0} Hz outside [1, 1000000]")]
    SampleRate(u32),
    #[error("duration {duration_us} us is shorter than one sample interval at {rate_hz} Hz")]
    TooShort { duration_us: u64, rate_hz: u32 },
    #[error("duration {0} us exceeds the 60 s limit")]
    TooLong(u64),
}

impl CaptureConfig {
    pub fn new(sample_rate_hz: u32, duration_us: u64, pin: Pin) -> Self {
        Self { sample_rate_hz, duration_us, pin }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=MAX_SAMPLE_RATE_HZ).contains(&self.sample_rate_hz) {
            return Err(ConfigError::SampleRate(self.sample_rate_hz));
        }
        if self.duration_us > MAX_DURATION_US {
            return Err(ConfigError::TooLong(self.duration_us));
        }
        if self.sample_count() == 0 {
            return Err(ConfigError::TooShort {
                duration_us: self.duration_us,
                rate_hz: self.sample_rate_hz,
            });
        }
        Ok(())
    }

    /// `floor(duration * rate / 1e6)`.
    pub fn sample_count(&self) -> u64 {
        sample_count(self.duration_us, self.sample_rate_hz)
    }

    pub fn sample_interval_us(&self) -> f64 {
        1e6 / f64::from(self.sample_rate_hz)
    }
}

pub(crate) fn sample_count(duration_us: u64, rate_hz: u32) -> u64 {
    (u128::from(duration_us) * u128::from(rate_hz) / 1_000_000) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert_eq!(CaptureConfig::new(5_000, 100_000, Pin(0)).validate(), Ok(()));
        assert_eq!(CaptureConfig::new(5_000, 100_000, Pin(0)).sample_count(), 500);
        assert_eq!(
            CaptureConfig::new(0, 100, Pin(0)).validate(),
            Err(ConfigError::SampleRate(0))
        );
        assert_eq!(
            CaptureConfig::new(2_000_000, 100, Pin(0)).validate(),
            Err(ConfigError::SampleRate(2_000_000))
        );
        assert!(matches!(
            CaptureConfig::new(5_000, 199, Pin(0)).validate(),
            Err(ConfigError::TooShort { .. })
        ));
        assert_eq!(CaptureConfig::new(5_000, 200, Pin(0)).validate(), Ok(()));
    }

    #[test]
    fn rate_defaults_when_omitted() {
        let cfg: CaptureConfig =
            serde_json::from_str(r#"{"duration_us": 1000, "pin": "P1"}"#).unwrap();
        assert_eq!(cfg, CaptureConfig::new(DEFAULT_SAMPLE_RATE_HZ, 1000, Pin(1)));
    }
}
