use serde::{Deserialize, Serialize};

use super::edges::{session_window, Edges};
use super::AnalysisError;
use crate::domain::{validate_schedule, Session};
use crate::engine::SignalCapture;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    /// Below this rate one sample is too coarse to separate the classes.
    pub min_sample_rate_hz: u32,
    /// Fewer measured cycles than this is `Indeterminate`.
    pub min_cycles: usize,
    pub settle_periods: u32,
    /// Thresholds in sample intervals.
    pub max_std_samples: f64,
    pub max_deviation_samples: f64,
    pub max_mean_offset_samples: f64,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            min_sample_rate_hz: 100_000,
            min_cycles: 10,
            settle_periods: 2,
            max_std_samples: 1.0,
            max_deviation_samples: 2.0,
            max_mean_offset_samples: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PwmClass {
    HardwarePwm,
    SoftwarePwm,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterVerdict {
    pub class: PwmClass,
    /// Per-cycle measured periods across all settled sessions.
    pub periods_us: Vec<f64>,
    /// Statistics of `measured - expected` per cycle.
    pub std_us: f64,
    pub max_deviation_us: f64,
    pub mean_offset_us: f64,
}

/// Classifies the generator behind a capture by the per-cycle period error
/// against the schedule. A hardware unit is exact up to sampling
/// quantization; a software loop drifts from the commanded period by its
/// instruction overhead and jitters with branch timing.
pub fn classify_jitter(
    capture: &SignalCapture,
    schedule: &[Session],
    cfg: &JitterConfig,
) -> Result<JitterVerdict, AnalysisError> {
    if capture.sample_rate_hz < cfg.min_sample_rate_hz {
        return Err(AnalysisError::InsufficientResolution {
            rate_hz: capture.sample_rate_hz,
            required_hz: cfg.min_sample_rate_hz,
        });
    }
    capture.validate()?;
    validate_schedule(schedule, capture.duration_us)?;
    let edges = Edges::new(&capture.runs);
    let dt = capture.sample_interval_us();

    let mut periods_us = Vec::new();
    let mut deviations = Vec::new();
    for (index, session) in schedule.iter().enumerate() {
        if session.is_constant_level() {
            continue;
        }
        let (from, to) = session_window(capture, schedule, index, cfg.settle_periods);
        for c in edges.cycles(from, to) {
            let p = c.period as f64 * dt;
            periods_us.push(p);
            deviations.push(p - session.period_us as f64);
        }
    }

    let n = deviations.len();
    let (mean, std, max) = if n == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let mean = deviations.iter().sum::<f64>() / n as f64;
        let var = deviations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        let max = deviations.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        (mean, var.sqrt(), max)
    };

    let class = if n < cfg.min_cycles {
        PwmClass::Indeterminate
    } else if std <= cfg.max_std_samples * dt
        && max <= cfg.max_deviation_samples * dt
        && mean.abs() <= cfg.max_mean_offset_samples * dt
    {
        PwmClass::HardwarePwm
    } else {
        PwmClass::SoftwarePwm
    };

    Ok(JitterVerdict {
        class,
        periods_us,
        std_us: std,
        max_deviation_us: max,
        mean_offset_us: mean.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dut::{Level, Pin};
    use crate::engine::encode_rle;

    fn capture_from_periods(rate: u32, periods_samples: &[u64], high: u64) -> SignalCapture {
        let mut levels = vec![Level::Low; 3];
        for &p in periods_samples {
            levels.extend(std::iter::repeat_n(Level::High, high as usize));
            levels.extend(std::iter::repeat_n(Level::Low, (p - high) as usize));
        }
        let total = levels.len() as u64;
        let duration_us = total * 1_000_000 / u64::from(rate);
        levels.truncate((duration_us * u64::from(rate) / 1_000_000) as usize);
        SignalCapture {
            sample_rate_hz: rate,
            duration_us,
            pin: Pin(0),
            profile: "dut-v1".into(),
            runs: encode_rle(&levels),
        }
    }

    #[test]
    fn exact_periods_are_hardware() {
        let cap = capture_from_periods(1_000_000, &[1000; 30], 250);
        let v = classify_jitter(&cap, &[Session::new(0, 1000, 0.25)], &JitterConfig::default()).unwrap();
        assert_eq!(v.class, PwmClass::HardwarePwm);
        assert_eq!(v.max_deviation_us, 0.0);
    }

    #[test]
    fn constant_offset_is_software() {
        let cap = capture_from_periods(1_000_000, &[1008; 30], 251);
        let v = classify_jitter(&cap, &[Session::new(0, 1000, 0.25)], &JitterConfig::default()).unwrap();
        assert_eq!(v.class, PwmClass::SoftwarePwm);
        assert!((v.mean_offset_us - 8.0).abs() < 1e-9);
    }

    #[test]
    fn spread_is_software() {
        let periods: Vec<u64> = (0..30).map(|i| if i % 2 == 0 { 995 } else { 1005 }).collect();
        let cap = capture_from_periods(1_000_000, &periods, 250);
        let v = classify_jitter(&cap, &[Session::new(0, 1000, 0.25)], &JitterConfig::default()).unwrap();
        assert_eq!(v.class, PwmClass::SoftwarePwm);
        assert!(v.mean_offset_us < 1.0);
    }

    #[test]
    fn few_cycles_are_indeterminate() {
        let cap = capture_from_periods(1_000_000, &[1000; 8], 250);
        let v = classify_jitter(&cap, &[Session::new(0, 1000, 0.25)], &JitterConfig::default()).unwrap();
        assert_eq!(v.class, PwmClass::Indeterminate);
    }

    #[test]
    fn low_rate_is_rejected() {
        let cap = capture_from_periods(5_000, &[20; 30], 5);
        assert!(matches!(
            classify_jitter(&cap, &[Session::new(0, 4000, 0.25)], &JitterConfig::default()),
            Err(AnalysisError::InsufficientResolution { rate_hz: 5_000, required_hz: 100_000 })
        ));
    }
}
