use serde::{Deserialize, Serialize};

use super::edges::{session_window, Edges};
use super::AnalysisError;
use crate::domain::{validate_schedule, Session};
use crate::engine::SignalCapture;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Expected periods discarded at the start of every session as the
    /// program's reaction time.
    pub settle_periods: u32,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { settle_periods: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMeasurement {
    pub index: usize,
    /// Mean rise-to-rise period; present only with at least 2 cycles.
    pub period_us: Option<f64>,
    /// Mean per-cycle duty ratio; present only with at least 2 cycles.
    pub duty: Option<f64>,
    pub cycle_count: usize,
    pub settled: bool,
    /// Fraction of analyzed samples that were high; `None` when the settle
    /// window consumed the whole session.
    pub high_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwmMeasurement {
    pub sample_interval_us: f64,
    pub sessions: Vec<SessionMeasurement>,
}

/// Measures period and duty independently for every session of `schedule`.
pub fn measure_pwm(
    capture: &SignalCapture,
    schedule: &[Session],
    cfg: &AnalysisConfig,
) -> Result<PwmMeasurement, AnalysisError> {
    capture.validate()?;
    validate_schedule(schedule, capture.duration_us)?;
    let edges = Edges::new(&capture.runs);
    let dt = capture.sample_interval_us();

    let sessions = (0..schedule.len())
        .map(|index| {
            let (from, to) = session_window(capture, schedule, index, cfg.settle_periods);
            let cycles = edges.cycles(from, to);
            let n = cycles.len();
            let (period_us, duty) = if n >= 2 {
                let period = cycles.iter().map(|c| c.period as f64).sum::<f64>() / n as f64;
                let duty = cycles
                    .iter()
                    .map(|c| c.high as f64 / c.period as f64)
                    .sum::<f64>()
                    / n as f64;
                (Some(period * dt), Some(duty))
            } else {
                (None, None)
            };
            let high_fraction =
                (to > from).then(|| edges.high_samples(from, to) as f64 / (to - from) as f64);
            SessionMeasurement {
                index,
                period_us,
                duty,
                cycle_count: n,
                settled: n >= 2,
                high_fraction,
            }
        })
        .collect();

    Ok(PwmMeasurement { sample_interval_us: dt, sessions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dut::{Level, Pin};
    use crate::engine::{encode_rle, Run};

    fn square(rate: u32, duration_us: u64, period_samples: u64, high: u64, offset: u64) -> SignalCapture {
        let n = duration_us * u64::from(rate) / 1_000_000;
        let levels: Vec<Level> = (0..n)
            .map(|k| {
                if k >= offset && (k - offset) % period_samples < high {
                    Level::High
                } else {
                    Level::Low
                }
            })
            .collect();
        SignalCapture {
            sample_rate_hz: rate,
            duration_us,
            pin: Pin(0),
            profile: "dut-v1".into(),
            runs: encode_rle(&levels),
        }
    }

    #[test]
    fn ideal_square_wave() {
        let cap = square(5_000, 100_000, 20, 5, 1);
        let m = measure_pwm(&cap, &[Session::new(0, 4000, 0.25)], &AnalysisConfig::default()).unwrap();
        let s = &m.sessions[0];
        assert_eq!(s.period_us, Some(4000.0));
        assert_eq!(s.duty, Some(0.25));
        assert!(s.settled);
        // 500 samples, 40 discarded; rises at 41, 61, ..., 481 -> 22 cycles
        assert_eq!(s.cycle_count, 22);
    }

    #[test]
    fn all_low_has_no_cycles() {
        let cap = SignalCapture {
            sample_rate_hz: 5_000,
            duration_us: 100_000,
            pin: Pin(0),
            profile: "dut-v1".into(),
            runs: vec![Run::new(Level::Low, 500)],
        };
        let m = measure_pwm(&cap, &[Session::new(0, 4000, 0.25)], &AnalysisConfig::default()).unwrap();
        let s = &m.sessions[0];
        assert_eq!((s.cycle_count, s.settled, s.period_us, s.duty), (0, false, None, None));
        assert_eq!(s.high_fraction, Some(0.0));
    }

    #[test]
    fn sessions_are_measured_independently() {
        // 1 MHz: 1000-sample cycles for 20 ms, then 500-sample cycles
        let mut levels = Vec::new();
        for k in 0..40_000u64 {
            let (p, h, local) = if k < 20_000 { (1000, 250, k) } else { (500, 400, k - 20_000) };
            levels.push(if local % p < h { Level::High } else { Level::Low });
        }
        let cap = SignalCapture {
            sample_rate_hz: 1_000_000,
            duration_us: 40_000,
            pin: Pin(0),
            profile: "dut-v1".into(),
            runs: encode_rle(&levels),
        };
        let schedule = [Session::new(0, 1000, 0.25), Session::new(20_000, 500, 0.8)];
        let m = measure_pwm(&cap, &schedule, &AnalysisConfig::default()).unwrap();
        assert_eq!(m.sessions[0].period_us, Some(1000.0));
        assert_eq!(m.sessions[0].duty, Some(0.25));
        assert_eq!(m.sessions[1].period_us, Some(500.0));
        assert!((m.sessions[1].duty.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn settle_window_can_swallow_a_session() {
        let cap = square(5_000, 10_000, 20, 5, 0);
        let m = measure_pwm(&cap, &[Session::new(0, 8000, 0.25)], &AnalysisConfig::default()).unwrap();
        assert_eq!(m.sessions[0].high_fraction, None);
        assert!(!m.sessions[0].settled);
    }

    #[test]
    fn malformed_capture_propagates() {
        let mut cap = square(5_000, 100_000, 20, 5, 1);
        cap.runs.push(Run::new(Level::Low, 3));
        assert!(matches!(
            measure_pwm(&cap, &[Session::new(0, 4000, 0.25)], &AnalysisConfig::default()),
            Err(AnalysisError::Malformed(_))
        ));
    }
}
