use super::measure::SessionMeasurement;
use crate::domain::Session;

/// Errors at or below these magnitudes cost nothing: they are what sampling
/// quantization alone can produce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deadbands {
    /// Relative period error.
    pub period: f64,
    /// Absolute duty-ratio error.
    pub duty: f64,
}

impl Deadbands {
    /// One sample interval, relative to the expected period, for both terms.
    pub fn for_sampling(sample_interval_us: f64, expected_period_us: f64) -> Self {
        let q = sample_interval_us / expected_period_us;
        Self { period: q, duty: q }
    }
}

/// `max(0, 1 - max(0, e_p - q_p) - max(0, e_d - q_d))` with `e_p` the
/// relative period error and `e_d` the absolute duty error. An unmeasurable
/// session (`None`) scores 0.
pub fn score_session(measured: Option<(f64, f64)>, expected: &Session, deadbands: Deadbands) -> f64 {
    let Some((period, duty)) = measured else {
        return 0.0;
    };
    let expected_period = expected.period_us as f64;
    let e_p = (period - expected_period).abs() / expected_period;
    let e_d = (duty - expected.duty).abs();
    let penalty = (e_p - deadbands.period).max(0.0) + (e_d - deadbands.duty).max(0.0);
    (1.0 - penalty).max(0.0)
}

/// Scores one session measurement. Sessions commanding duty 0 or 1 have no
/// edges to measure and score the fraction of samples at the expected level.
pub fn score_measurement(m: &SessionMeasurement, expected: &Session, sample_interval_us: f64) -> f64 {
    if expected.is_constant_level() {
        return match (m.high_fraction, expected.duty >= 1.0) {
            (None, _) => 0.0,
            (Some(high), true) => high,
            (Some(high), false) => 1.0 - high,
        };
    }
    score_session(
        m.period_us.zip(m.duty),
        expected,
        Deadbands::for_sampling(sample_interval_us, expected.period_us as f64),
    )
}
