use labgrader_core::analysis::{classify_jitter, AnalysisError, JitterConfig, PwmClass};
use labgrader_core::{assemble, capture, reference, CaptureConfig, DutProfile, Pin, Session};
use rand::{Rng, SeedableRng};

fn random_pairs(seed: u64, n: usize) -> Vec<(u64, f64)> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| (100 * rng.random_range(2..=50u64), rng.random_range(10..=90u32) as f64 / 100.0))
        .collect()
}

fn classify(src: &str, period: u64, duty: f64, rate: u32) -> Result<PwmClass, AnalysisError> {
    let program = assemble(src).unwrap();
    let schedule = [Session::new(0, period, duty)];
    let cfg = CaptureConfig::new(rate, 15 * period, Pin(0));
    let out = capture(&program, &DutProfile::V1, &schedule, &cfg).unwrap();
    classify_jitter(&out.capture, &schedule, &JitterConfig::default()).map(|v| v.class)
}

#[test]
fn classes_separate_at_high_rates() {
    for rate in [100_000, 1_000_000] {
        for (period, duty) in random_pairs(7, 50) {
            assert_eq!(
                classify(reference::HARDWARE_PWM, period, duty, rate).unwrap(),
                PwmClass::HardwarePwm,
                "hw {period} {duty} @ {rate}"
            );
            assert_eq!(
                classify(reference::SOFTWARE_PWM, period, duty, rate).unwrap(),
                PwmClass::SoftwarePwm,
                "sw {period} {duty} @ {rate}"
            );
        }
    }
}

#[test]
fn low_rate_is_insufficient() {
    let err = classify(reference::HARDWARE_PWM, 4000, 0.25, 5_000).unwrap_err();
    assert!(matches!(err, AnalysisError::InsufficientResolution { .. }));
}
