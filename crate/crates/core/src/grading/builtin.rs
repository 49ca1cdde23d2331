use std::fmt::Write as _;
use std::path::Path;

use super::{GradingError, GradingOutcome};
use crate::analysis::{measure_pwm, score_measurement, AnalysisConfig};
use crate::domain::{ArtifactRefs, Session};
use crate::engine::files::{parse_capture, parse_schedule};
use crate::engine::SignalCapture;

pub const SESSIONS_OK_FEEDBACK: &str = "all sessions within tolerance";

pub(super) fn run(dir: &Path) -> Result<GradingOutcome, GradingError> {
    let read = |name: &str| std::fs::read_to_string(dir.join(name));
    let schedule = parse_schedule(&read(ArtifactRefs::SCHEDULE_FILE)?)
        .map_err(|e| GradingError::ScriptMalformedOutput(format!("schedule.csv: {e}")))?;
    let capture = parse_capture(&read(ArtifactRefs::CAPTURE_FILE)?)
        .map_err(|e| GradingError::ScriptMalformedOutput(format!("capture.rle: {e}")))?;
    grade_pwm(&capture, &schedule)
}

/// Scores every session and writes one feedback line per session that lost
/// points.
pub fn grade_pwm(capture: &SignalCapture, schedule: &[Session]) -> Result<GradingOutcome, GradingError> {
    let m = measure_pwm(capture, schedule, &AnalysisConfig::default())
        .map_err(|e| GradingError::ScriptMalformedOutput(e.to_string()))?;
    let mut feedback = String::new();
    let mut scores = Vec::with_capacity(schedule.len());
    for (s, expected) in m.sessions.iter().zip(schedule) {
        let score = score_measurement(s, expected, m.sample_interval_us);
        scores.push(score);
        if score >= 1.0 {
            continue;
        }
        let line = if expected.is_constant_level() {
            let want = if expected.duty >= 1.0 { "high" } else { "low" };
            format!("expected a constant {want} level, matched {:.1}% of samples", 100.0 * score)
        } else {
            match (s.period_us, s.duty) {
                (Some(p), Some(d)) => format!(
                    "expected period {} us duty {:.1}%, measured {:.1} us duty {:.1}%",
                    expected.period_us,
                    100.0 * expected.duty,
                    p,
                    100.0 * d
                ),
                _ if s.high_fraction.is_some_and(|h| h > 0.0) => {
                    "signal present but fewer than 2 complete cycles".to_owned()
                }
                _ => "no output signal detected".to_owned(),
            }
        };
        let _ = writeln!(feedback, "session {}: {line} (score {:.3})", s.index, score);
    }
    if feedback.is_empty() {
        feedback = SESSIONS_OK_FEEDBACK.to_owned();
    }
    let score = if scores.is_empty() {
        0.0
    } else {
        100.0 * scores.iter().sum::<f64>() / scores.len() as f64
    };
    Ok(GradingOutcome {
        score,
        feedback: feedback.trim_end().to_owned(),
        sessions: scores,
    })
}
