//! Text artifact formats: the session schedule (`start_us,period_us,duty_pct`),
//! the DUT port schedule (`tick_us,in0,in1`) and the run-length capture file.
//!
//! Capture files carry one header line `rate_hz,duration_us,pin,profile`
//! followed by one `level,run_length` line per run. All files are UTF-8 with
//! LF line endings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::capture::SignalCapture;
use super::rle::{MalformedCapture, Run};
use crate::domain::Session;
use crate::dut::{Level, PortSample};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FileFormatError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Malformed(#[from] MalformedCapture),
}

impl From<csv::Error> for FileFormatError {
    fn from(e: csv::Error) -> Self {
        FileFormatError::Csv(e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct ScheduleRow {
    start_us: u64,
    period_us: u64,
    duty_pct: f64,
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory csv write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn read_rows<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, FileFormatError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(Into::into)
}

pub fn write_schedule(sessions: &[Session]) -> String {
    write_rows(sessions.iter().map(|s| ScheduleRow {
        start_us: s.start_us,
        period_us: s.period_us,
        // six decimals keep whole-percent duties free of binary noise
        duty_pct: (s.duty * 100.0 * 1e6).round() / 1e6,
    }))
}

pub fn parse_schedule(text: &str) -> Result<Vec<Session>, FileFormatError> {
    Ok(read_rows::<ScheduleRow>(text)?
        .into_iter()
        .map(|r| Session::new(r.start_us, r.period_us, r.duty_pct / 100.0))
        .collect())
}

pub fn write_port_schedule(samples: &[PortSample]) -> String {
    write_rows(samples)
}

pub fn parse_port_schedule(text: &str) -> Result<Vec<PortSample>, FileFormatError> {
    read_rows(text)
}

pub fn write_capture(capture: &SignalCapture) -> String {
    let mut out = format!(
        "{},{},{},{}\n",
        capture.sample_rate_hz, capture.duration_us, capture.pin, capture.profile
    );
    for run in &capture.runs {
        out.push_str(&format!("{},{}\n", run.level.bit(), run.len));
    }
    out
}

/// Parses and validates a capture file.
pub fn parse_capture(text: &str) -> Result<SignalCapture, FileFormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let bad = |line: usize, message: String| FileFormatError::Line { line, message };

    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    let [rate, duration, pin, profile] = fields[..] else {
        return Err(bad(1, format!("header needs 4 fields, found {}", fields.len())));
    };
    let sample_rate_hz = rate.parse().map_err(|_| bad(1, format!("bad rate `{rate}`")))?;
    let duration_us = duration
        .parse()
        .map_err(|_| bad(1, format!("bad duration `{duration}`")))?;
    let pin = pin.parse().map_err(|e: String| bad(1, e))?;

    let mut runs = Vec::new();
    for (line, text) in lines {
        if text.is_empty() {
            continue;
        }
        let (level, len) = text
            .split_once(',')
            .ok_or_else(|| bad(line, "expected `level,run_length`".into()))?;
        let level: u8 = level.parse().map_err(|_| bad(line, format!("bad level `{level}`")))?;
        let level = Level::try_from(level).map_err(|e| bad(line, e))?;
        let len = len.parse().map_err(|_| bad(line, format!("bad run length `{len}`")))?;
        runs.push(Run::new(level, len));
    }

    let capture = SignalCapture {
        sample_rate_hz,
        duration_us,
        pin,
        profile: profile.to_owned(),
        runs,
    };
    capture.validate()?;
    Ok(capture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dut::Pin;

    #[test]
    fn schedule_round_trip() {
        let sessions = vec![Session::new(0, 1000, 0.29), Session::new(5000, 2000, 0.5)];
        let text = write_schedule(&sessions);
        assert_eq!(text, "start_us,period_us,duty_pct\n0,1000,29.0\n5000,2000,50.0\n");
        assert_eq!(parse_schedule(&text).unwrap(), sessions);
    }

    #[test]
    fn port_schedule_round_trip() {
        let ports = vec![
            PortSample { tick_us: 0, in0: 1000, in1: 25 },
            PortSample { tick_us: 500, in0: 2000, in1: 50 },
        ];
        let text = write_port_schedule(&ports);
        assert!(text.starts_with("tick_us,in0,in1\n"));
        assert_eq!(parse_port_schedule(&text).unwrap(), ports);
    }

    #[test]
    fn capture_text_format() {
        let cap = SignalCapture {
            sample_rate_hz: 5000,
            duration_us: 1000,
            pin: Pin(0),
            profile: "dut-v1".into(),
            runs: vec![Run::new(Level::Low, 3), Run::new(Level::High, 2)],
        };
        let text = write_capture(&cap);
        assert_eq!(text, "5000,1000,P0,dut-v1\n0,3\n1,2\n");
        assert_eq!(parse_capture(&text).unwrap(), cap);
    }

    #[test]
    fn capture_parse_errors() {
        assert!(parse_capture("").is_err());
        assert!(parse_capture("5000,1000,P0\n0,5\n").is_err());
        assert!(matches!(
            parse_capture("5000,1000,P0,dut-v1\n0,3\n0,2\n"),
            Err(FileFormatError::Malformed(_))
        ));
        assert!(matches!(
            parse_capture("5000,1000,P0,dut-v1\n2,5\n"),
            Err(FileFormatError::Line { line: 2, .. })
        ));
        // length must match rate x duration
        assert!(parse_capture("5000,1000,P0,dut-v1\n0,4\n").is_err());
    }
}
