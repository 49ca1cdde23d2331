//! Simulated hardware engine: drives a DUT's input ports from a session
//! schedule, samples one output pin at a fixed rate for a fixed duration and
//! run-length encodes the result.

mod capture;
mod config;
pub mod files;
mod rle;

pub use capture::{capture, capture_many, sample_trace, CaptureOutput, CaptureRequest, EngineError, SignalCapture};
pub use config::{CaptureConfig, ConfigError, DEFAULT_SAMPLE_RATE_HZ, MAX_SAMPLE_RATE_HZ};
pub use rle::{decode_compact, decode_rle, encode_compact, encode_rle, validate_runs, MalformedCapture, Run};
