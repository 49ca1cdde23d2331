//! Core of the lab autograder: the shared domain model, a deterministic
//! virtual microcontroller, the simulated hardware engine that stimulates and
//! samples it, PWM signal analysis, and the grading-script runner.
//!
//! Everything in this crate is synchronous and free of I/O except the
//! grading runner, which reads artifact directories and may spawn external
//! grading scripts.

pub mod analysis;
pub mod domain;
pub mod dut;
pub mod engine;
pub mod grading;
pub mod par;
pub mod protocol;
pub mod reference;

pub use analysis::{classify_jitter, measure_pwm, score_session};
pub use domain::{GradeReport, Session, Submission, TestCase, Visibility};
pub use dut::{assemble, DutProfile, DutProgram, Level, Pin};
pub use engine::{capture, CaptureConfig, SignalCapture};
