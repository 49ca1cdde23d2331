//! Reference DUT programs used as fixtures by tests, the acceptance suite and
//! the load benchmark.

use crate::domain::{GradingScript, Session, TestCase, TestCaseId, Visibility};
use crate::dut::Pin;
use crate::engine::CaptureConfig;

/// Reacts to input changes by reprogramming the PWM peripheral on P0.
pub const HARDWARE_PWM: &str = include_str!("../fixtures/hardware_pwm.asm");
/// Same behavior for the 2 MHz `dut-v2` profile.
pub const HARDWARE_PWM_V2: &str = include_str!("../fixtures/hardware_pwm_v2.asm");
/// Bit-banged PWM on P0. Each loop iteration spends 8 ticks outside its two
/// waits, and the high phase includes the `CLR` tick.
pub const SOFTWARE_PWM: &str = include_str!("../fixtures/software_pwm.asm");
/// Correct waveform on the wrong pin.
pub const WRONG_PIN: &str = include_str!("../fixtures/wrong_pin.asm");
/// Prints as fast as the UART allows.
pub const PRINT_SPAM: &str = include_str!("../fixtures/print_spam.asm");
/// Does nothing.
pub const BLANK: &str = "HALT\n";
/// Fails to assemble.
pub const COMPILE_ERROR: &str = "JMP nowhere\n";

/// A named schedule and capture setup exercised by the reference programs.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    pub sessions: Vec<Session>,
    pub config: CaptureConfig,
}

impl Fixture {
    /// A built-in-graded test case over this fixture with a fresh id.
    pub fn test_case(&self, visibility: Visibility) -> TestCase {
        TestCase {
            id: TestCaseId::new(),
            visibility,
            sessions: self.sessions.clone(),
            capture: self.config,
            script: GradingScript::BuiltinPwm,
            weight: 1.0,
        }
    }
}

pub fn fixtures() -> Vec<Fixture> {
    let s = Session::new;
    vec![
        Fixture {
            name: "single_1mhz",
            sessions: vec![s(0, 1000, 0.25)],
            config: CaptureConfig::new(1_000_000, 50_000, Pin(0)),
        },
        Fixture {
            name: "three_sessions_1mhz",
            sessions: vec![s(0, 1000, 0.25), s(20_000, 500, 0.6), s(40_000, 2000, 0.1)],
            config: CaptureConfig::new(1_000_000, 70_000, Pin(0)),
        },
        Fixture {
            name: "two_sessions_5khz",
            sessions: vec![s(0, 4000, 0.25), s(200_000, 2000, 0.5)],
            config: CaptureConfig::new(5_000, 400_000, Pin(0)),
        },
        Fixture {
            name: "constant_levels_100khz",
            sessions: vec![s(0, 1000, 0.0), s(10_000, 1000, 1.0), s(20_000, 1000, 0.5)],
            config: CaptureConfig::new(100_000, 40_000, Pin(0)),
        },
    ]
}
