use serde::{Deserialize, Serialize};

use super::isa::{Level, Pin};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinEvent {
    pub tick: u64,
    pub pin: Pin,
    pub level: Level,
}

/// UART output with the tick at which each byte finished shifting out.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintLog {
    pub bytes: Vec<u8>,
    pub ticks: Vec<u64>,
}

impl PrintLog {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Everything observable from one run: pin level changes, in tick order, and
/// the print log. Every pin is low at tick 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinEventTrace {
    pub events: Vec<PinEvent>,
    pub tick_hz: u64,
    pub duration_us: u64,
    /// Clock value when execution stopped, by `HALT`, by running off the end
    /// of the program, or by reaching the capture duration. May exceed the
    /// duration when the last instruction was a long wait.
    pub stop_tick: u64,
    pub print_log: PrintLog,
}

impl PinEventTrace {
    pub fn duration_ticks(&self) -> u64 {
        self.duration_us * (self.tick_hz / 1_000_000)
    }

    pub fn events_for(&self, pin: Pin) -> impl Iterator<Item = &PinEvent> + '_ {
        self.events.iter().filter(move |e| e.pin == pin)
    }

    /// Level of `pin` at `tick`, counting an event at exactly `tick`.
    pub fn level_at(&self, pin: Pin, tick: u64) -> Level {
        self.events_for(pin)
            .take_while(|e| e.tick <= tick)
            .last()
            .map(|e| e.level)
            .unwrap_or(Level::Low)
    }
}
