use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::isa::Pin;

/// A virtual DUT variant. All variants share the ISA; they differ in clock
/// rate and the number of physical output pins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DutProfile {
    pub id: &'static str,
    pub clock_hz: u64,
    pub pins: u8,
}

impl DutProfile {
    pub const V1: DutProfile = DutProfile { id: "dut-v1", clock_hz: 1_000_000, pins: 4 };
    pub const V2: DutProfile = DutProfile { id: "dut-v2", clock_hz: 2_000_000, pins: 6 };
    pub const ALL: [DutProfile; 2] = [DutProfile::V1, DutProfile::V2];

    /// UART bit rate the print log is throttled to, bytes per second.
    pub const UART_BYTES_PER_SEC: u64 = 100_000;

    pub fn lookup(id: &str) -> Option<DutProfile> {
        Self::ALL.into_iter().find(|p| p.id == id)
    }

    pub fn ticks_per_us(&self) -> u64 {
        self.clock_hz / 1_000_000
    }

    /// Ticks needed to shift one byte out of the 1 Mbps UART.
    pub fn ticks_per_print_byte(&self) -> u64 {
        self.clock_hz / Self::UART_BYTES_PER_SEC
    }

    pub fn has_pin(&self, pin: Pin) -> bool {
        pin.0 < self.pins
    }
}

impl Serialize for DutProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id)
    }
}

impl<'de> Deserialize<'de> for DutProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let id = String::deserialize(deserializer)?;
        DutProfile::lookup(&id)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown DUT profile `{id}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uart_budget_is_ten_microseconds_per_byte() {
        for p in DutProfile::ALL {
            assert_eq!(p.ticks_per_print_byte() / p.ticks_per_us(), 10);
        }
    }

    #[test]
    fn lookup_by_id() {
        assert_eq!(DutProfile::lookup("dut-v2"), Some(DutProfile::V2));
        assert_eq!(DutProfile::lookup("nucleo"), None);
        assert!(DutProfile::V1.has_pin(Pin(3)));
        assert!(!DutProfile::V1.has_pin(Pin(4)));
        assert!(DutProfile::V2.has_pin(Pin(5)));
    }
}
