use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Level {
    Low,
    High,
}

impl Level {
    pub fn toggled(self) -> Self {
        match self {
            Level::Low => Level::High,
            Level::High => Level::Low,
        }
    }

    pub fn bit(self) -> u8 {
        self.into()
    }
}

impl From<Level> for u8 {
    fn from(level: Level) -> u8 {
        match level {
            Level::Low => 0,
            Level::High => 1,
        }
    }
}

impl TryFrom<u8> for Level {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Level::Low),
            1 => Ok(Level::High),
            other => Err(format!("level must be 0 or 1, got {other}")),
        }
    }
}

/// General-purpose register `r0`..`r7`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Reg(pub(crate) u8);

impl Reg {
    pub const COUNT: u8 = 8;

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Output pin `P<n>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pin(pub u8);

impl Pin {
    /// Highest pin number the assembler accepts; profiles expose fewer.
    pub const MAX: u8 = 7;

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl FromStr for Pin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('P')
            .or_else(|| s.strip_prefix('p'))
            .ok_or_else(|| format!("bad pin `{s}`"))?;
        let n: u8 = digits.parse().map_err(|_| format!("bad pin `{s}`"))?;
        if n > Pin::MAX {
            return Err(format!("pin `{s}` out of range P0..P{}", Pin::MAX));
        }
        Ok(Pin(n))
    }
}

impl Serialize for Pin {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Externally driven 16-bit input ports: `IN0` carries the commanded period in
/// microseconds, `IN1` the duty cycle in whole percent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Port {
    In0,
    In1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AluOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl AluOp {
    pub fn apply(self, a: u16, b: u16) -> u16 {
        match self {
            AluOp::Add => a.wrapping_add(b),
            AluOp::Sub => a.wrapping_sub(b),
            AluOp::Mul => a.wrapping_mul(b),
            AluOp::Div => a.checked_div(b).unwrap_or(0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cond {
    Eq,
    Ne,
    Lt,
}

impl Cond {
    pub fn holds(self, a: u16, b: u16) -> bool {
        match self {
            Cond::Eq => a == b,
            Cond::Ne => a != b,
            Cond::Lt => a < b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instruction {
    Ldi { dst: Reg, imm: u16 },
    Mov { dst: Reg, src: Reg },
    Alu { op: AluOp, dst: Reg, lhs: Reg, rhs: Reg },
    RdPort { dst: Reg, port: Port },
    Set(Pin),
    Clr(Pin),
    WaitImm(u16),
    WaitReg(Reg),
    Jmp(usize),
    Branch { cond: Cond, lhs: Reg, rhs: Reg, target: usize },
    PwmHw { pin: Pin, period: Reg, duty_pct: Reg },
    Print(Reg),
    Nop,
    Halt,
}
