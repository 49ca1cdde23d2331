use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::asm::DutProgram;
use super::isa::{Instruction, Level, Pin, Port};
use super::profile::DutProfile;
use super::trace::{PinEvent, PinEventTrace, PrintLog};

/// Longest run accepted, in microseconds of virtual time.
pub const MAX_DURATION_US: u64 = 60_000_000;

/// Input-port values that take effect at `tick_us`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSample {
    pub tick_us: u64,
    pub in0: u16,
    pub in1: u16,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error("duration {0} us exceeds the 60 s limit")]
    DurationTooLong(u64),
    #[error("port schedule entry {0} is not after the previous one")]
    ScheduleNotIncreasing(usize),
}

/// Executes `program` from reset for `duration_us` of virtual time.
pub fn run(
    program: &DutProgram,
    profile: &DutProfile,
    schedule: &[PortSample],
    duration_us: u64,
) -> Result<PinEventTrace, RunError> {
    run_observed(program, profile, schedule, duration_us, |_, _| {})
}

/// Like [`run`], reporting every executed instruction and its tick cost.
pub fn run_observed(
    program: &DutProgram,
    profile: &DutProfile,
    schedule: &[PortSample],
    duration_us: u64,
    mut observer: impl FnMut(&Instruction, u64),
) -> Result<PinEventTrace, RunError> {
    if duration_us > MAX_DURATION_US {
        return Err(RunError::DurationTooLong(duration_us));
    }
    if let Some(i) = (1..schedule.len()).find(|&i| schedule[i].tick_us <= schedule[i - 1].tick_us) {
        return Err(RunError::ScheduleNotIncreasing(i));
    }

    let mut machine = Machine::new(program, profile, schedule, duration_us);
    machine.execute(&mut observer);
    Ok(machine.finish(duration_us))
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct PwmSettings {
    pin: Pin,
    period: u64,
    high: u64,
}

struct PwmUnit {
    settings: PwmSettings,
    next_edge: u64,
    next_level: Level,
}

struct Machine<'a> {
    program: &'a [Instruction],
    profile: DutProfile,
    ports: Vec<(u64, u16, u16)>,
    port_cursor: usize,
    regs: [u16; 8],
    pc: usize,
    tick: u64,
    end: u64,
    levels: Vec<Level>,
    pwm: Option<PwmUnit>,
    events: Vec<PinEvent>,
    print: PrintLog,
}

impl<'a> Machine<'a> {
    fn new(
        program: &'a DutProgram,
        profile: &DutProfile,
        schedule: &[PortSample],
        duration_us: u64,
    ) -> Self {
        let tpu = profile.ticks_per_us();
        Self {
            program: program.instructions(),
            profile: *profile,
            ports: schedule.iter().map(|s| (s.tick_us * tpu, s.in0, s.in1)).collect(),
            port_cursor: 0,
            regs: [0; 8],
            pc: 0,
            tick: 0,
            end: duration_us * tpu,
            levels: vec![Level::Low; profile.pins as usize],
            pwm: None,
            events: Vec::new(),
            print: PrintLog::default(),
        }
    }

    fn execute(&mut self, observer: &mut impl FnMut(&Instruction, u64)) {
        while self.tick < self.end {
            let Some(&ins) = self.program.get(self.pc) else {
                break;
            };
            self.pc += 1;
            let cost = self.step(ins);
            observer(&ins, cost);
            self.tick += cost;
            if ins == Instruction::Halt {
                break;
            }
        }
    }

    /// Executes one instruction starting at `self.tick`, returning its cost.
    /// Side effects on pins land when the instruction completes.
    fn step(&mut self, ins: Instruction) -> u64 {
        let t = self.tick;
        match ins {
            Instruction::Ldi { dst, imm } => self.regs[dst.index()] = imm,
            Instruction::Mov { dst, src } => self.regs[dst.index()] = self.regs[src.index()],
            Instruction::Alu { op, dst, lhs, rhs } => {
                self.regs[dst.index()] = op.apply(self.regs[lhs.index()], self.regs[rhs.index()]);
            }
            Instruction::RdPort { dst, port } => {
                let (in0, in1) = self.ports_at(t);
                self.regs[dst.index()] = match port {
                    Port::In0 => in0,
                    Port::In1 => in1,
                };
            }
            Instruction::Set(pin) => self.write_pin(pin, t + 1, Level::High),
            Instruction::Clr(pin) => self.write_pin(pin, t + 1, Level::Low),
            Instruction::WaitImm(n) => return u64::from(n).max(1),
            Instruction::WaitReg(r) => return u64::from(self.regs[r.index()]).max(1),
            Instruction::Jmp(target) => self.pc = target,
            Instruction::Branch { cond, lhs, rhs, target } => {
                if cond.holds(self.regs[lhs.index()], self.regs[rhs.index()]) {
                    self.pc = target;
                }
            }
            Instruction::PwmHw { pin, period, duty_pct } => {
                let period = u64::from(self.regs[period.index()]);
                let duty = u64::from(self.regs[duty_pct.index()]).min(100);
                self.configure_pwm(t + 1, PwmSettings { pin, period, high: period * duty / 100 });
            }
            Instruction::Print(r) => {
                let text = format!("{}\n", self.regs[r.index()]);
                let per_byte = self.profile.ticks_per_print_byte();
                for (i, byte) in text.bytes().enumerate() {
                    let done = t + (i as u64 + 1) * per_byte;
                    if done <= self.end {
                        self.print.bytes.push(byte);
                        self.print.ticks.push(done);
                    }
                }
                return text.len() as u64 * per_byte;
            }
            Instruction::Nop | Instruction::Halt => {}
        }
        1
    }

    fn ports_at(&mut self, tick: u64) -> (u16, u16) {
        while self.port_cursor < self.ports.len() && self.ports[self.port_cursor].0 <= tick {
            self.port_cursor += 1;
        }
        match self.port_cursor.checked_sub(1) {
            Some(i) => (self.ports[i].1, self.ports[i].2),
            None => (0, 0),
        }
    }

    fn drive(&mut self, pin: Pin, tick: u64, level: Level) {
        if !self.profile.has_pin(pin) || tick >= self.end {
            return;
        }
        let current = &mut self.levels[pin.index()];
        if *current != level {
            *current = level;
            self.events.push(PinEvent { tick, pin, level });
        }
    }

    /// Emits peripheral edges strictly before `until`.
    fn flush_pwm(&mut self, until: u64) {
        let until = until.min(self.end);
        while let Some(unit) = &mut self.pwm {
            if unit.next_edge >= until {
                break;
            }
            let (pin, tick, level) = (unit.settings.pin, unit.next_edge, unit.next_level);
            let s = unit.settings;
            match level {
                Level::High => {
                    unit.next_edge += s.high;
                    unit.next_level = Level::Low;
                }
                Level::Low => {
                    unit.next_edge += s.period - s.high;
                    unit.next_level = Level::High;
                }
            }
            self.drive(pin, tick, level);
        }
    }

    fn write_pin(&mut self, pin: Pin, at: u64, level: Level) {
        self.flush_pwm(at);
        if self.pwm.as_ref().is_some_and(|u| u.settings.pin == pin) {
            self.pwm = None;
        }
        self.drive(pin, at, level);
    }

    /// Reprogramming with identical settings keeps the running phase;
    /// anything else restarts the wave, high first, at `at`.
    fn configure_pwm(&mut self, at: u64, settings: PwmSettings) {
        self.flush_pwm(at);
        if self.pwm.as_ref().is_some_and(|u| u.settings == settings) {
            return;
        }
        if let Some(old) = self.pwm.take() {
            if old.settings.pin != settings.pin {
                self.drive(old.settings.pin, at, Level::Low);
            }
        }
        if settings.period == 0 || settings.high == 0 {
            self.drive(settings.pin, at, Level::Low);
            // period 0 disables the peripheral; duty 0 keeps it owning the pin
            if settings.period == 0 {
                return;
            }
            self.pwm = Some(PwmUnit { settings, next_edge: u64::MAX, next_level: Level::Low });
        } else if settings.high >= settings.period {
            self.drive(settings.pin, at, Level::High);
            self.pwm = Some(PwmUnit { settings, next_edge: u64::MAX, next_level: Level::High });
        } else {
            self.pwm = Some(PwmUnit { settings, next_edge: at, next_level: Level::High });
        }
    }

    fn finish(mut self, duration_us: u64) -> PinEventTrace {
        self.flush_pwm(self.end);
        PinEventTrace {
            events: self.events,
            tick_hz: self.profile.clock_hz,
            duration_us,
            stop_tick: self.tick,
            print_log: self.print,
        }
    }
}
