//! Deterministic virtual microcontroller: a small register ISA executed
//! against a tick clock, observable only through its output pins and its
//! UART print log.

mod asm;
mod isa;
mod machine;
mod profile;
mod trace;

pub use asm::{assemble, CompileError, CompileErrorKind, DutProgram};
pub use isa::{AluOp, Cond, Instruction, Level, Pin, Port, Reg};
pub use machine::{run, run_observed, PortSample, RunError, MAX_DURATION_US};
pub use profile::DutProfile;
pub use trace::{PinEvent, PinEventTrace, PrintLog};
