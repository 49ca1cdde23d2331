use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::isa::{AluOp, Cond, Instruction, Pin, Port, Reg};
use crate::domain::MAX_SOURCE_BYTES;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileErrorKind {
    #[error("source is {0} bytes, limit is 65536")]
    SourceTooLarge(usize),
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("bad register `{0}`, expected r0..r7")]
    BadRegister(String),
    #[error("{0}")]
    BadPin(String),
    #[error("bad port `{0}`, expected IN0 or IN1")]
    BadPort(String),
    #[error("bad immediate `{0}`")]
    BadImmediate(String),
    #[error("immediate `{0}` does not fit 16 bits")]
    OversizeImmediate(String),
    #[error("{mnemonic} takes {expected} operand(s), found {found}")]
    OperandCount { mnemonic: String, expected: usize, found: usize },
    #[error("unresolved label `{0}`")]
    UnresolvedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("bad label name `{0}`")]
    BadLabel(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct CompileError {
    /// 1-based source line; 0 for whole-file problems.
    pub line: usize,
    pub kind: CompileErrorKind,
}

/// An assembled program. Jump targets are resolved instruction indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DutProgram {
    instructions: Vec<Instruction>,
    labels: BTreeMap<String, usize>,
    source_hash: String,
}

impl DutProgram {
    /// The empty program: it halts at tick 0 and leaves every pin low.
    pub fn blank() -> Self {
        assemble("").expect("empty source assembles")
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn labels(&self) -> &BTreeMap<String, usize> {
        &self.labels
    }

    /// Hex SHA-256 of the source text.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

enum Target {
    Resolved(Instruction),
    Jump { label: String, line: usize },
    Branch { cond: Cond, lhs: Reg, rhs: Reg, label: String, line: usize },
}

pub fn assemble(source: &str) -> Result<DutProgram, CompileError> {
    if source.len() > MAX_SOURCE_BYTES {
        return Err(CompileError {
            line: 0,
            kind: CompileErrorKind::SourceTooLarge(source.len()),
        });
    }

    let mut labels = BTreeMap::new();
    let mut pending = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let err = |kind| CompileError { line, kind };
        let mut text = raw.split(';').next().unwrap_or("").trim();
        if let Some((label, rest)) = text.split_once(':') {
            let label = label.trim();
            if !is_identifier(label) {
                return Err(err(CompileErrorKind::BadLabel(label.to_owned())));
            }
            if labels.insert(label.to_owned(), pending.len()).is_some() {
                return Err(err(CompileErrorKind::DuplicateLabel(label.to_owned())));
            }
            text = rest.trim();
        }
        if text.is_empty() {
            continue;
        }
        pending.push(parse_line(text, line).map_err(err)?);
    }

    let resolve = |label: &str, line: usize| {
        labels.get(label).copied().ok_or_else(|| CompileError {
            line,
            kind: CompileErrorKind::UnresolvedLabel(label.to_owned()),
        })
    };
    let instructions = pending
        .into_iter()
        .map(|t| match t {
            Target::Resolved(ins) => Ok(ins),
            Target::Jump { label, line } => Ok(Instruction::Jmp(resolve(&label, line)?)),
            Target::Branch { cond, lhs, rhs, label, line } => Ok(Instruction::Branch {
                cond,
                lhs,
                rhs,
                target: resolve(&label, line)?,
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(DutProgram {
        instructions,
        labels,
        source_hash: hex::encode(Sha256::digest(source.as_bytes())),
    })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_line(text: &str, line: usize) -> Result<Target, CompileErrorKind> {
    let (mnemonic, rest) = match text.split_once(char::is_whitespace) {
        Some((m, r)) => (m, r.trim()),
        None => (text, ""),
    };
    let mnemonic = mnemonic.to_ascii_uppercase();
    let ops: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(str::trim).collect()
    };
    let arity = |expected: usize| {
        if ops.len() == expected {
            Ok(())
        } else {
            Err(CompileErrorKind::OperandCount {
                mnemonic: mnemonic.clone(),
                expected,
                found: ops.len(),
            })
        }
    };

    let alu = |op| -> Result<Target, CompileErrorKind> {
        arity(3)?;
        Ok(Target::Resolved(Instruction::Alu {
            op,
            dst: reg(ops[0])?,
            lhs: reg(ops[1])?,
            rhs: reg(ops[2])?,
        }))
    };
    let branch = |cond| -> Result<Target, CompileErrorKind> {
        arity(3)?;
        Ok(Target::Branch {
            cond,
            lhs: reg(ops[0])?,
            rhs: reg(ops[1])?,
            label: label(ops[2])?,
            line,
        })
    };

    let ins = match mnemonic.as_str() {
        "LDI" => {
            arity(2)?;
            Instruction::Ldi { dst: reg(ops[0])?, imm: imm(ops[1])? }
        }
        "MOV" => {
            arity(2)?;
            Instruction::Mov { dst: reg(ops[0])?, src: reg(ops[1])? }
        }
        "ADD" => return alu(AluOp::Add),
        "SUB" => return alu(AluOp::Sub),
        "MUL" => return alu(AluOp::Mul),
        "DIV" => return alu(AluOp::Div),
        "RDPORT" => {
            arity(2)?;
            Instruction::RdPort { dst: reg(ops[0])?, port: port(ops[1])? }
        }
        "SET" => {
            arity(1)?;
            Instruction::Set(pin(ops[0])?)
        }
        "CLR" => {
            arity(1)?;
            Instruction::Clr(pin(ops[0])?)
        }
        "WAITI" => {
            arity(1)?;
            Instruction::WaitImm(imm(ops[0])?)
        }
        "WAIT" => {
            arity(1)?;
            Instruction::WaitReg(reg(ops[0])?)
        }
        "JMP" => {
            arity(1)?;
            return Ok(Target::Jump { label: label(ops[0])?, line });
        }
        "BEQ" => return branch(Cond::Eq),
        "BNE" => return branch(Cond::Ne),
        "BLT" => return branch(Cond::Lt),
        "PWMHW" => {
            arity(3)?;
            Instruction::PwmHw {
                pin: pin(ops[0])?,
                period: reg(ops[1])?,
                duty_pct: reg(ops[2])?,
            }
        }
        "PRINT" => {
            arity(1)?;
            Instruction::Print(reg(ops[0])?)
        }
        "NOP" => {
            arity(0)?;
            Instruction::Nop
        }
        "HALT" => {
            arity(0)?;
            Instruction::Halt
        }
        _ => return Err(CompileErrorKind::UnknownMnemonic(mnemonic)),
    };
    Ok(Target::Resolved(ins))
}

fn reg(s: &str) -> Result<Reg, CompileErrorKind> {
    let bad = || CompileErrorKind::BadRegister(s.to_owned());
    let digits = s.strip_prefix(['r', 'R']).ok_or_else(bad)?;
    let n: u8 = digits.parse().map_err(|_| bad())?;
    if n < Reg::COUNT {
        Ok(Reg(n))
    } else {
        Err(bad())
    }
}

fn pin(s: &str) -> Result<Pin, CompileErrorKind> {
    s.parse().map_err(CompileErrorKind::BadPin)
}

fn port(s: &str) -> Result<Port, CompileErrorKind> {
    match s.to_ascii_uppercase().as_str() {
        "IN0" => Ok(Port::In0),
        "IN1" => Ok(Port::In1),
        _ => Err(CompileErrorKind::BadPort(s.to_owned())),
    }
}

fn imm(s: &str) -> Result<u16, CompileErrorKind> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    let value = parsed.map_err(|_| CompileErrorKind::BadImmediate(s.to_owned()))?;
    u16::try_from(value).map_err(|_| CompileErrorKind::OversizeImmediate(s.to_owned()))
}

fn label(s: &str) -> Result<String, CompileErrorKind> {
    if is_identifier(s) {
        Ok(s.to_owned())
    } else {
        Err(CompileErrorKind::BadLabel(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = assemble("LDI r0, 500 \n HALT").unwrap();
        assert_eq!(
            p.instructions(),
            &[Instruction::Ldi { dst: Reg(0), imm: 500 }, Instruction::Halt]
        );
        assert_eq!(p.source_hash().len(), 64);
    }

    #[test]
    fn unresolved_label() {
        let err = assemble("JMP nowhere").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.kind, CompileErrorKind::UnresolvedLabel("nowhere".into()));
    }

    #[test]
    fn labels_comments_and_case() {
        let p = assemble("; header\nstart: nop\n\n  loop:\n  bne R1, r2, start ; back\n jmp loop").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.labels()["start"], 0);
        assert_eq!(p.labels()["loop"], 1);
        assert_eq!(
            p.instructions()[1],
            Instruction::Branch { cond: Cond::Ne, lhs: Reg(1), rhs: Reg(2), target: 0 }
        );
        assert_eq!(p.instructions()[2], Instruction::Jmp(1));
    }

    #[test]
    fn error_kinds_and_lines() {
        let cases = [
            ("FOO r1", 1, CompileErrorKind::UnknownMnemonic("FOO".into())),
            ("NOP\nMOV r8, r1", 2, CompileErrorKind::BadRegister("r8".into())),
            ("LDI r0, 65536", 1, CompileErrorKind::OversizeImmediate("65536".into())),
            ("LDI r0, -1", 1, CompileErrorKind::BadImmediate("-1".into())),
            ("RDPORT r0, IN2", 1, CompileErrorKind::BadPort("IN2".into())),
            ("a:\na: NOP", 2, CompileErrorKind::DuplicateLabel("a".into())),
            (
                "ADD r0, r1",
                1,
                CompileErrorKind::OperandCount { mnemonic: "ADD".into(), expected: 3, found: 2 },
            ),
        ];
        for (src, line, kind) in cases {
            let err = assemble(src).unwrap_err();
            assert_eq!((err.line, err.kind), (line, kind), "{src}");
        }
        assert!(matches!(
            assemble("SET P9").unwrap_err().kind,
            CompileErrorKind::BadPin(_)
        ));
    }

    #[test]
    fn hex_immediates() {
        let p = assemble("WAITI 0xFFFF").unwrap();
        assert_eq!(p.instructions(), &[Instruction::WaitImm(0xFFFF)]);
    }

    #[test]
    fn oversize_source_rejected() {
        let src = "NOP\n".repeat(MAX_SOURCE_BYTES / 4 + 1);
        assert_eq!(assemble(&src).unwrap_err().kind, CompileErrorKind::SourceTooLarge(src.len()));
    }

    #[test]
    fn blank_is_empty() {
        assert!(DutProgram::blank().is_empty());
    }
}
