//! Assembler for the register machine.
//!
//! ```text
//! [label:] MNEMONIC [operand {, operand}]   ; comment
//! ```
//!
//! Registers are written `r0`..`r7`. Immediates and addresses are decimal or
//! `0x` hex. Jump targets are labels or instruction indices. A line may hold
//! a label alone; it then names the next instruction.

use std::collections::HashMap;

use super::isa::{Instruction, Program, ProgramError, Reg, MAX_PROGRAM_LEN, MEM_WORDS};
use crate::digest::Digest;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic {mnemonic:?}")]
    UnknownMnemonic { line: usize, mnemonic: String },
    #[error("line {line}: undefined label {label:?}")]
    UndefinedLabel { line: usize, label: String },
    #[error("line {line}: label {label:?} already defined")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: register {text:?} out of range (r0..r7)")]
    RegisterOutOfRange { line: usize, text: String },
    #[error("program has {count} instructions, limit is {MAX_PROGRAM_LEN}")]
    ProgramTooLong { count: usize },
    #[error("line {line}: {message}")]
    BadOperand { line: usize, message: String },
    #[error("line {line}: jump target {target} outside the program")]
    JumpOutOfRange { line: usize, target: u64 },
    #[error("program contains no instructions")]
    EmptyProgram,
}

enum Target {
    Label(String),
    Index(u64),
}

enum Pending {
    Done(Instruction),
    Jmp(Target),
    Jnz(Reg, Target),
}

struct Line<'a> {
    number: usize,
    mnemonic: &'a str,
    operands: Vec<&'a str>,
}

/// Assembles `text` into a program. The source digest covers the exact input bytes.
pub fn assemble(text: &str) -> Result<Program, AsmError> {
    let mut labels: HashMap<&str, usize> = HashMap::new();
    let mut lines = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let mut rest = raw.split(';').next().unwrap_or("").trim();
        if let Some((head, tail)) = rest.split_once(':') {
            let label = head.trim();
            if !is_identifier(label) {
                return Err(AsmError::BadOperand {
                    line: number,
                    message: format!("invalid label {label:?}"),
                });
            }
            if labels.insert(label, lines.len()).is_some() {
                return Err(AsmError::DuplicateLabel {
                    line: number,
                    label: label.to_string(),
                });
            }
            rest = tail.trim();
        }
        if rest.is_empty() {
            continue;
        }
        let (mnemonic, operand_text) = match rest.split_once(char::is_whitespace) {
            Some((m, o)) => (m, o.trim()),
            None => (rest, ""),
        };
        let operands = operand_text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        lines.push(Line {
            number,
            mnemonic,
            operands,
        });
    }

    if lines.is_empty() {
        return Err(AsmError::EmptyProgram);
    }
    if lines.len() > MAX_PROGRAM_LEN {
        return Err(AsmError::ProgramTooLong { count: lines.len() });
    }

    let pending = lines
        .iter()
        .map(parse_line)
        .collect::<Result<Vec<_>, _>>()?;

    let len = lines.len();
    let resolve = |target: Target, line: usize| -> Result<u16, AsmError> {
        let index = match target {
            Target::Label(name) => match labels.get(name.as_str()) {
                Some(&i) => i as u64,
                None => return Err(AsmError::UndefinedLabel { line, label: name }),
            },
            Target::Index(i) => i,
        };
        // A label on the last line with nothing after it points one past the end.
        if index >= len as u64 {
            return Err(AsmError::JumpOutOfRange {
                line,
                target: index,
            });
        }
        Ok(index as u16)
    };

    let mut instructions = Vec::with_capacity(len);
    for (p, line) in pending.into_iter().zip(&lines) {
        let ins = match p {
            Pending::Done(ins) => ins,
            Pending::Jmp(t) => Instruction::Jmp {
                target: resolve(t, line.number)?,
            },
            Pending::Jnz(rs, t) => Instruction::Jnz {
                rs,
                target: resolve(t, line.number)?,
            },
        };
        instructions.push(ins);
    }

    Program::with_digest(instructions, Digest::of(text.as_bytes())).map_err(|e| match e {
        ProgramError::Empty => AsmError::EmptyProgram,
        ProgramError::TooLong(count) => AsmError::ProgramTooLong { count },
        ProgramError::JumpOutOfRange { index, target } => AsmError::JumpOutOfRange {
            line: lines[index].number,
            target: target as u64,
        },
    })
}

fn parse_line(line: &Line<'_>) -> Result<Pending, AsmError> {
    let n = line.number;
    let ops = &line.operands;
    let arity = |expected: usize| -> Result<(), AsmError> {
        if ops.len() == expected {
            Ok(())
        } else {
            Err(AsmError::BadOperand {
                line: n,
                message: format!(
                    "{} takes {expected} operand(s), found {}",
                    line.mnemonic.to_ascii_uppercase(),
                    ops.len()
                ),
            })
        }
    };

    let pending = match line.mnemonic.to_ascii_uppercase().as_str() {
        "LOADI" => {
            arity(2)?;
            Pending::Done(Instruction::LoadI {
                rd: reg(ops[0], n)?,
                imm: number(ops[1], n)?,
            })
        }
        "MOV" => {
            arity(2)?;
            Pending::Done(Instruction::Mov {
                rd: reg(ops[0], n)?,
                rs: reg(ops[1], n)?,
            })
        }
        "ADD" => {
            arity(2)?;
            Pending::Done(Instruction::Add {
                rd: reg(ops[0], n)?,
                rs: reg(ops[1], n)?,
            })
        }
        "SUB" => {
            arity(2)?;
            Pending::Done(Instruction::Sub {
                rd: reg(ops[0], n)?,
                rs: reg(ops[1], n)?,
            })
        }
        "LOAD" => {
            arity(2)?;
            Pending::Done(Instruction::Load {
                rd: reg(ops[0], n)?,
                addr: address(ops[1], n)?,
            })
        }
        "STORE" => {
            arity(2)?;
            Pending::Done(Instruction::Store {
                rs: reg(ops[0], n)?,
                addr: address(ops[1], n)?,
            })
        }
        "JMP" => {
            arity(1)?;
            Pending::Jmp(target(ops[0], n)?)
        }
        "JNZ" => {
            arity(2)?;
            Pending::Jnz(reg(ops[0], n)?, target(ops[1], n)?)
        }
        "ACK" => {
            arity(0)?;
            Pending::Done(Instruction::Ack)
        }
        "NOP" => {
            arity(0)?;
            Pending::Done(Instruction::Nop)
        }
        "HALT" => {
            arity(0)?;
            Pending::Done(Instruction::Halt)
        }
        _ => {
            return Err(AsmError::UnknownMnemonic {
                line: n,
                mnemonic: line.mnemonic.to_string(),
            })
        }
    };
    Ok(pending)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn reg(text: &str, line: usize) -> Result<Reg, AsmError> {
    let digits = text
        .strip_prefix('r')
        .or_else(|| text.strip_prefix('R'))
        .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        .ok_or_else(|| AsmError::BadOperand {
            line,
            message: format!("expected register, found {text:?}"),
        })?;
    digits
        .parse::<u8>()
        .ok()
        .and_then(Reg::new)
        .ok_or_else(|| AsmError::RegisterOutOfRange {
            line,
            text: text.to_string(),
        })
}

fn number(text: &str, line: usize) -> Result<u64, AsmError> {
    let parsed = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => text.parse::<u64>(),
    };
    parsed.map_err(|_| AsmError::BadOperand {
        line,
        message: format!("expected unsigned 64-bit number, found {text:?}"),
    })
}

fn address(text: &str, line: usize) -> Result<u8, AsmError> {
    let value = number(text, line)?;
    if value >= MEM_WORDS as u64 {
        return Err(AsmError::BadOperand {
            line,
            message: format!("memory address {value} outside 0..{MEM_WORDS}"),
        });
    }
    Ok(value as u8)
}

fn target(text: &str, line: usize) -> Result<Target, AsmError> {
    if text.as_bytes()[0].is_ascii_digit() {
        number(text, line).map(Target::Index)
    } else if is_identifier(text) {
        Ok(Target::Label(text.to_string()))
    } else {
        Err(AsmError::BadOperand {
            line,
            message: format!("expected label or index, found {text:?}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(i: u8) -> Reg {
        Reg::new(i).unwrap()
    }

    #[test]
    fn single_loadi() {
        let p = assemble("LOADI r0, 5").unwrap();
        assert_eq!(p.instructions(), &[Instruction::LoadI { rd: r(0), imm: 5 }]);
    }

    #[test]
    fn self_referential_label() {
        let p = assemble("loop: JMP loop").unwrap();
        assert_eq!(p.instructions(), &[Instruction::Jmp { target: 0 }]);
    }

    #[test]
    fn undefined_label() {
        assert!(matches!(
            assemble("JMP nowhere"),
            Err(AsmError::UndefinedLabel { line: 1, .. })
        ));
    }

    #[test]
    fn labels_comments_and_hex() {
        let src = "; counter\nstart:\n  LOADI r1, 0x10 ; sixteen\n  SUB r1, r2\n  JNZ r1, start\n  HALT\n";
        let p = assemble(src).unwrap();
        assert_eq!(
            p.instructions(),
            &[
                Instruction::LoadI { rd: r(1), imm: 16 },
                Instruction::Sub { rd: r(1), rs: r(2) },
                Instruction::Jnz {
                    rs: r(1),
                    target: 0
                },
                Instruction::Halt,
            ]
        );
        assert_eq!(p.source_digest(), Digest::of(src.as_bytes()));
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(
            assemble("FROB r0"),
            Err(AsmError::UnknownMnemonic { .. })
        ));
        assert!(matches!(
            assemble("a: NOP\na: NOP"),
            Err(AsmError::DuplicateLabel { line: 2, .. })
        ));
        assert!(matches!(
            assemble("LOADI r8, 1"),
            Err(AsmError::RegisterOutOfRange { .. })
        ));
        assert!(matches!(
            assemble("STORE r0, 256"),
            Err(AsmError::BadOperand { .. })
        ));
        assert!(matches!(
            assemble("JMP 1"),
            Err(AsmError::JumpOutOfRange { .. })
        ));
        assert!(matches!(
            assemble("; nothing\n"),
            Err(AsmError::EmptyProgram)
        ));
        assert!(matches!(
            assemble("ADD r0"),
            Err(AsmError::BadOperand { .. })
        ));
        let long = "NOP\n".repeat(MAX_PROGRAM_LEN + 1);
        assert!(matches!(
            assemble(&long),
            Err(AsmError::ProgramTooLong { .. })
        ));
        assert!(assemble(&"NOP\n".repeat(MAX_PROGRAM_LEN)).is_ok());
    }

    #[test]
    fn trailing_label_without_jump_is_harmless() {
        // The label is dangling but unused.
        assert!(assemble("NOP\nend:").is_ok());
        assert!(matches!(
            assemble("JMP end\nend:"),
            Err(AsmError::JumpOutOfRange { .. })
        ));
    }

    #[test]
    fn listing_reassembles() {
        let p = assemble("x: LOADI r3, 7\nSTORE r3, 20\nJNZ r3, x\nACK\nHALT").unwrap();
        let again = assemble(&p.listing()).unwrap();
        assert_eq!(p.instructions(), again.instructions());
        assert_eq!(
            Program::from_instructions(p.instructions().to_vec())
                .unwrap()
                .source_digest(),
            again.source_digest()
        );
    }
}
