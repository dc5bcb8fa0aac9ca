use std::fmt;

use crate::digest::Digest;

pub const NUM_REGS: usize = 8;
pub const MEM_WORDS: usize = 256;
pub const MAX_PROGRAM_LEN: usize = 4096;

/// A register index, always `< NUM_REGS`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(u8);

impl Reg {
    pub fn new(index: u8) -> Option<Reg> {
        ((index as usize) < NUM_REGS).then_some(Reg(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    LoadI { rd: Reg, imm: u64 },
    Mov { rd: Reg, rs: Reg },
    Add { rd: Reg, rs: Reg },
    Sub { rd: Reg, rs: Reg },
    Load { rd: Reg, addr: u8 },
    Store { rs: Reg, addr: u8 },
    Jmp { target: u16 },
    Jnz { rs: Reg, target: u16 },
    Ack,
    Nop,
    Halt,
}

impl Instruction {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instruction::LoadI { .. } => "LOADI",
            Instruction::Mov { .. } => "MOV",
            Instruction::Add { .. } => "ADD",
            Instruction::Sub { .. } => "SUB",
            Instruction::Load { .. } => "LOAD",
            Instruction::Store { .. } => "STORE",
            Instruction::Jmp { .. } => "JMP",
            Instruction::Jnz { .. } => "JNZ",
            Instruction::Ack => "ACK",
            Instruction::Nop => "NOP",
            Instruction::Halt => "HALT",
        }
    }

    pub fn jump_target(&self) -> Option<u16> {
        match *self {
            Instruction::Jmp { target } | Instruction::Jnz { target, .. } => Some(target),
            _ => None,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.mnemonic();
        match *self {
            Instruction::LoadI { rd, imm } => write!(f, "{m} {rd}, {imm}"),
            Instruction::Mov { rd, rs }
            | Instruction::Add { rd, rs }
            | Instruction::Sub { rd, rs } => {
                write!(f, "{m} {rd}, {rs}")
            }
            Instruction::Load { rd, addr } => write!(f, "{m} {rd}, {addr}"),
            Instruction::Store { rs, addr } => write!(f, "{m} {rs}, {addr}"),
            Instruction::Jmp { target } => write!(f, "{m} {target}"),
            Instruction::Jnz { rs, target } => write!(f, "{m} {rs}, {target}"),
            Instruction::Ack | Instruction::Nop | Instruction::Halt => f.write_str(m),
        }
    }
}

/// An assembled program. Every jump target lies inside the program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    instructions: Vec<Instruction>,
    source_digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("program is empty")]
    Empty,
    #[error("program has {0} instructions, limit is {MAX_PROGRAM_LEN}")]
    TooLong(usize),
    #[error("instruction {index} jumps to {target}, outside the program")]
    JumpOutOfRange { index: usize, target: u16 },
}

impl Program {
    pub(crate) fn with_digest(
        instructions: Vec<Instruction>,
        source_digest: Digest,
    ) -> Result<Program, ProgramError> {
        if instructions.is_empty() {
            return Err(ProgramError::Empty);
        }
        if instructions.len() > MAX_PROGRAM_LEN {
            return Err(ProgramError::TooLong(instructions.len()));
        }
        for (index, ins) in instructions.iter().enumerate() {
            if let Some(target) = ins.jump_target() {
                if target as usize >= instructions.len() {
                    return Err(ProgramError::JumpOutOfRange { index, target });
                }
            }
        }
        Ok(Program {
            instructions,
            source_digest,
        })
    }

    /// Builds a program directly from instructions. The source digest is taken
    /// over the canonical listing (`Display`), so it equals the digest of
    /// assembling that listing.
    pub fn from_instructions(instructions: Vec<Instruction>) -> Result<Program, ProgramError> {
        let listing = listing(&instructions);
        Program::with_digest(instructions, Digest::of(listing.as_bytes()))
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn get(&self, pc: usize) -> Option<&Instruction> {
        self.instructions.get(pc)
    }

    pub fn source_digest(&self) -> Digest {
        self.source_digest
    }

    /// One instruction per line, newline-terminated; re-assembles to the same program.
    pub fn listing(&self) -> String {
        listing(&self.instructions)
    }
}

fn listing(instructions: &[Instruction]) -> String {
    let mut out = String::new();
    for ins in instructions {
        out.push_str(&ins.to_string());
        out.push('\n');
    }
    out
}
