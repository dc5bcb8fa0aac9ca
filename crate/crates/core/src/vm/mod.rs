//! Deterministic register machine: instruction set, assembler and state transition.

mod asm;
mod isa;
mod state;

pub use asm::{assemble, AsmError};
pub use isa::{Instruction, Program, ProgramError, Reg, MAX_PROGRAM_LEN, MEM_WORDS, NUM_REGS};
pub use state::{
    state_digest, MemWrite, VmError, VmState, CANONICAL_LEN, FLAG_FAULTED, FLAG_HALTED,
    FLAG_PENDING,
};

/// Memory cell reserved for the supervisor's abnormal-behaviour flag.
pub const FLAG_ADDR: u8 = 255;
