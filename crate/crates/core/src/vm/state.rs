use super::isa::{Instruction, Program, MEM_WORDS, NUM_REGS};
use crate::digest::Digest;

/// Length of [`VmState::canonical_bytes`].
pub const CANONICAL_LEN: usize = 4 + NUM_REGS * 8 + MEM_WORDS * 8 + 1;

pub const FLAG_PENDING: u8 = 0b001;
pub const FLAG_HALTED: u8 = 0b010;
pub const FLAG_FAULTED: u8 = 0b100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VmError {
    #[error("cannot interrupt a process that is no longer running")]
    InterruptOnHalted,
}

/// Full machine state of one supervised process.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct VmState {
    pub tick: u64,
    pub pc: u16,
    pub regs: [u64; NUM_REGS],
    pub mem: [u64; MEM_WORDS],
    pub pending_interrupt: bool,
    pub interrupt_since: Option<u64>,
    pub halted: bool,
    pub faulted: bool,
}

/// A memory write performed by one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemWrite {
    /// Tick of the state whose current instruction performed the write.
    pub tick: u64,
    pub addr: u8,
    pub value: u64,
}

impl Default for VmState {
    fn default() -> Self {
        VmState {
            tick: 0,
            pc: 0,
            regs: [0; NUM_REGS],
            mem: [0; MEM_WORDS],
            pending_interrupt: false,
            interrupt_since: None,
            halted: false,
            faulted: false,
        }
    }
}

impl VmState {
    pub fn new() -> VmState {
        VmState::default()
    }

    pub fn is_live(&self) -> bool {
        !self.halted && !self.faulted
    }

    pub fn flag_bits(&self) -> u8 {
        let mut bits = 0;
        if self.pending_interrupt {
            bits |= FLAG_PENDING;
        }
        if self.halted {
            bits |= FLAG_HALTED;
        }
        if self.faulted {
            bits |= FLAG_FAULTED;
        }
        bits
    }

    /// The instruction at `pc`, if `pc` is inside the program.
    pub fn current_instruction<'p>(&self, program: &'p Program) -> Option<&'p Instruction> {
        program.get(self.pc as usize)
    }

    /// One machine step. Dead states (halted or faulted) are returned unchanged.
    pub fn step(&self, program: &Program) -> VmState {
        self.step_traced(program).0
    }

    /// One machine step, also reporting the memory write it performed, if any.
    pub fn step_traced(&self, program: &Program) -> (VmState, Option<MemWrite>) {
        let mut next = self.clone();
        if !self.is_live() {
            return (next, None);
        }
        next.tick = self.tick + 1;
        let Some(&ins) = self.current_instruction(program) else {
            next.faulted = true;
            return (next, None);
        };
        let mut write = None;
        let mut pc = self.pc + 1;
        match ins {
            Instruction::LoadI { rd, imm } => next.regs[rd.index()] = imm,
            Instruction::Mov { rd, rs } => next.regs[rd.index()] = self.regs[rs.index()],
            Instruction::Add { rd, rs } => {
                next.regs[rd.index()] = self.regs[rd.index()].wrapping_add(self.regs[rs.index()])
            }
            Instruction::Sub { rd, rs } => {
                next.regs[rd.index()] = self.regs[rd.index()].wrapping_sub(self.regs[rs.index()])
            }
            Instruction::Load { rd, addr } => next.regs[rd.index()] = self.mem[addr as usize],
            Instruction::Store { rs, addr } => {
                let value = self.regs[rs.index()];
                next.mem[addr as usize] = value;
                write = Some(MemWrite {
                    tick: self.tick,
                    addr,
                    value,
                });
            }
            Instruction::Jmp { target } => pc = target,
            Instruction::Jnz { rs, target } => {
                if self.regs[rs.index()] != 0 {
                    pc = target;
                }
            }
            Instruction::Ack => {
                next.pending_interrupt = false;
                next.interrupt_since = None;
            }
            Instruction::Nop => {}
            Instruction::Halt => {
                next.halted = true;
                pc = self.pc;
            }
        }
        next.pc = pc;
        (next, write)
    }

    /// Marks an interrupt pending. The first injection's tick is kept.
    pub fn inject_interrupt(&self, now: u64) -> Result<VmState, VmError> {
        if !self.is_live() {
            return Err(VmError::InterruptOnHalted);
        }
        let mut next = self.clone();
        if !next.pending_interrupt {
            next.pending_interrupt = true;
            next.interrupt_since = Some(now);
        }
        Ok(next)
    }

    /// Fixed-width big-endian serialization: pc (u32), registers, memory, flag bits.
    /// The tick and the interrupt timestamp are not part of it.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CANONICAL_LEN);
        out.extend_from_slice(&(self.pc as u32).to_be_bytes());
        for r in &self.regs {
            out.extend_from_slice(&r.to_be_bytes());
        }
        out.extend_from_slice(&memory_bytes(&self.mem));
        out.push(self.flag_bits());
        out
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.canonical_bytes())
    }

    pub fn mem_digest(&self) -> Digest {
        Digest::of(&memory_bytes(&self.mem))
    }
}

fn memory_bytes(mem: &[u64; MEM_WORDS]) -> Vec<u8> {
    mem.iter().flat_map(|w| w.to_be_bytes()).collect()
}

/// Digest of a state's canonical serialization.
pub fn state_digest(state: &VmState) -> Digest {
    state.digest()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::assemble;

    #[test]
    fn loadi_from_zero_state() {
        let p = assemble("LOADI r0, 5").unwrap();
        let s = VmState::new().step(&p);
        assert_eq!((s.regs[0], s.pc, s.tick), (5, 1, 1));
    }

    #[test]
    fn add_wraps() {
        let p = assemble("ADD r0, r1").unwrap();
        let mut s = VmState::new();
        s.regs[0] = u64::MAX;
        s.regs[1] = 2;
        assert_eq!(s.step(&p).regs[0], 1);
    }

    #[test]
    fn sub_wraps() {
        let p = assemble("SUB r0, r1").unwrap();
        let mut s = VmState::new();
        s.regs[1] = 1;
        assert_eq!(s.step(&p).regs[0], u64::MAX);
    }

    #[test]
    fn jnz_falls_through_on_zero() {
        let p = assemble("NOP\nNOP\nJNZ r3, 7\nNOP\nNOP\nNOP\nNOP\nNOP").unwrap();
        let mut s = VmState::new();
        s.pc = 2;
        assert_eq!(s.step(&p).pc, 3);
        s.regs[3] = 1;
        assert_eq!(s.step(&p).pc, 7);
    }

    #[test]
    fn running_off_the_end_faults() {
        let p = assemble("NOP").unwrap();
        let s1 = VmState::new().step(&p);
        assert!(s1.is_live());
        assert_eq!(s1.pc, 1);
        let s2 = s1.step(&p);
        assert!(s2.faulted && !s2.halted);
        assert_eq!(s2.tick, 2);
        // Dead states are fixed points.
        assert_eq!(s2.step(&p), s2);
    }

    #[test]
    fn halt_keeps_pc() {
        let p = assemble("HALT").unwrap();
        let s = VmState::new().step(&p);
        assert!(s.halted && !s.faulted);
        assert_eq!(s.pc, 0);
    }

    #[test]
    fn store_and_load() {
        let p = assemble("LOADI r2, 9\nSTORE r2, 40\nLOAD r5, 40").unwrap();
        let s0 = VmState::new();
        let s1 = s0.step(&p);
        let (s2, w) = s1.step_traced(&p);
        assert_eq!(
            w,
            Some(MemWrite {
                tick: 1,
                addr: 40,
                value: 9
            })
        );
        assert_eq!(s2.step(&p).regs[5], 9);
    }

    #[test]
    fn interrupts() {
        let s = VmState::new().inject_interrupt(4).unwrap();
        assert!(s.pending_interrupt);
        assert_eq!(s.interrupt_since, Some(4));

        let s = VmState::new()
            .inject_interrupt(2)
            .unwrap()
            .inject_interrupt(9)
            .unwrap();
        assert_eq!(s.interrupt_since, Some(2));

        let mut halted = VmState::new();
        halted.halted = true;
        assert_eq!(halted.inject_interrupt(1), Err(VmError::InterruptOnHalted));

        let p = assemble("ACK").unwrap();
        let acked = s.step(&p);
        assert!(!acked.pending_interrupt);
        assert_eq!(acked.interrupt_since, None);
    }

    #[test]
    fn digest_ignores_tick() {
        let a = VmState::new();
        let mut b = VmState::new();
        b.tick = 99;
        assert_eq!(a.digest(), b.digest());
        b.regs[5] = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.canonical_bytes().len(), CANONICAL_LEN);
    }
}
