//! The machine state space: registers, data memory, instruction counter,
//! instruction register, program, flags and clock.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{Concrete, Domain};
use crate::isa::{Instruction, InstructionCode, MemoryAddress, Register};

pub const MEMORY_SIZE: usize = 256;
pub const PROGRAM_SIZE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Flag {
    Condition,
    Overflow,
    Halt,
}

impl Flag {
    pub const ALL: [Flag; 3] = [Flag::Condition, Flag::Overflow, Flag::Halt];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Flag::Condition => "Condition",
            Flag::Overflow => "Overflow",
            Flag::Halt => "Halt",
        }
    }

    pub fn from_name(name: &str) -> Option<Flag> {
        Flag::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Program memory. Always concrete; slots past the loaded code hold `halt`.
#[derive(Clone, PartialEq, Eq)]
pub struct Program([InstructionCode; PROGRAM_SIZE]);

impl Program {
    pub fn new(code: &[InstructionCode]) -> Result<Program, BootError> {
        if code.len() > PROGRAM_SIZE {
            return Err(BootError::ProgramTooLarge { index: PROGRAM_SIZE });
        }
        let mut slots = [Instruction::Halt.encode(); PROGRAM_SIZE];
        slots[..code.len()].copy_from_slice(code);
        Ok(Program(slots))
    }

    pub fn from_instructions(instructions: &[Instruction]) -> Result<Program, BootError> {
        let code: Vec<_> = instructions.iter().map(Instruction::encode).collect();
        Program::new(&code)
    }

    pub fn fetch(&self, slot: u8) -> InstructionCode {
        self.0[slot as usize]
    }

    pub fn slots(&self) -> &[InstructionCode; PROGRAM_SIZE] {
        &self.0
    }
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let halt = Instruction::Halt.encode();
        let used = self.0.iter().rposition(|c| *c != halt).map_or(0, |i| i + 1);
        f.debug_list().entries(&self.0[..used]).finish()
    }
}

/// Serializes a program image: 16-bit little-endian words, slot 0 first.
pub fn encode_image(code: &[InstructionCode]) -> Vec<u8> {
    code.iter().flat_map(|c| c.0.to_le_bytes()).collect()
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("program image has odd length {0}")]
    OddLength(usize),
    #[error("program image holds {0} words; program memory has {PROGRAM_SIZE} slots")]
    TooLarge(usize),
}

pub fn decode_image(bytes: &[u8]) -> Result<Vec<InstructionCode>, ImageError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(ImageError::OddLength(bytes.len()));
    }
    if bytes.len() / 2 > PROGRAM_SIZE {
        return Err(ImageError::TooLarge(bytes.len() / 2));
    }
    Ok(bytes.chunks_exact(2).map(|w| InstructionCode(u16::from_le_bytes([w[0], w[1]]))).collect())
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DataError {
    #[error("data item {index} (`{text}`) is not a signed 64-bit integer")]
    BadItem { index: usize, text: String },
    #[error("data has {0} cells; memory holds {MEMORY_SIZE}")]
    TooLarge(usize),
}

/// Parses a data-memory initializer such as `10,5,3,5,0,100`.
pub fn parse_data(text: &str) -> Result<Vec<i64>, DataError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let cells = text
        .split(',')
        .enumerate()
        .map(|(index, item)| {
            item.trim().parse().map_err(|_| DataError::BadItem { index, text: item.trim().to_string() })
        })
        .collect::<Result<Vec<i64>, _>>()?;
    if cells.len() > MEMORY_SIZE {
        return Err(DataError::TooLarge(cells.len()));
    }
    Ok(cells)
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum BootError {
    #[error("program does not fit: slot {index} is past the end of program memory")]
    ProgramTooLarge { index: usize },
    #[error("data does not fit: cell {index} is past the end of data memory")]
    DataTooLarge { index: usize },
}

/// A machine state over the value domain `D`.
///
/// States are immutable values; transformers return new states.
pub struct MachineState<D: Domain> {
    pub registers: [D::Word; 4],
    pub memory: D::Memory,
    pub ic: D::Addr,
    pub ir: D::Code,
    pub program: Arc<Program>,
    pub flags: [D::Bit; 3],
    pub clock: D::Word,
}

impl<D: Domain> Clone for MachineState<D> {
    fn clone(&self) -> Self {
        MachineState {
            registers: self.registers.clone(),
            memory: self.memory.clone(),
            ic: self.ic.clone(),
            ir: self.ir.clone(),
            program: self.program.clone(),
            flags: self.flags.clone(),
            clock: self.clock.clone(),
        }
    }
}

impl<D: Domain> fmt::Debug for MachineState<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MachineState")
            .field("registers", &self.registers)
            .field("ic", &self.ic)
            .field("ir", &self.ir)
            .field("flags", &self.flags)
            .field("clock", &self.clock)
            .field("memory", &self.memory)
            .finish()
    }
}

impl<D: Domain> MachineState<D> {
    /// Loads `program` from slot 0 and `data` from cell 0. Everything else
    /// starts at zero, all flags clear.
    pub fn boot(program: &[InstructionCode], data: &[D::Word]) -> Result<Self, BootError> {
        if data.len() > MEMORY_SIZE {
            return Err(BootError::DataTooLarge { index: MEMORY_SIZE });
        }
        let program = Arc::new(Program::new(program)?);
        Ok(Self::boot_with(program, data))
    }

    pub fn boot_with(program: Arc<Program>, data: &[D::Word]) -> Self {
        assert!(data.len() <= MEMORY_SIZE, "data memory holds {MEMORY_SIZE} cells");
        MachineState {
            registers: std::array::from_fn(|_| D::word(0)),
            memory: D::memory(data),
            ic: D::addr(0),
            ir: D::code(0),
            program,
            flags: std::array::from_fn(|_| D::bit(false)),
            clock: D::word(0),
        }
    }

    pub fn register(&self, r: Register) -> &D::Word {
        &self.registers[r.index()]
    }

    pub fn flag(&self, f: Flag) -> &D::Bit {
        &self.flags[f.index()]
    }

    pub fn read_memory(&self, a: MemoryAddress) -> D::Word {
        D::read(&self.memory, &D::addr(a))
    }

    pub fn halted(&self) -> &D::Bit {
        self.flag(Flag::Halt)
    }

    /// Extracts a concrete report of registers, flags, counters and the
    /// memory window `lo..=hi`.
    pub fn dump(&self, lo: MemoryAddress, hi: MemoryAddress) -> Result<StateReport, DumpError> {
        if lo > hi {
            return Err(DumpError::EmptyRange { lo, hi });
        }
        let word = |w: &D::Word| D::word_value(w).ok_or(DumpError::Symbolic);
        let memory = (lo..=hi).map(|a| word(&self.read_memory(a))).collect::<Result<Vec<_>, _>>()?;
        let mut registers = [0i64; 4];
        for (slot, w) in registers.iter_mut().zip(&self.registers) {
            *slot = word(w)?;
        }
        let mut flags = [false; 3];
        for (slot, b) in flags.iter_mut().zip(&self.flags) {
            *slot = D::bit_value(b).ok_or(DumpError::Symbolic)?;
        }
        Ok(StateReport {
            memory_base: lo,
            memory,
            registers,
            flags,
            ic: D::addr_value(&self.ic).ok_or(DumpError::Symbolic)?,
            ir: D::code_value(&self.ir).ok_or(DumpError::Symbolic)?,
            clock: word(&self.clock)? as u64,
        })
    }
}

impl<D: Domain> MachineState<D> {
    /// Componentwise `ite(cond, then, els)`. A constant condition returns the
    /// chosen state unchanged.
    pub fn merge(cond: &D::Bit, then: &Self, els: &Self) -> Result<Self, ProgramMismatch> {
        if !Arc::ptr_eq(&then.program, &els.program) && then.program != els.program {
            return Err(ProgramMismatch);
        }
        match D::bit_value(cond) {
            Some(true) => return Ok(then.clone()),
            Some(false) => return Ok(els.clone()),
            None => {}
        }
        Ok(MachineState {
            registers: std::array::from_fn(|i| D::ite_word(cond, &then.registers[i], &els.registers[i])),
            memory: D::ite_memory(cond, &then.memory, &els.memory),
            ic: D::ite_addr(cond, &then.ic, &els.ic),
            ir: D::ite_code(cond, &then.ir, &els.ir),
            program: then.program.clone(),
            flags: std::array::from_fn(|i| D::ite_bit(cond, &then.flags[i], &els.flags[i])),
            clock: D::ite_word(cond, &then.clock, &els.clock),
        })
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("cannot merge states running different programs")]
pub struct ProgramMismatch;

impl MachineState<Concrete> {
    /// Fully concrete state; panics on nothing since every component is known.
    pub fn report(&self, lo: MemoryAddress, hi: MemoryAddress) -> StateReport {
        self.dump(lo, hi).expect("concrete state")
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum DumpError {
    #[error("concrete dump requires concrete state")]
    Symbolic,
    #[error("empty memory range {lo}..{hi}")]
    EmptyRange { lo: u8, hi: u8 },
}

/// Decimal snapshot of a concrete state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StateReport {
    pub memory_base: u8,
    pub memory: Vec<i64>,
    pub registers: [i64; 4],
    pub flags: [bool; 3],
    pub ic: u8,
    pub ir: u16,
    pub clock: u64,
}

impl StateReport {
    pub fn flag(&self, f: Flag) -> bool {
        self.flags[f.index()]
    }
}

impl fmt::Display for StateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.memory.iter().map(i64::to_string).collect();
        writeln!(f, "Memory dump: [{}]", cells.join(", "))?;
        for r in Register::ALL {
            writeln!(f, "R{}: {}", r.index(), self.registers[r.index()])?;
        }
        let flags: Vec<String> = Flag::ALL.iter().map(|fl| format!("{fl}={}", self.flag(*fl))).collect();
        writeln!(f, "Flags: {}", flags.join(" "))?;
        writeln!(f, "IC: {}", self.ic)?;
        write!(f, "Clock: {}", self.clock)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Concrete;

    type State = MachineState<Concrete>;

    #[test]
    fn boot_loads_data_and_pads() {
        let s = State::boot(&[], &[10, 5, 3, 5, 0, 100]).unwrap();
        let r = s.report(0, 7);
        assert_eq!(r.memory, vec![10, 5, 3, 5, 0, 100, 0, 0]);
        assert_eq!(r.clock, 0);
        assert_eq!(r.ic, 0);
        assert_eq!(r.flags, [false; 3]);
        assert_eq!(r.registers, [0; 4]);
    }

    #[test]
    fn empty_boot_is_zero() {
        let s = State::boot(&[], &[]).unwrap();
        assert_eq!(s.report(0, 0).memory, vec![0]);
        assert!(s.memory.iter().all(|&c| c == 0));
        assert!(s.program.slots().iter().all(|c| *c == Instruction::Halt.encode()));
    }

    #[test]
    fn oversize_inputs_rejected() {
        let data = vec![0i64; 257];
        assert_eq!(State::boot(&[], &data).unwrap_err(), BootError::DataTooLarge { index: 256 });
        let code = vec![InstructionCode(0); 257];
        assert_eq!(State::boot(&code, &[]).unwrap_err(), BootError::ProgramTooLarge { index: 256 });
        assert!(State::boot(&vec![InstructionCode(0); 256], &vec![1; 256]).is_ok());
    }

    #[test]
    fn flags_by_name() {
        for f in Flag::ALL {
            assert_eq!(Flag::from_name(f.name()), Some(f));
        }
        assert_eq!(Flag::from_name("Zero"), None);
    }

    #[test]
    fn image_roundtrip() {
        let code = [InstructionCode(0x1234), InstructionCode(0x0001)];
        let bytes = encode_image(&code);
        assert_eq!(bytes, vec![0x34, 0x12, 0x01, 0x00]);
        assert_eq!(decode_image(&bytes).unwrap(), code.to_vec());
        assert_eq!(decode_image(&[1, 2, 3]), Err(ImageError::OddLength(3)));
        assert_eq!(decode_image(&vec![0; 514]), Err(ImageError::TooLarge(257)));
    }

    #[test]
    fn data_initializer() {
        assert_eq!(parse_data("10,5,3,5,0,100").unwrap(), vec![10, 5, 3, 5, 0, 100]);
        assert_eq!(parse_data(" -1 , 9223372036854775807 ").unwrap(), vec![-1, i64::MAX]);
        assert_eq!(parse_data("").unwrap(), Vec::<i64>::new());
        assert!(matches!(parse_data("1,x"), Err(DataError::BadItem { index: 1, .. })));
        assert!(matches!(parse_data("1,,2"), Err(DataError::BadItem { index: 1, .. })));
    }

    #[test]
    fn report_format() {
        let s = State::boot(&[], &[1, -2]).unwrap();
        let text = s.report(0, 2).to_string();
        assert!(text.starts_with("Memory dump: [1, -2, 0]\nR0: 0\n"));
        assert!(text.ends_with("Clock: 0"));
    }
}
