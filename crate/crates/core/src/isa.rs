//! Instruction vocabulary, opcode table and the 16-bit binary codec.
//!
//! An instruction word is laid out as
//!
//! ```text
//!  15        10 9   8 7             0
//! +------------+-----+---------------+
//! |   opcode   | reg |  addr / imm   |
//! +------------+-----+---------------+
//! ```
//!
//! Register-free instructions encode the register field as 0 and operand-free
//! instructions encode the low byte as 0.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index into the data memory.
pub type MemoryAddress = u8;

/// Index into the program memory.
pub type InstructionAddress = u8;

/// One of the four general-purpose registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Register {
    R0,
    R1,
    R2,
    R3,
}

impl Register {
    pub const ALL: [Register; 4] = [Register::R0, Register::R1, Register::R2, Register::R3];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Builds a register from the low two bits of `bits`.
    pub fn from_bits(bits: u8) -> Register {
        Register::ALL[(bits & 0b11) as usize]
    }

    /// Returns the register `k` positions after this one, wrapping around.
    pub fn offset(self, k: u8) -> Register {
        Register::from_bits(self as u8 + k)
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", *self as u8)
    }
}

/// A raw 16-bit instruction word.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstructionCode(pub u16);

impl InstructionCode {
    pub fn opcode(self) -> u8 {
        (self.0 >> 10) as u8
    }

    pub fn register_bits(self) -> u8 {
        ((self.0 >> 8) & 0b11) as u8
    }

    pub fn operand(self) -> u8 {
        self.0 as u8
    }

    fn assemble(opcode: u8, register: u8, operand: u8) -> InstructionCode {
        InstructionCode(((opcode as u16) << 10) | (((register & 0b11) as u16) << 8) | operand as u16)
    }
}

impl fmt::Display for InstructionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}", self.0)
    }
}

/// A decoded instruction.
///
/// Arithmetic, logic, shift and compare instructions take one register and one
/// memory operand; `_i` variants take an immediate instead.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    Halt,
    Nop,
    Ld(Register, MemoryAddress),
    LdI(Register, i8),
    Ldmi(Register, MemoryAddress),
    St(Register, MemoryAddress),
    Stmi(Register, MemoryAddress),
    Add(Register, MemoryAddress),
    Sub(Register, MemoryAddress),
    Mul(Register, MemoryAddress),
    Div(Register, MemoryAddress),
    And(Register, MemoryAddress),
    Or(Register, MemoryAddress),
    Xor(Register, MemoryAddress),
    Abs(Register),
    Not(Register),
    Sll(Register, MemoryAddress),
    Srl(Register, MemoryAddress),
    Sra(Register, MemoryAddress),
    SllI(Register, u8),
    SrlI(Register, u8),
    SraI(Register, u8),
    CmpEq(Register, MemoryAddress),
    CmpLt(Register, MemoryAddress),
    CmpGt(Register, MemoryAddress),
    Jmpi(i8),
    JmpiCt(i8),
    JmpiCf(i8),
}

/// The operand shape of a mnemonic; drives the codec, the assembler and the
/// disassembler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperandShape {
    /// No operands.
    None,
    /// A register only.
    Reg,
    /// A register and a memory address.
    RegAddr,
    /// A register and a signed 8-bit immediate.
    RegSimm,
    /// A register and an unsigned 8-bit immediate.
    RegUimm,
    /// A signed 8-bit jump offset.
    Offset,
}

/// Mnemonics in opcode order: the opcode of a mnemonic is its position here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mnemonic {
    Halt,
    Nop,
    Ld,
    LdI,
    Ldmi,
    St,
    Stmi,
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Xor,
    Abs,
    Not,
    Sll,
    Srl,
    Sra,
    SllI,
    SrlI,
    SraI,
    CmpEq,
    CmpLt,
    CmpGt,
    Jmpi,
    JmpiCt,
    JmpiCf,
}

impl Mnemonic {
    pub const ALL: [Mnemonic; 28] = [
        Mnemonic::Halt,
        Mnemonic::Nop,
        Mnemonic::Ld,
        Mnemonic::LdI,
        Mnemonic::Ldmi,
        Mnemonic::St,
        Mnemonic::Stmi,
        Mnemonic::Add,
        Mnemonic::Sub,
        Mnemonic::Mul,
        Mnemonic::Div,
        Mnemonic::And,
        Mnemonic::Or,
        Mnemonic::Xor,
        Mnemonic::Abs,
        Mnemonic::Not,
        Mnemonic::Sll,
        Mnemonic::Srl,
        Mnemonic::Sra,
        Mnemonic::SllI,
        Mnemonic::SrlI,
        Mnemonic::SraI,
        Mnemonic::CmpEq,
        Mnemonic::CmpLt,
        Mnemonic::CmpGt,
        Mnemonic::Jmpi,
        Mnemonic::JmpiCt,
        Mnemonic::JmpiCf,
    ];

    pub fn opcode(self) -> u8 {
        self as u8
    }

    pub fn from_opcode(opcode: u8) -> Option<Mnemonic> {
        Mnemonic::ALL.get(opcode as usize).copied()
    }

    /// Assembly spelling.
    pub fn name(self) -> &'static str {
        use Mnemonic::*;
        match self {
            Halt => "halt",
            Nop => "nop",
            Ld => "ld",
            LdI => "ld_i",
            Ldmi => "ldmi",
            St => "st",
            Stmi => "stmi",
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Div => "div",
            And => "and",
            Or => "or",
            Xor => "xor",
            Abs => "abs",
            Not => "not",
            Sll => "sll",
            Srl => "srl",
            Sra => "sra",
            SllI => "sll_i",
            SrlI => "srl_i",
            SraI => "sra_i",
            CmpEq => "cmpeq",
            CmpLt => "cmplt",
            CmpGt => "cmpgt",
            Jmpi => "jmpi",
            JmpiCt => "jmpi_ct",
            JmpiCf => "jmpi_cf",
        }
    }

    pub fn from_name(name: &str) -> Option<Mnemonic> {
        Mnemonic::ALL.iter().copied().find(|m| m.name() == name)
    }

    pub fn shape(self) -> OperandShape {
        use Mnemonic::*;
        match self {
            Halt | Nop => OperandShape::None,
            Abs | Not => OperandShape::Reg,
            LdI => OperandShape::RegSimm,
            SllI | SrlI | SraI => OperandShape::RegUimm,
            Jmpi | JmpiCt | JmpiCf => OperandShape::Offset,
            _ => OperandShape::RegAddr,
        }
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Operands of an instruction in codec form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Operands {
    pub register: Option<Register>,
    /// Address, immediate or offset as its raw low byte.
    pub byte: Option<u8>,
}

impl Instruction {
    pub fn mnemonic(&self) -> Mnemonic {
        use Instruction::*;
        match self {
            Halt => Mnemonic::Halt,
            Nop => Mnemonic::Nop,
            Ld(..) => Mnemonic::Ld,
            LdI(..) => Mnemonic::LdI,
            Ldmi(..) => Mnemonic::Ldmi,
            St(..) => Mnemonic::St,
            Stmi(..) => Mnemonic::Stmi,
            Add(..) => Mnemonic::Add,
            Sub(..) => Mnemonic::Sub,
            Mul(..) => Mnemonic::Mul,
            Div(..) => Mnemonic::Div,
            And(..) => Mnemonic::And,
            Or(..) => Mnemonic::Or,
            Xor(..) => Mnemonic::Xor,
            Abs(..) => Mnemonic::Abs,
            Not(..) => Mnemonic::Not,
            Sll(..) => Mnemonic::Sll,
            Srl(..) => Mnemonic::Srl,
            Sra(..) => Mnemonic::Sra,
            SllI(..) => Mnemonic::SllI,
            SrlI(..) => Mnemonic::SrlI,
            SraI(..) => Mnemonic::SraI,
            CmpEq(..) => Mnemonic::CmpEq,
            CmpLt(..) => Mnemonic::CmpLt,
            CmpGt(..) => Mnemonic::CmpGt,
            Jmpi(..) => Mnemonic::Jmpi,
            JmpiCt(..) => Mnemonic::JmpiCt,
            JmpiCf(..) => Mnemonic::JmpiCf,
        }
    }

    pub fn operands(&self) -> Operands {
        use Instruction::*;
        let (register, byte) = match *self {
            Halt | Nop => (None, None),
            Abs(r) | Not(r) => (Some(r), None),
            LdI(r, k) => (Some(r), Some(k as u8)),
            SllI(r, k) | SrlI(r, k) | SraI(r, k) => (Some(r), Some(k)),
            Jmpi(o) | JmpiCt(o) | JmpiCf(o) => (None, Some(o as u8)),
            Ld(r, a) | Ldmi(r, a) | St(r, a) | Stmi(r, a) | Add(r, a) | Sub(r, a) | Mul(r, a)
            | Div(r, a) | And(r, a) | Or(r, a) | Xor(r, a) | Sll(r, a) | Srl(r, a) | Sra(r, a)
            | CmpEq(r, a) | CmpLt(r, a) | CmpGt(r, a) => (Some(r), Some(a)),
        };
        Operands { register, byte }
    }

    /// Rebuilds an instruction from a mnemonic and raw operands. Missing
    /// operands default to `r0` / `0`.
    pub fn from_parts(mnemonic: Mnemonic, register: Register, byte: u8) -> Instruction {
        use Instruction as I;
        let (r, b) = (register, byte);
        match mnemonic {
            Mnemonic::Halt => I::Halt,
            Mnemonic::Nop => I::Nop,
            Mnemonic::Ld => I::Ld(r, b),
            Mnemonic::LdI => I::LdI(r, b as i8),
            Mnemonic::Ldmi => I::Ldmi(r, b),
            Mnemonic::St => I::St(r, b),
            Mnemonic::Stmi => I::Stmi(r, b),
            Mnemonic::Add => I::Add(r, b),
            Mnemonic::Sub => I::Sub(r, b),
            Mnemonic::Mul => I::Mul(r, b),
            Mnemonic::Div => I::Div(r, b),
            Mnemonic::And => I::And(r, b),
            Mnemonic::Or => I::Or(r, b),
            Mnemonic::Xor => I::Xor(r, b),
            Mnemonic::Abs => I::Abs(r),
            Mnemonic::Not => I::Not(r),
            Mnemonic::Sll => I::Sll(r, b),
            Mnemonic::Srl => I::Srl(r, b),
            Mnemonic::Sra => I::Sra(r, b),
            Mnemonic::SllI => I::SllI(r, b),
            Mnemonic::SrlI => I::SrlI(r, b),
            Mnemonic::SraI => I::SraI(r, b),
            Mnemonic::CmpEq => I::CmpEq(r, b),
            Mnemonic::CmpLt => I::CmpLt(r, b),
            Mnemonic::CmpGt => I::CmpGt(r, b),
            Mnemonic::Jmpi => I::Jmpi(b as i8),
            Mnemonic::JmpiCt => I::JmpiCt(b as i8),
            Mnemonic::JmpiCf => I::JmpiCf(b as i8),
        }
    }

    pub fn encode(&self) -> InstructionCode {
        let ops = self.operands();
        InstructionCode::assemble(
            self.mnemonic().opcode(),
            ops.register.map_or(0, |r| r as u8),
            ops.byte.unwrap_or(0),
        )
    }

    /// Decodes an instruction word. Fields that the mnemonic does not use are
    /// ignored, so `decode` accepts words that `encode` never produces.
    pub fn decode(code: InstructionCode) -> Result<Instruction, IllegalOpcode> {
        let mnemonic = Mnemonic::from_opcode(code.opcode()).ok_or(IllegalOpcode(code.opcode()))?;
        Ok(Instruction::from_parts(
            mnemonic,
            Register::from_bits(code.register_bits()),
            code.operand(),
        ))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.mnemonic();
        let ops = self.operands();
        let reg = ops.register.unwrap_or(Register::R0);
        let byte = ops.byte.unwrap_or(0);
        match m.shape() {
            OperandShape::None => write!(f, "{m}"),
            OperandShape::Reg => write!(f, "{m} {reg}"),
            OperandShape::RegAddr | OperandShape::RegUimm => write!(f, "{m} {reg} {byte}"),
            OperandShape::RegSimm => write!(f, "{m} {reg} {}", byte as i8),
            OperandShape::Offset => write!(f, "{m} {}", byte as i8),
        }
    }
}

/// Raised when an instruction word carries an opcode outside the table.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("illegal opcode {0}")]
pub struct IllegalOpcode(pub u8);
