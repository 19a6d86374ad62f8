//! Two-pass assembler and disassembler for the textual program format.
//!
//! ```text
//! line    := [label ':'] [mnemonic operand*] [';' comment]
//! operand := 'r'N | decimal | label
//! ```
//!
//! Operands are separated by whitespace or commas. Jump targets may be labels
//! or signed decimal offsets; a label resolves to `target - (site + 1)`, the
//! offset relative to the already-incremented instruction counter.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::isa::{Instruction, Mnemonic, OperandShape, Register};
use crate::machine::PROGRAM_SIZE;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsmLine {
    pub label: Option<String>,
    pub instruction: Instruction,
    /// 1-based source line.
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AsmProgram {
    pub lines: Vec<AsmLine>,
}

impl AsmProgram {
    pub fn instructions(&self) -> Vec<Instruction> {
        self.lines.iter().map(|l| l.instruction).collect()
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("`{mnemonic}` takes {expected} operand(s), got {got}")]
    Arity { mnemonic: Mnemonic, expected: usize, got: usize },
    #[error("expected a register r0..r3, got `{0}`")]
    BadRegister(String),
    #[error("`{value}` is out of range {lo}..={hi}")]
    Range { value: String, lo: i64, hi: i64 },
    #[error("unresolved label `{0}`")]
    UnresolvedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid label `{0}`")]
    BadLabel(String),
    #[error("branch to `{label}` is {offset} slots away; offsets must fit in -128..=127")]
    BranchTooFar { label: String, offset: i64 },
    #[error("program exceeds {PROGRAM_SIZE} instructions")]
    TooLong,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

/// All errors found in one source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsmErrors(pub Vec<AsmError>);

impl fmt::Display for AsmErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for AsmErrors {}

enum Target {
    Offset(i8),
    Label(String),
}

struct Pending {
    label: Option<String>,
    mnemonic: Mnemonic,
    register: Register,
    byte: u8,
    target: Option<Target>,
    line: usize,
}

/// Parses and assembles `text`.
pub fn parse(text: &str) -> Result<AsmProgram, AsmErrors> {
    let mut errors = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut dangling: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let code = raw.split(';').next().unwrap_or("").trim();
        let (label, rest) = match code.split_once(':') {
            Some((l, rest)) => (Some(l.trim()), rest.trim()),
            None => (None, code),
        };
        if let Some(l) = label {
            if !is_label(l) {
                errors.push(AsmError { line, kind: AsmErrorKind::BadLabel(l.to_string()) });
            } else if labels.insert(l.to_string(), pending.len()).is_some() {
                errors.push(AsmError { line, kind: AsmErrorKind::DuplicateLabel(l.to_string()) });
            } else {
                dangling = Some(l.to_string());
            }
        }
        if rest.is_empty() {
            continue;
        }
        match parse_instruction(rest) {
            Ok((mnemonic, register, byte, target)) => pending.push(Pending {
                label: dangling.take(),
                mnemonic,
                register,
                byte,
                target,
                line,
            }),
            Err(kind) => {
                // Keep slot numbering stable for label resolution.
                pending.push(Pending {
                    label: dangling.take(),
                    mnemonic: Mnemonic::Nop,
                    register: Register::R0,
                    byte: 0,
                    target: None,
                    line,
                });
                errors.push(AsmError { line, kind });
            }
        }
    }

    if pending.len() > PROGRAM_SIZE {
        let line = pending[PROGRAM_SIZE].line;
        errors.push(AsmError { line, kind: AsmErrorKind::TooLong });
    }

    let mut lines = Vec::with_capacity(pending.len());
    for (site, p) in pending.into_iter().enumerate() {
        let mut byte = p.byte;
        match p.target {
            Some(Target::Offset(o)) => byte = o as u8,
            Some(Target::Label(name)) => match labels.get(&name) {
                None => errors.push(AsmError { line: p.line, kind: AsmErrorKind::UnresolvedLabel(name) }),
                Some(&target) => {
                    let offset = target as i64 - (site as i64 + 1);
                    match i8::try_from(offset) {
                        Ok(o) => byte = o as u8,
                        Err(_) => {
                            errors.push(AsmError { line: p.line, kind: AsmErrorKind::BranchTooFar { label: name, offset } })
                        }
                    }
                }
            },
            None => {}
        }
        lines.push(AsmLine {
            label: p.label,
            instruction: Instruction::from_parts(p.mnemonic, p.register, byte),
            line: p.line,
        });
    }

    if errors.is_empty() {
        Ok(AsmProgram { lines })
    } else {
        errors.sort_by_key(|e| e.line);
        Err(AsmErrors(errors))
    }
}

/// Parses `text` and returns the instruction list.
pub fn assemble(text: &str) -> Result<Vec<Instruction>, AsmErrors> {
    parse(text).map(|p| p.instructions())
}

type Parsed = (Mnemonic, Register, u8, Option<Target>);

fn parse_instruction(text: &str) -> Result<Parsed, AsmErrorKind> {
    let mut words = text.split(|c: char| c.is_whitespace() || c == ',').filter(|w| !w.is_empty());
    let name = words.next().expect("non-empty instruction text");
    let mnemonic = Mnemonic::from_name(&name.to_ascii_lowercase())
        .ok_or_else(|| AsmErrorKind::UnknownMnemonic(name.to_string()))?;
    let operands: Vec<&str> = words.collect();
    let expected = match mnemonic.shape() {
        OperandShape::None => 0,
        OperandShape::Reg | OperandShape::Offset => 1,
        _ => 2,
    };
    if operands.len() != expected {
        return Err(AsmErrorKind::Arity { mnemonic, expected, got: operands.len() });
    }
    let reg = |s: &str| parse_register(s);
    Ok(match mnemonic.shape() {
        OperandShape::None => (mnemonic, Register::R0, 0, None),
        OperandShape::Reg => (mnemonic, reg(operands[0])?, 0, None),
        OperandShape::RegAddr | OperandShape::RegUimm => {
            (mnemonic, reg(operands[0])?, number(operands[1], 0, 255)? as u8, None)
        }
        OperandShape::RegSimm => (mnemonic, reg(operands[0])?, number(operands[1], -128, 127)? as u8, None),
        OperandShape::Offset => {
            let op = operands[0];
            let target = if op.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+') {
                Target::Offset(number(op, -128, 127)? as i8)
            } else if is_label(op) {
                Target::Label(op.to_string())
            } else {
                return Err(AsmErrorKind::BadLabel(op.to_string()));
            };
            (mnemonic, Register::R0, 0, Some(target))
        }
    })
}

fn parse_register(s: &str) -> Result<Register, AsmErrorKind> {
    let bad = || AsmErrorKind::BadRegister(s.to_string());
    let digits = s.strip_prefix('r').or_else(|| s.strip_prefix('R')).ok_or_else(bad)?;
    match digits {
        "0" => Ok(Register::R0),
        "1" => Ok(Register::R1),
        "2" => Ok(Register::R2),
        "3" => Ok(Register::R3),
        _ => Err(bad()),
    }
}

fn number(s: &str, lo: i64, hi: i64) -> Result<i64, AsmErrorKind> {
    let range = || AsmErrorKind::Range { value: s.to_string(), lo, hi };
    let v: i64 = s.parse().map_err(|_| range())?;
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(range())
    }
}

fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// One instruction per line, numeric operands in decimal.
pub fn disassemble(program: &[Instruction]) -> String {
    let mut out = String::new();
    for i in program {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    out
}
