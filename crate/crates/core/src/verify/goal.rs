//! The property language: boolean and 64-bit integer terms over the initial
//! and final machine states.
//!
//! ```text
//! or    := and ('||' and)*
//! and   := not ('&&' not)*
//! not   := '!' not | cmp
//! cmp   := sum (('=' | '==' | '!=' | '<' | '<=' | '>' | '>=') sum)?
//! sum   := prod (('+' | '-') prod)*
//! prod  := unary (('*' | '/') unary)*
//! unary := '-' unary | atom
//! atom  := int | 'true' | 'false' | '(' or ')' | 'abs' '(' or ')'
//!        | 'reg' '(' rN ')' | 'mem' '(' N ')' | 'flag' '(' FLAG ')' | 'clock'
//!        | 'm' '[' N ']' | 'ms_of_years' '(' N ')' | 'mw_of_watts' '(' N ')'
//!        | input-name
//! ```
//!
//! Input names and `m[N]` denote initial memory cells; `reg`, `mem`, `flag`
//! and `clock` read the final state. Comparisons are signed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::domain::{Cmp, Domain, WordOp};
use crate::isa::{MemoryAddress, Register};
use crate::machine::{Flag, MachineState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Int(i64),
    Bool(bool),
    /// Initial content of a memory cell.
    Initial(MemoryAddress),
    Reg(Register),
    Mem(MemoryAddress),
    Flag(Flag),
    Clock,
    Neg(Box<Term>),
    Abs(Box<Term>),
    Arith(WordOp, Box<Term>, Box<Term>),
    Rel(Rel, Box<Term>, Box<Term>),
    Not(Box<Term>),
    And(Box<Term>, Box<Term>),
    Or(Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Type {
    Int,
    Bool,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("column {column}: {message}")]
pub struct GoalError {
    pub column: usize,
    pub message: String,
}

pub const MS_PER_YEAR: i64 = 366 * 86_400 * 1_000;

/// Milliseconds in `years` years of 366 days.
pub fn milliseconds(years: i64) -> Option<i64> {
    if years < 0 {
        return None;
    }
    years.checked_mul(MS_PER_YEAR)
}

/// Milliwatts in `watts` watts.
pub fn milliwatts(watts: i64) -> Option<i64> {
    if watts < 0 {
        return None;
    }
    watts.checked_mul(1_000)
}

/// A value of either type in domain `D`.
pub enum Value<D: Domain> {
    Int(D::Word),
    Bool(D::Bit),
}

impl Term {
    /// Parses `text`; `inputs` maps input names to their cells.
    pub fn parse(text: &str, inputs: &BTreeMap<String, MemoryAddress>) -> Result<(Term, Type), GoalError> {
        let mut p = Parser { chars: text.chars().collect(), pos: 0, inputs };
        let t = p.or()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(t)
    }

    /// Parses a term that must be boolean.
    pub fn parse_bool(text: &str, inputs: &BTreeMap<String, MemoryAddress>) -> Result<Term, GoalError> {
        match Term::parse(text, inputs)? {
            (t, Type::Bool) => Ok(t),
            (_, Type::Int) => Err(GoalError { column: 1, message: "expected a boolean property".into() }),
        }
    }

    /// Evaluates against an initial and a final state.
    pub fn eval<D: Domain>(&self, initial: &MachineState<D>, last: &MachineState<D>) -> Value<D> {
        let int = |t: &Term| match t.eval(initial, last) {
            Value::Int(w) => w,
            Value::Bool(_) => unreachable!("type-checked term"),
        };
        let bit = |t: &Term| match t.eval(initial, last) {
            Value::Bool(b) => b,
            Value::Int(_) => unreachable!("type-checked term"),
        };
        match self {
            Term::Int(v) => Value::Int(D::word(*v)),
            Term::Bool(b) => Value::Bool(D::bit(*b)),
            Term::Initial(a) => Value::Int(initial.read_memory(*a)),
            Term::Reg(r) => Value::Int(last.register(*r).clone()),
            Term::Mem(a) => Value::Int(last.read_memory(*a)),
            Term::Flag(f) => Value::Bool(last.flag(*f).clone()),
            Term::Clock => Value::Int(last.clock.clone()),
            Term::Neg(t) => Value::Int(D::neg(&int(t))),
            Term::Abs(t) => Value::Int(D::abs(&int(t))),
            Term::Arith(op, l, r) => Value::Int(D::word_op(*op, &int(l), &int(r))),
            Term::Rel(rel, l, r) => {
                if let (Value::Bool(a), Value::Bool(b)) = (l.eval(initial, last), r.eval(initial, last)) {
                    let same = D::bits_equal(&a, &b);
                    return Value::Bool(if *rel == Rel::Eq { same } else { D::not(&same) });
                }
                let (a, b) = (int(l), int(r));
                Value::Bool(match rel {
                    Rel::Eq => D::cmp(Cmp::Eq, &a, &b),
                    Rel::Ne => D::not(&D::cmp(Cmp::Eq, &a, &b)),
                    Rel::Lt => D::cmp(Cmp::Slt, &a, &b),
                    Rel::Le => D::not(&D::cmp(Cmp::Sgt, &a, &b)),
                    Rel::Gt => D::cmp(Cmp::Sgt, &a, &b),
                    Rel::Ge => D::not(&D::cmp(Cmp::Slt, &a, &b)),
                })
            }
            Term::Not(t) => Value::Bool(D::not(&bit(t))),
            Term::And(l, r) => Value::Bool(D::and(&bit(l), &bit(r))),
            Term::Or(l, r) => Value::Bool(D::or(&bit(l), &bit(r))),
        }
    }

    pub fn eval_bool<D: Domain>(&self, initial: &MachineState<D>, last: &MachineState<D>) -> D::Bit {
        match self.eval(initial, last) {
            Value::Bool(b) => b,
            Value::Int(_) => panic!("not a boolean term"),
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    inputs: &'a BTreeMap<String, MemoryAddress>,
}

type Parsed = Result<(Term, Type), GoalError>;

impl Parser<'_> {
    fn error(&self, message: &str) -> GoalError {
        GoalError { column: self.pos + 1, message: message.to_string() }
    }

    fn error_at(&self, pos: usize, message: &str) -> GoalError {
        GoalError { column: pos + 1, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek_str(&mut self, s: &str) -> bool {
        self.skip_ws();
        self.chars[self.pos..].iter().take(s.chars().count()).copied().eq(s.chars())
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek_str(s) {
            self.pos += s.chars().count();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), GoalError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{s}`")))
        }
    }

    fn require(&self, pos: usize, got: Type, want: Type) -> Result<(), GoalError> {
        if got == want {
            Ok(())
        } else {
            let name = |t| if t == Type::Int { "an integer" } else { "a boolean" };
            Err(self.error_at(pos, &format!("expected {}, found {}", name(want), name(got))))
        }
    }

    fn or(&mut self) -> Parsed {
        self.skip_ws();
        let start = self.pos;
        let (mut t, ty) = self.and()?;
        while self.eat("||") {
            self.require(start, ty, Type::Bool)?;
            self.skip_ws();
            let at = self.pos;
            let (r, rty) = self.and()?;
            self.require(at, rty, Type::Bool)?;
            t = Term::Or(Box::new(t), Box::new(r));
        }
        Ok((t, ty))
    }

    fn and(&mut self) -> Parsed {
        self.skip_ws();
        let start = self.pos;
        let (mut t, ty) = self.not()?;
        while self.eat("&&") {
            self.require(start, ty, Type::Bool)?;
            self.skip_ws();
            let at = self.pos;
            let (r, rty) = self.not()?;
            self.require(at, rty, Type::Bool)?;
            t = Term::And(Box::new(t), Box::new(r));
        }
        Ok((t, ty))
    }

    fn not(&mut self) -> Parsed {
        self.skip_ws();
        if self.peek_str("!") && !self.peek_str("!=") {
            self.pos += 1;
            self.skip_ws();
            let at = self.pos;
            let (t, ty) = self.not()?;
            self.require(at, ty, Type::Bool)?;
            return Ok((Term::Not(Box::new(t)), Type::Bool));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Parsed {
        self.skip_ws();
        let start = self.pos;
        let (l, lty) = self.sum()?;
        let rel = if self.eat("==") || self.eat("=") {
            Rel::Eq
        } else if self.eat("!=") {
            Rel::Ne
        } else if self.eat("<=") {
            Rel::Le
        } else if self.eat(">=") {
            Rel::Ge
        } else if self.eat("<") {
            Rel::Lt
        } else if self.eat(">") {
            Rel::Gt
        } else {
            return Ok((l, lty));
        };
        self.skip_ws();
        let at = self.pos;
        let (r, rty) = self.sum()?;
        if matches!(rel, Rel::Eq | Rel::Ne) {
            self.require(at, rty, lty)?;
        } else {
            self.require(start, lty, Type::Int)?;
            self.require(at, rty, Type::Int)?;
        }
        Ok((Term::Rel(rel, Box::new(l), Box::new(r)), Type::Bool))
    }

    fn sum(&mut self) -> Parsed {
        self.skip_ws();
        let start = self.pos;
        let (mut t, ty) = self.prod()?;
        loop {
            let op = if self.eat("+") {
                WordOp::Add
            } else if self.peek_str("-") {
                self.pos += 1;
                WordOp::Sub
            } else {
                return Ok((t, ty));
            };
            self.require(start, ty, Type::Int)?;
            self.skip_ws();
            let at = self.pos;
            let (r, rty) = self.prod()?;
            self.require(at, rty, Type::Int)?;
            t = Term::Arith(op, Box::new(t), Box::new(r));
        }
    }

    fn prod(&mut self) -> Parsed {
        self.skip_ws();
        let start = self.pos;
        let (mut t, ty) = self.unary()?;
        loop {
            let op = if self.eat("*") {
                WordOp::Mul
            } else if self.eat("/") {
                WordOp::SDiv
            } else {
                return Ok((t, ty));
            };
            self.require(start, ty, Type::Int)?;
            self.skip_ws();
            let at = self.pos;
            let (r, rty) = self.unary()?;
            self.require(at, rty, Type::Int)?;
            t = Term::Arith(op, Box::new(t), Box::new(r));
        }
    }

    fn unary(&mut self) -> Parsed {
        self.skip_ws();
        if self.chars.get(self.pos) == Some(&'-') {
            let start = self.pos;
            self.pos += 1;
            if self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                let v = self.number()?;
                let v = i64::try_from(-v).map_err(|_| self.error_at(start, "integer out of 64-bit range"))?;
                return Ok((Term::Int(v), Type::Int));
            }
            self.skip_ws();
            let at = self.pos;
            let (t, ty) = self.unary()?;
            self.require(at, ty, Type::Int)?;
            return Ok((Term::Neg(Box::new(t)), Type::Int));
        }
        self.atom()
    }

    fn number(&mut self) -> Result<i128, GoalError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<i128>().map_err(|_| self.error_at(start, "expected an integer"))
    }

    fn small(&mut self, what: &str, hi: i128) -> Result<i64, GoalError> {
        self.skip_ws();
        let start = self.pos;
        let v = self.number()?;
        if v > hi {
            return Err(self.error_at(start, &format!("{what} {v} is out of range 0..={hi}")));
        }
        Ok(v as i64)
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn call<T>(&mut self, body: impl FnOnce(&mut Self) -> Result<T, GoalError>) -> Result<T, GoalError> {
        self.expect("(")?;
        let v = body(self)?;
        self.expect(")")?;
        Ok(v)
    }

    fn atom(&mut self) -> Parsed {
        self.skip_ws();
        let start = self.pos;
        match self.chars.get(self.pos) {
            None => return Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let t = self.or()?;
                self.expect(")")?;
                return Ok(t);
            }
            Some(c) if c.is_ascii_digit() => {
                let v = self.number()?;
                let v = i64::try_from(v).map_err(|_| self.error_at(start, "integer out of 64-bit range"))?;
                return Ok((Term::Int(v), Type::Int));
            }
            Some(c) if c.is_ascii_alphabetic() || *c == '_' => {}
            Some(c) => return Err(self.error(&format!("unexpected `{c}`"))),
        }
        let name = self.ident();
        let int = |t| Ok((t, Type::Int));
        match name.as_str() {
            "true" => Ok((Term::Bool(true), Type::Bool)),
            "false" => Ok((Term::Bool(false), Type::Bool)),
            "clock" => int(Term::Clock),
            "abs" => {
                let at = self.pos;
                let (t, ty) = self.call(|p| p.or())?;
                self.require(at + 1, ty, Type::Int)?;
                int(Term::Abs(Box::new(t)))
            }
            "reg" => {
                let r = self.call(|p| {
                    p.skip_ws();
                    let at = p.pos;
                    match p.ident().as_str() {
                        "r0" | "R0" => Ok(Register::R0),
                        "r1" | "R1" => Ok(Register::R1),
                        "r2" | "R2" => Ok(Register::R2),
                        "r3" | "R3" => Ok(Register::R3),
                        other => Err(p.error_at(at, &format!("unknown register `{other}`"))),
                    }
                })?;
                int(Term::Reg(r))
            }
            "mem" => {
                let a = self.call(|p| p.small("address", 255))?;
                int(Term::Mem(a as u8))
            }
            "m" if self.peek_str("[") => {
                self.pos += 1;
                let a = self.small("address", 255)?;
                self.expect("]")?;
                int(Term::Initial(a as u8))
            }
            "flag" => {
                let f = self.call(|p| {
                    p.skip_ws();
                    let at = p.pos;
                    let name = p.ident();
                    Flag::from_name(&name).ok_or_else(|| p.error_at(at, &format!("unknown flag `{name}`")))
                })?;
                Ok((Term::Flag(f), Type::Bool))
            }
            "ms_of_years" | "mw_of_watts" => {
                let at = self.pos;
                let n = self.call(|p| p.small("argument", i64::MAX as i128))?;
                let v = if name == "ms_of_years" { milliseconds(n) } else { milliwatts(n) };
                int(Term::Int(v.ok_or_else(|| self.error_at(at, "value does not fit in 64 bits"))?))
            }
            _ => match self.inputs.get(&name) {
                Some(cell) => int(Term::Initial(*cell)),
                None => Err(self.error_at(start, &format!("unknown name `{name}`"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Concrete;
    use crate::isa::Instruction;

    fn inputs() -> BTreeMap<String, MemoryAddress> {
        [("t1", 0), ("t2", 1), ("p1", 2), ("p2", 3)].into_iter().map(|(n, c)| (n.to_string(), c)).collect()
    }

    fn eval(text: &str, data: &[i64]) -> bool {
        let t = Term::parse_bool(text, &inputs()).unwrap();
        let code = [Instruction::Ld(Register::R0, 0).encode()];
        let s = MachineState::<Concrete>::boot(&code, data).unwrap();
        t.eval_bool(&s, &s)
    }

    #[test]
    fn unit_helpers() {
        assert_eq!(milliseconds(30), Some(948_672_000_000));
        assert_eq!(milliwatts(1), Some(1_000));
        assert_eq!(milliseconds(-1), None);
        assert_eq!(milliseconds(i64::MAX), None);
    }

    #[test]
    fn parses_theorem_shapes() {
        let t = Term::parse_bool("t1 >= 0 && t1 <= ms_of_years(30)", &inputs()).unwrap();
        assert!(matches!(t, Term::And(..)));
        assert!(eval("t1 >= 0 && t1 <= ms_of_years(30)", &[5]));
        assert!(!eval("p1 >= 0", &[0, 0, -1]));
        assert!(eval("abs(t1 - t2) * (p1 + p2) / 2 = 20", &[10, 5, 3, 5]));
        assert!(eval("m[3] == 5 && mem(3) = 5 && !flag(Halt) && clock = 0", &[10, 5, 3, 5]));
        assert!(eval("-t1 = -10 && -9223372036854775808 < 0", &[10]));
        assert!(eval("flag(Condition) = false || false", &[]));
        assert!(eval("reg(r0) != 1", &[]));
    }

    #[test]
    fn rejects_ill_typed_or_unknown() {
        let err = |s: &str| Term::parse(s, &inputs()).unwrap_err();
        assert_eq!(err("t3 > 0").column, 1);
        assert!(err("reg(r4)").message.contains("unknown register"));
        assert!(err("flag(Zero)").message.contains("unknown flag"));
        assert!(err("t1 && true").message.contains("expected a boolean"));
        assert!(err("flag(Halt) + 1").message.contains("expected an integer"));
        assert!(err("t1 = flag(Halt)").message.contains("expected an integer"));
        assert!(err("mem(256)").message.contains("out of range"));
        assert!(err("9223372036854775808").message.contains("64-bit"));
        assert!(err("ms_of_years(99999999999)").message.contains("64 bits"));
        assert!(err("t1 >").message.contains("end of input"));
        assert!(Term::parse_bool("t1 + 1", &inputs()).is_err());
    }
}
