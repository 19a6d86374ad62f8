//! Arithmetic expressions over memory operands and their compilation to
//! stack-disciplined assembly.
//!
//! The compiled code evaluates into an accumulator register and spills
//! intermediate right operands to a downward-growing stack. The stack-pointer
//! cell holds the address of the next free slot. Pushes are staged through the
//! temporary cell, so after the code runs the temporary cell holds the last
//! value pushed and the stack-pointer cell is back at its initial value.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := 'abs' '(' expr ')' | '(' expr ')' | 'm[' addr ']' | int
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::domain::{sdiv, Concrete, Domain, WordOp};
use crate::isa::{Instruction, MemoryAddress, Register};
use crate::machine::MEMORY_SIZE;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    /// An integer variable stored at a memory cell.
    Var(MemoryAddress),
    /// A constant materialized with a sign-extended 8-bit load.
    ConstI(i8),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn var(a: MemoryAddress) -> Expr {
        Expr::Var(a)
    }
    pub fn constant(k: i8) -> Expr {
        Expr::ConstI(k)
    }
    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::Add(Box::new(l), Box::new(r))
    }
    pub fn sub(l: Expr, r: Expr) -> Expr {
        Expr::Sub(Box::new(l), Box::new(r))
    }
    pub fn mul(l: Expr, r: Expr) -> Expr {
        Expr::Mul(Box::new(l), Box::new(r))
    }
    pub fn div(l: Expr, r: Expr) -> Expr {
        Expr::Div(Box::new(l), Box::new(r))
    }
    pub fn abs(e: Expr) -> Expr {
        Expr::Abs(Box::new(e))
    }

    /// `abs (t1 - t2) * (p1 + p2) / 2` over the given cells.
    pub fn energy_estimate(t1: MemoryAddress, t2: MemoryAddress, p1: MemoryAddress, p2: MemoryAddress) -> Expr {
        Expr::div(
            Expr::mul(Expr::abs(Expr::sub(Expr::var(t1), Expr::var(t2))), Expr::add(Expr::var(p1), Expr::var(p2))),
            Expr::constant(2),
        )
    }

    /// Memory cells read by the expression.
    pub fn vars(&self) -> BTreeSet<MemoryAddress> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Var(a) = e {
                out.insert(*a);
            }
        });
        out
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::ConstI(_) => 1,
            Expr::Abs(e) => 1 + e.depth(),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Var(_) | Expr::ConstI(_) => {}
            Expr::Abs(e) => e.visit(f),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    fn binary(&self) -> Option<(WordOp, &Expr, &Expr)> {
        match self {
            Expr::Add(l, r) => Some((WordOp::Add, l, r)),
            Expr::Sub(l, r) => Some((WordOp::Sub, l, r)),
            Expr::Mul(l, r) => Some((WordOp::Mul, l, r)),
            Expr::Div(l, r) => Some((WordOp::SDiv, l, r)),
            _ => None,
        }
    }

    /// Stack slots the compiled code needs at its deepest point.
    pub fn stack_depth(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::ConstI(_) => 0,
            Expr::Abs(e) => e.stack_depth(),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                r.stack_depth().max(1 + l.stack_depth())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(a) => write!(f, "m[{a}]"),
            Expr::ConstI(k) => write!(f, "{k}"),
            Expr::Abs(e) => write!(f, "abs({e})"),
            _ => {
                let (op, l, r) = self.binary().expect("binary node");
                let sym = match op {
                    WordOp::Add => '+',
                    WordOp::Sub => '-',
                    WordOp::Mul => '*',
                    _ => '/',
                };
                write!(f, "({l} {sym} {r})")
            }
        }
    }
}

/// Where compiled code leaves its result and keeps its bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileTarget {
    pub result: Register,
    pub stack_pointer: MemoryAddress,
    pub temporary: MemoryAddress,
}

impl CompileTarget {
    pub fn new(result: Register, stack_pointer: MemoryAddress, temporary: MemoryAddress) -> Self {
        CompileTarget { result, stack_pointer, temporary }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("stack pointer and temporary share cell {0}")]
    SharedCell(MemoryAddress),
    #[error("cell {0} is both a variable and the {1} cell")]
    Collision(MemoryAddress, &'static str),
    #[error("division by the constant 0")]
    DivisionByZero,
    #[error("expression needs {needed} stack slots but only {available} cells are free")]
    StackOverflow { needed: usize, available: usize },
}

/// Compiles `e` so that it leaves its value in `target.result`. The caller
/// appends `halt` or continues with more code.
pub fn compile_expr(e: &Expr, target: &CompileTarget) -> Result<Vec<Instruction>, CompileError> {
    let CompileTarget { stack_pointer: sp, temporary: temp, .. } = *target;
    if sp == temp {
        return Err(CompileError::SharedCell(sp));
    }
    let vars = e.vars();
    if vars.contains(&sp) {
        return Err(CompileError::Collision(sp, "stack-pointer"));
    }
    if vars.contains(&temp) {
        return Err(CompileError::Collision(temp, "temporary"));
    }
    let mut zero_divisor = false;
    e.visit(&mut |n| {
        if let Expr::Div(_, r) = n {
            zero_divisor |= **r == Expr::ConstI(0);
        }
    });
    if zero_divisor {
        return Err(CompileError::DivisionByZero);
    }
    let available = MEMORY_SIZE - 2 - vars.len();
    let needed = e.stack_depth();
    if needed > available {
        return Err(CompileError::StackOverflow { needed, available });
    }
    let mut out = Vec::new();
    emit(e, target, &mut out);
    Ok(out)
}

/// Like [`compile_expr`], followed by `halt`.
pub fn compile_program(e: &Expr, target: &CompileTarget) -> Result<Vec<Instruction>, CompileError> {
    let mut code = compile_expr(e, target)?;
    code.push(Instruction::Halt);
    Ok(code)
}

fn emit(e: &Expr, t: &CompileTarget, out: &mut Vec<Instruction>) {
    use Instruction as I;
    let acc = t.result;
    match e {
        Expr::Var(a) => out.push(I::Ld(acc, *a)),
        Expr::ConstI(k) => out.push(I::LdI(acc, *k)),
        Expr::Abs(inner) => {
            emit(inner, t, out);
            out.push(I::Abs(acc));
        }
        _ => {
            let (op, l, r) = e.binary().expect("binary node");
            let (s1, s2) = (acc.offset(1), acc.offset(2));
            emit(r, t, out);
            push(acc, t, out);
            emit(l, t, out);
            pop(s1, t, out);
            // Borrow the temporary cell as the memory operand, then put back
            // whatever it held.
            out.push(I::Ld(s2, t.temporary));
            out.push(I::St(s1, t.temporary));
            out.push(match op {
                WordOp::Add => I::Add(acc, t.temporary),
                WordOp::Sub => I::Sub(acc, t.temporary),
                WordOp::Mul => I::Mul(acc, t.temporary),
                _ => I::Div(acc, t.temporary),
            });
            out.push(I::St(s2, t.temporary));
        }
    }
}

fn push(r: Register, t: &CompileTarget, out: &mut Vec<Instruction>) {
    use Instruction as I;
    out.extend([
        I::Stmi(r, t.stack_pointer),
        I::St(r, t.temporary),
        I::LdI(r, -1),
        I::Add(r, t.stack_pointer),
        I::St(r, t.stack_pointer),
        I::Ld(r, t.temporary),
    ]);
}

fn pop(r: Register, t: &CompileTarget, out: &mut Vec<Instruction>) {
    use Instruction as I;
    out.extend([I::LdI(r, 1), I::Add(r, t.stack_pointer), I::St(r, t.stack_pointer), I::Ldmi(r, t.stack_pointer)]);
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("no value bound to cell {0}")]
pub struct UnboundCell(pub MemoryAddress);

/// Evaluates `e` with 64-bit wrap-around arithmetic and signed division
/// rounding toward zero (`x / 0` is `-1` for `x >= 0` and `1` otherwise).
pub fn eval_expr(e: &Expr, env: &BTreeMap<MemoryAddress, i64>) -> Result<i64, UnboundCell> {
    Ok(match e {
        Expr::Var(a) => *env.get(a).ok_or(UnboundCell(*a))?,
        Expr::ConstI(k) => *k as i64,
        Expr::Abs(inner) => eval_expr(inner, env)?.wrapping_abs(),
        Expr::Add(l, r) => eval_expr(l, env)?.wrapping_add(eval_expr(r, env)?),
        Expr::Sub(l, r) => eval_expr(l, env)?.wrapping_sub(eval_expr(r, env)?),
        Expr::Mul(l, r) => eval_expr(l, env)?.wrapping_mul(eval_expr(r, env)?),
        Expr::Div(l, r) => sdiv(eval_expr(l, env)?, eval_expr(r, env)?),
    })
}

/// Evaluates `e` in any value domain, reading variables through `lookup`.
pub fn eval_in<D: Domain>(e: &Expr, lookup: &mut dyn FnMut(MemoryAddress) -> Option<D::Word>) -> Option<D::Word> {
    Some(match e {
        Expr::Var(a) => lookup(*a)?,
        Expr::ConstI(k) => D::word(*k as i64),
        Expr::Abs(inner) => D::abs(&eval_in::<D>(inner, lookup)?),
        _ => {
            let (op, l, r) = e.binary().expect("binary node");
            let l = eval_in::<D>(l, lookup)?;
            let r = eval_in::<D>(r, lookup)?;
            D::word_op(op, &l, &r)
        }
    })
}

/// Concrete evaluation against a memory image.
pub fn eval_on_memory(e: &Expr, memory: &[i64]) -> Option<i64> {
    eval_in::<Concrete>(e, &mut |a| memory.get(a as usize).copied())
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("column {column}: {message}")]
pub struct ExprParseError {
    /// 1-based character position.
    pub column: usize,
    pub message: String,
}

/// Parses the infix expression syntax. Integer literals must fit in a signed
/// byte.
pub fn parse_expr(text: &str) -> Result<Expr, ExprParseError> {
    let mut p = ExprParser::new(text);
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct ExprParser {
    chars: Vec<char>,
    pos: usize,
}

impl ExprParser {
    fn new(text: &str) -> Self {
        ExprParser { chars: text.chars().collect(), pos: 0 }
    }

    fn error(&self, message: &str) -> ExprParseError {
        ExprParseError { column: self.pos + 1, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars[self.pos..].iter().take(n).copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ExprParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{s}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprParseError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    e = Expr::add(e, self.term()?);
                }
                Some('-') => {
                    self.pos += 1;
                    e = Expr::sub(e, self.term()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprParseError> {
        let mut e = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    e = Expr::mul(e, self.factor()?);
                }
                Some('/') => {
                    self.pos += 1;
                    e = Expr::div(e, self.factor()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprParseError> {
        if self.eat("abs") {
            self.expect("(")?;
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(Expr::abs(e));
        }
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        if self.eat("m[") {
            let start = self.pos;
            let n = self.integer()?;
            let addr = u8::try_from(n).map_err(|_| ExprParseError {
                column: start + 1,
                message: format!("address {n} is outside 0..=255"),
            })?;
            self.expect("]")?;
            return Ok(Expr::var(addr));
        }
        let start = self.pos;
        let n = self.integer()?;
        let k = i8::try_from(n).map_err(|_| ExprParseError {
            column: start + 1,
            message: format!("constant {n} does not fit in a signed byte"),
        })?;
        Ok(Expr::constant(k))
    }

    fn integer(&mut self) -> Result<i64, ExprParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.chars.get(self.pos) == Some(&'-') {
            self.pos += 1;
        }
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| {
            self.pos = start;
            self.error("expected an integer, `m[addr]`, `abs(` or `(`")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{CycleModel, Interpreter};
    use crate::machine::MachineState;

    fn target() -> CompileTarget {
        CompileTarget::new(Register::R0, 5, 4)
    }

    fn run(code: &[Instruction], data: &[i64]) -> MachineState<Concrete> {
        let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
        let s = MachineState::<Concrete>::boot(&codes, data).unwrap();
        Interpreter::new(CycleModel::default()).simulate(10_000, &s).unwrap()
    }

    #[test]
    fn single_var_is_one_load() {
        assert_eq!(compile_expr(&Expr::var(0), &target()).unwrap(), vec![Instruction::Ld(Register::R0, 0)]);
    }

    #[test]
    fn energy_run_matches_reference_dump() {
        let code = compile_program(&Expr::energy_estimate(0, 1, 2, 3), &target()).unwrap();
        let end = run(&code, &[10, 5, 3, 5, 0, 100]);
        let r = end.report(0, 5);
        assert_eq!(r.registers[0], 20);
        assert_eq!(r.memory, vec![10, 5, 3, 5, 5, 100]);
    }

    #[test]
    fn rejects_bad_targets() {
        let e = Expr::add(Expr::var(0), Expr::var(4));
        assert_eq!(compile_expr(&e, &CompileTarget::new(Register::R0, 4, 4)), Err(CompileError::SharedCell(4)));
        assert_eq!(compile_expr(&e, &target()), Err(CompileError::Collision(4, "temporary")));
        let e = Expr::add(Expr::var(5), Expr::var(0));
        assert_eq!(compile_expr(&e, &target()), Err(CompileError::Collision(5, "stack-pointer")));
        let e = Expr::div(Expr::var(0), Expr::constant(0));
        assert_eq!(compile_expr(&e, &target()), Err(CompileError::DivisionByZero));
    }

    #[test]
    fn stack_depth_follows_left_operands() {
        // The right operand is evaluated first and parked while the left one runs.
        let mut left_heavy = Expr::var(0);
        let mut right_heavy = Expr::var(0);
        for _ in 0..300 {
            left_heavy = Expr::add(left_heavy, Expr::var(1));
            right_heavy = Expr::add(Expr::var(1), right_heavy);
        }
        assert_eq!(right_heavy.stack_depth(), 1);
        assert_eq!(left_heavy.stack_depth(), 300);
        assert!(compile_expr(&right_heavy, &target()).is_ok());
        assert_eq!(
            compile_expr(&left_heavy, &target()),
            Err(CompileError::StackOverflow { needed: 300, available: 252 })
        );
    }

    #[test]
    fn stack_depth_matches_balanced_tree() {
        let mut e = Expr::var(0);
        for _ in 0..9 {
            e = Expr::add(e.clone(), e);
        }
        assert_eq!(e.stack_depth(), 9);
    }

    #[test]
    fn eval_reference_values() {
        let env: BTreeMap<u8, i64> = [(0, 10), (1, 5), (2, 3), (3, 5)].into();
        assert_eq!(eval_expr(&Expr::energy_estimate(0, 1, 2, 3), &env), Ok(20));
        let min = BTreeMap::from([(0u8, i64::MIN)]);
        assert_eq!(eval_expr(&Expr::abs(Expr::var(0)), &min), Ok(i64::MIN));
        assert_eq!(eval_expr(&Expr::var(9), &env), Err(UnboundCell(9)));
    }

    #[test]
    fn parse_and_print() {
        let e = parse_expr("abs(m[0] - m[1]) * (m[2] + m[3]) / 2").unwrap();
        assert_eq!(e, Expr::energy_estimate(0, 1, 2, 3));
        assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
        assert_eq!(parse_expr("1 - -2").unwrap(), Expr::sub(Expr::constant(1), Expr::constant(-2)));
        assert_eq!(parse_expr("m[1] - m[2] - m[3]").unwrap().to_string(), "((m[1] - m[2]) - m[3])");
        assert_eq!(parse_expr("128").unwrap_err().column, 1);
        assert!(parse_expr("m[256]").is_err());
        assert!(parse_expr("abs m[0]").is_err());
        assert_eq!(parse_expr("m[0] +").unwrap_err().column, 7);
        assert!(parse_expr("m[0] m[1]").is_err());
    }
}
