//! The state-transformer semantics and bounded simulation.
//!
//! One execution step is the composition `execute ∘ increment ∘ fetch`:
//! fetch copies `program[ic]` into the instruction register and spends the
//! first cycle, increment advances `ic` modulo 256, and execute decodes the
//! instruction register and runs the instruction's transformer, spending the
//! remaining cycles of its cost. Everything is generic over [`Domain`], so the
//! same code drives the concrete simulator and the symbolic executor.

use thiserror::Error;

use crate::domain::{Cmp, Domain, WordOp};
use crate::isa::{IllegalOpcode, Instruction, InstructionCode, MemoryAddress, Register};
use crate::machine::{Flag, MachineState, ProgramMismatch};

/// Cycle cost of each instruction, fetch included.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleModel {
    /// Cost of `ld`, `ldmi`, `st` and `stmi`.
    pub memory_access: u64,
    /// Cost of every other instruction.
    pub other: u64,
    /// Charge one extra cycle when `abs` sees a negative operand.
    pub abs_negative_penalty: bool,
}

impl Default for CycleModel {
    fn default() -> Self {
        CycleModel { memory_access: 2, other: 1, abs_negative_penalty: false }
    }
}

impl CycleModel {
    pub fn with_abs_penalty(self, on: bool) -> Self {
        CycleModel { abs_negative_penalty: on, ..self }
    }

    /// Base cost of `i`, excluding the data-dependent `abs` penalty.
    pub fn cost_of(&self, i: &Instruction) -> u64 {
        let cost = match i {
            Instruction::Ld(..) | Instruction::Ldmi(..) | Instruction::St(..) | Instruction::Stmi(..) => {
                self.memory_access
            }
            _ => self.other,
        };
        cost.max(1)
    }
}

/// Something the interpreter noticed that does not stop the simulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    /// The slot held an unassigned opcode; the machine halted there.
    IllegalOpcode { slot: u8, opcode: u8 },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::IllegalOpcode { slot, opcode } => {
                write!(f, "illegal opcode {opcode} at slot {slot}; machine halted")
            }
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error(
        "instruction counter may take {} values, more than the fork cap {cap}{}",
        .candidates.map_or("up to 256".to_string(), |n| n.to_string()),
        .branch.map_or(String::new(), |(slot, i)| format!(" (made symbolic by `{i}` at slot {slot})"))
    )]
    ForkCapExceeded { candidates: Option<usize>, cap: usize, branch: Option<(u8, Instruction)> },
    #[error("{0} requires a concrete instruction counter")]
    SymbolicCounter(&'static str),
    #[error("instruction register is symbolic")]
    SymbolicInstruction,
    #[error(transparent)]
    Merge(#[from] ProgramMismatch),
}

pub const DEFAULT_FORK_CAP: usize = 16;

/// Drives the semantics under a cycle model and collects diagnostics.
#[derive(Clone, Debug)]
pub struct Interpreter {
    pub cycles: CycleModel,
    pub fork_cap: usize,
    diagnostics: Vec<Diagnostic>,
    last_branch: Option<(u8, Instruction)>,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter::new(CycleModel::default())
    }
}

/// `T_fetch`: `ir := program[ic]`, one cycle.
pub fn fetch<D: Domain>(s: &MachineState<D>) -> Result<MachineState<D>, SimError> {
    let slot = D::addr_value(&s.ic).ok_or(SimError::SymbolicCounter("fetch"))?;
    let mut next = s.clone();
    next.ir = D::code(s.program.fetch(slot).0);
    next.clock = D::add(&s.clock, &D::word(1));
    Ok(next)
}

/// `T_inc`: `ic := ic + 1` modulo 256.
pub fn increment<D: Domain>(s: &MachineState<D>) -> MachineState<D> {
    let mut next = s.clone();
    next.ic = D::addr_offset(&s.ic, 1);
    next
}

impl Interpreter {
    pub fn new(cycles: CycleModel) -> Self {
        Interpreter { cycles, fork_cap: DEFAULT_FORK_CAP, diagnostics: Vec::new(), last_branch: None }
    }

    pub fn with_fork_cap(self, cap: usize) -> Self {
        Interpreter { fork_cap: cap, ..self }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn take_diagnostics(&mut self) -> Vec<Diagnostic> {
        std::mem::take(&mut self.diagnostics)
    }

    /// One step from `s`. A symbolic instruction counter forks over its
    /// possible values.
    pub fn step<D: Domain>(&mut self, s: &MachineState<D>) -> Result<MachineState<D>, SimError> {
        match D::addr_value(&s.ic) {
            Some(_) => self.execute(&increment(&fetch(s)?)),
            None => self.fork_on_symbolic_ic(s),
        }
    }

    /// `T_i`: decode the instruction register and run its transformer. The
    /// fetch cycle has already been charged; the rest of the cost is added
    /// here.
    pub fn execute<D: Domain>(&mut self, s: &MachineState<D>) -> Result<MachineState<D>, SimError> {
        let code = D::code_value(&s.ir).ok_or(SimError::SymbolicInstruction)?;
        match Instruction::decode(InstructionCode(code)) {
            Ok(i) => {
                let mut next = self.transform(s, &i);
                let extra = self.cycles.cost_of(&i) - 1;
                if extra > 0 {
                    next.clock = D::add(&next.clock, &D::word(extra as i64));
                }
                Ok(next)
            }
            Err(IllegalOpcode(opcode)) => {
                let slot = D::addr_value(&s.ic).map_or(0, |ic| ic.wrapping_sub(1));
                self.diagnostics.push(Diagnostic::IllegalOpcode { slot, opcode });
                Ok(write_flag(s, Flag::Halt, D::bit(true)))
            }
        }
    }

    fn transform<D: Domain>(&mut self, s: &MachineState<D>, i: &Instruction) -> MachineState<D> {
        use Instruction as I;
        match *i {
            I::Halt => write_flag(s, Flag::Halt, D::bit(true)),
            I::Nop => s.clone(),
            I::Ld(r, a) => write_register(s, r, s.read_memory(a)),
            I::LdI(r, k) => write_register(s, r, D::word(k as i64)),
            I::Ldmi(r, a) => {
                let target = D::addr_of_word(&s.read_memory(a));
                write_register(s, r, D::read(&s.memory, &target))
            }
            I::St(r, a) => write_memory(s, &D::addr(a), s.register(r).clone()),
            I::Stmi(r, a) => {
                let target = D::addr_of_word(&s.read_memory(a));
                write_memory(s, &target, s.register(r).clone())
            }
            I::Add(r, a) => arithmetic(s, WordOp::Add, r, a, true),
            I::Sub(r, a) => arithmetic(s, WordOp::Sub, r, a, true),
            I::Mul(r, a) => arithmetic(s, WordOp::Mul, r, a, true),
            I::Div(r, a) => arithmetic(s, WordOp::SDiv, r, a, false),
            I::And(r, a) => arithmetic(s, WordOp::And, r, a, false),
            I::Or(r, a) => arithmetic(s, WordOp::Or, r, a, false),
            I::Xor(r, a) => arithmetic(s, WordOp::Xor, r, a, false),
            I::Abs(r) => self.abs(s, r),
            I::Not(r) => write_register(s, r, D::bitnot(s.register(r))),
            I::Sll(r, a) => shift(s, WordOp::Shl, r, &s.read_memory(a)),
            I::Srl(r, a) => shift(s, WordOp::LShr, r, &s.read_memory(a)),
            I::Sra(r, a) => shift(s, WordOp::AShr, r, &s.read_memory(a)),
            I::SllI(r, k) => shift(s, WordOp::Shl, r, &D::word(k as i64)),
            I::SrlI(r, k) => shift(s, WordOp::LShr, r, &D::word(k as i64)),
            I::SraI(r, k) => shift(s, WordOp::AShr, r, &D::word(k as i64)),
            I::CmpEq(r, a) => compare(s, Cmp::Eq, r, a),
            I::CmpLt(r, a) => compare(s, Cmp::Slt, r, a),
            I::CmpGt(r, a) => compare(s, Cmp::Sgt, r, a),
            I::Jmpi(o) => {
                let mut next = s.clone();
                next.ic = D::addr_offset(&s.ic, o);
                next
            }
            I::JmpiCt(o) => self.branch(s, i, o, true),
            I::JmpiCf(o) => self.branch(s, i, o, false),
        }
    }

    fn abs<D: Domain>(&self, s: &MachineState<D>, r: Register) -> MachineState<D> {
        let x = s.register(r);
        let result = D::abs(x);
        // Only i64::MIN stays negative.
        let overflow = D::is_negative(&result);
        let mut next = write_flag(s, Flag::Overflow, D::or(s.flag(Flag::Overflow), &overflow));
        next.registers[r.index()] = result;
        if self.cycles.abs_negative_penalty {
            let penalised = D::add(&next.clock, &D::word(1));
            next.clock = D::ite_word(&D::is_negative(x), &penalised, &next.clock);
        }
        next
    }

    fn branch<D: Domain>(&mut self, s: &MachineState<D>, i: &Instruction, offset: i8, on: bool) -> MachineState<D> {
        let taken = D::addr_offset(&s.ic, offset);
        let cond = s.flag(Flag::Condition);
        let mut next = s.clone();
        next.ic = if on { D::ite_addr(cond, &taken, &s.ic) } else { D::ite_addr(cond, &s.ic, &taken) };
        if D::addr_value(&next.ic).is_none() {
            let slot = D::addr_value(&s.ic).map_or(0, |ic| ic.wrapping_sub(1));
            self.last_branch = Some((slot, *i));
        }
        next
    }

    /// Steps every feasible value of a symbolic instruction counter under its
    /// path condition and merges the results.
    pub fn fork_on_symbolic_ic<D: Domain>(&mut self, s: &MachineState<D>) -> Result<MachineState<D>, SimError> {
        let candidates = D::addr_candidates(&s.ic);
        let too_many = candidates.as_ref().is_none_or(|c| c.len() > self.fork_cap);
        if too_many {
            return Err(SimError::ForkCapExceeded {
                candidates: candidates.map(|c| c.len()),
                cap: self.fork_cap,
                branch: self.last_branch,
            });
        }
        let candidates = candidates.expect("bounded");
        let mut branches = Vec::with_capacity(candidates.len());
        for &slot in &candidates {
            let mut pinned = s.clone();
            pinned.ic = D::addr(slot);
            branches.push((D::addr_is(&s.ic, slot), self.step(&pinned)?));
        }
        let (_, mut merged) = branches.pop().expect("at least one candidate");
        while let Some((cond, state)) = branches.pop() {
            merged = MachineState::merge(&cond, &state, &merged)?;
        }
        Ok(merged)
    }

    /// Runs at most `budget` steps. A halted machine is frozen: once `Halt`
    /// is set the state, clock included, no longer changes.
    pub fn simulate<D: Domain>(&mut self, budget: usize, s: &MachineState<D>) -> Result<MachineState<D>, SimError> {
        let mut state = s.clone();
        for _ in 0..budget {
            let halted = state.halted().clone();
            if D::bit_value(&halted) == Some(true) {
                break;
            }
            let next = self.step(&state)?;
            state = MachineState::merge(&halted, &state, &next)?;
        }
        Ok(state)
    }
}

fn write_flag<D: Domain>(s: &MachineState<D>, f: Flag, value: D::Bit) -> MachineState<D> {
    let mut next = s.clone();
    next.flags[f.index()] = value;
    next
}

fn write_register<D: Domain>(s: &MachineState<D>, r: Register, value: D::Word) -> MachineState<D> {
    let mut next = s.clone();
    next.registers[r.index()] = value;
    next
}

fn write_memory<D: Domain>(s: &MachineState<D>, a: &D::Addr, value: D::Word) -> MachineState<D> {
    let mut next = s.clone();
    next.memory = D::write(&s.memory, a, &value);
    next
}

fn arithmetic<D: Domain>(
    s: &MachineState<D>,
    op: WordOp,
    r: Register,
    a: MemoryAddress,
    track_overflow: bool,
) -> MachineState<D> {
    let (x, y) = (s.register(r), s.read_memory(a));
    let mut next = write_register(s, r, D::word_op(op, x, &y));
    if track_overflow {
        next.flags[Flag::Overflow.index()] = D::or(s.flag(Flag::Overflow), &D::overflows(op, x, &y));
    }
    next
}

fn shift<D: Domain>(s: &MachineState<D>, op: WordOp, r: Register, amount: &D::Word) -> MachineState<D> {
    let amount = D::word_op(WordOp::And, amount, &D::word(63));
    write_register(s, r, D::word_op(op, s.register(r), &amount))
}

fn compare<D: Domain>(s: &MachineState<D>, op: Cmp, r: Register, a: MemoryAddress) -> MachineState<D> {
    let c = D::cmp(op, s.register(r), &s.read_memory(a));
    write_flag(s, Flag::Condition, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Concrete;
    use crate::isa::Instruction as I;
    use crate::isa::Register::*;

    type State = MachineState<Concrete>;

    fn boot(program: &[Instruction], data: &[i64]) -> State {
        let code: Vec<_> = program.iter().map(Instruction::encode).collect();
        State::boot(&code, data).unwrap()
    }

    #[test]
    fn halt_sets_flag_and_costs_one() {
        let s = Interpreter::default().step(&boot(&[I::Halt], &[])).unwrap();
        assert!(s.flags[Flag::Halt.index()]);
        assert_eq!(s.clock, 1);
        assert_eq!(s.ic, 1);
    }

    #[test]
    fn load_costs_two() {
        let s = Interpreter::default().step(&boot(&[I::Ld(R0, 0)], &[10])).unwrap();
        assert_eq!(s.registers[0], 10);
        assert_eq!(s.ic, 1);
        assert_eq!(s.clock, 2);
    }

    #[test]
    fn conditional_jump_not_taken() {
        let s = Interpreter::default().step(&boot(&[I::JmpiCt(3)], &[])).unwrap();
        assert_eq!(s.ic, 1);
        let mut t = boot(&[I::JmpiCt(3)], &[]);
        t.flags[Flag::Condition.index()] = true;
        assert_eq!(Interpreter::default().step(&t).unwrap().ic, 4);
        let f = Interpreter::default().step(&boot(&[I::JmpiCf(-1)], &[])).unwrap();
        assert_eq!(f.ic, 0);
    }

    #[test]
    fn abs_overflow_only_at_min() {
        let mut it = Interpreter::default();
        let s = it.simulate(2, &boot(&[I::Ld(R1, 0), I::Abs(R1)], &[i64::MIN])).unwrap();
        assert_eq!(s.registers[1], i64::MIN);
        assert!(s.flags[Flag::Overflow.index()]);
        let s = it.simulate(2, &boot(&[I::Ld(R1, 0), I::Abs(R1)], &[-5])).unwrap();
        assert_eq!(s.registers[1], 5);
        assert!(!s.flags[Flag::Overflow.index()]);
    }

    #[test]
    fn abs_penalty_only_when_negative() {
        let program = [I::Ld(R0, 0), I::Abs(R0), I::Halt];
        let mut it = Interpreter::new(CycleModel::default().with_abs_penalty(true));
        assert_eq!(it.simulate(10, &boot(&program, &[-1])).unwrap().clock, 5);
        assert_eq!(it.simulate(10, &boot(&program, &[1])).unwrap().clock, 4);
        assert_eq!(Interpreter::default().simulate(10, &boot(&program, &[-1])).unwrap().clock, 4);
    }

    #[test]
    fn overflow_is_sticky() {
        let program = [I::Ld(R0, 0), I::Add(R0, 0), I::LdI(R0, 1), I::Add(R0, 1), I::Halt];
        let s = Interpreter::default().simulate(10, &boot(&program, &[i64::MAX, 1])).unwrap();
        assert_eq!(s.registers[0], 2);
        assert!(s.flags[Flag::Overflow.index()]);
    }

    #[test]
    fn indirect_addressing_uses_low_byte() {
        let program = [I::Ldmi(R2, 0), I::Stmi(R2, 1), I::Halt];
        let s = Interpreter::default().simulate(10, &boot(&program, &[256 + 3, 7, 0, 42])).unwrap();
        assert_eq!(s.registers[2], 42);
        assert_eq!(s.memory[7], 42);
        assert_eq!(s.clock, 5);
    }

    #[test]
    fn shifts_mask_amount() {
        let program = [I::LdI(R0, 1), I::Sll(R0, 0), I::LdI(R1, -16), I::SraI(R1, 2), I::LdI(R2, -1), I::SrlI(R2, 60)];
        let s = Interpreter::default().simulate(6, &boot(&program, &[65])).unwrap();
        assert_eq!(s.registers[0], 2);
        assert_eq!(s.registers[1], -4);
        assert_eq!(s.registers[2], 0xF);
    }

    #[test]
    fn compare_sets_condition_signed() {
        let s = Interpreter::default().simulate(2, &boot(&[I::LdI(R0, -1), I::CmpLt(R0, 0)], &[0])).unwrap();
        assert!(s.flags[Flag::Condition.index()]);
        let s = Interpreter::default().simulate(2, &boot(&[I::LdI(R0, -1), I::CmpGt(R0, 0)], &[0])).unwrap();
        assert!(!s.flags[Flag::Condition.index()]);
    }

    #[test]
    fn illegal_opcode_halts_with_diagnostic() {
        let code = [Instruction::Nop.encode(), InstructionCode(63 << 10)];
        let mut it = Interpreter::default();
        let s = it.simulate(10, &State::boot(&code, &[]).unwrap()).unwrap();
        assert!(s.flags[Flag::Halt.index()]);
        assert_eq!(s.clock, 2);
        assert_eq!(it.diagnostics(), &[Diagnostic::IllegalOpcode { slot: 1, opcode: 63 }]);
    }

    #[test]
    fn zero_budget_is_identity() {
        let s = boot(&[I::LdI(R0, 1)], &[]);
        let t = Interpreter::default().simulate(0, &s).unwrap();
        assert_eq!(t.report(0, 255), s.report(0, 255));
    }

    #[test]
    fn halted_machine_is_frozen() {
        let s = boot(&[I::LdI(R0, 1), I::Halt, I::LdI(R0, 2)], &[]);
        let mut it = Interpreter::default();
        let a = it.simulate(2, &s).unwrap();
        let b = it.simulate(50, &s).unwrap();
        assert_eq!(a.report(0, 255), b.report(0, 255));
        assert_eq!(b.clock, 2);
    }

    #[test]
    fn counting_loop() {
        // r0 counts down from 3; loop body is three instructions.
        let program = [
            I::LdI(R0, 3),
            I::Sub(R0, 0), // loop:
            I::CmpGt(R0, 1),
            I::JmpiCt(-3),
            I::Halt,
        ];
        let s = Interpreter::default().simulate(100, &boot(&program, &[1, 0])).unwrap();
        assert_eq!(s.registers[0], 0);
        assert!(s.flags[Flag::Halt.index()]);
    }
}
