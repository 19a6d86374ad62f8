//! Property bodies shared by the property suites and the acceptance report.
//! Plain functions panic on failure; the `Result` ones are proptest bodies.

use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use redfin_core::domain::{Cmp, Concrete, Domain, WordOp};
use redfin_core::hll::{compile_program, eval_expr, CompileTarget, Expr};
use redfin_core::interp::{fetch, increment};
use redfin_core::isa::{IllegalOpcode, Instruction, InstructionCode, Mnemonic, OperandShape, Register};
use redfin_core::machine::Flag;
use redfin_core::smt::{prove, Solver, Verdict};
use redfin_core::sym::{apply, ArrayVar, Op, Sort, SymArray, SymValue, Symbolic};
use redfin_core::{ConcreteState, CycleModel, Interpreter, SymbolicState};

use super::snapshot;

pub type Check = Result<(), TestCaseError>;

// ---- instruction codec ----

fn boundary_operands(shape: OperandShape) -> Vec<u8> {
    match shape {
        OperandShape::None | OperandShape::Reg => vec![0],
        OperandShape::RegSimm | OperandShape::Offset => vec![0x80, 0xff, 0, 1, 0x7f],
        OperandShape::RegAddr | OperandShape::RegUimm => vec![0, 1, 127, 128, 254, 255],
    }
}

/// Encodes and decodes every mnemonic with each register and the extreme
/// operand values of its shape. Returns the number of instructions checked.
pub fn codec_on_boundaries() -> usize {
    assert_eq!(Mnemonic::ALL.len(), 28);
    let mut checked = 0;
    for m in Mnemonic::ALL {
        let registers: &[Register] = match m.shape() {
            OperandShape::None | OperandShape::Offset => &[Register::R0],
            _ => &Register::ALL,
        };
        for &r in registers {
            for byte in boundary_operands(m.shape()) {
                let i = Instruction::from_parts(m, r, byte);
                let code = i.encode();
                assert_eq!(code.opcode(), m as u8);
                assert_eq!(Instruction::decode(code), Ok(i), "{i}");
                checked += 1;
            }
        }
    }
    checked
}

/// Decodes all 65536 code words: legal ones re-encode to a word with the
/// same opcode that decodes identically, the rest have opcodes past 27.
pub fn codec_on_every_word() -> usize {
    for raw in 0..=u16::MAX {
        let code = InstructionCode(raw);
        match Instruction::decode(code) {
            Ok(i) => {
                let canonical = i.encode();
                assert_eq!(Instruction::decode(canonical), Ok(i));
                assert_eq!(canonical.opcode(), code.opcode());
            }
            Err(IllegalOpcode(op)) => {
                assert!(op >= 28);
                assert_eq!(op, code.opcode());
            }
        }
    }
    1 << 16
}

// ---- constant folding against scalar oracles ----

pub const BOUNDARY: [i64; 13] = [i64::MIN, i64::MIN + 1, -65, -64, -2, -1, 0, 1, 2, 63, 64, i64::MAX - 1, i64::MAX];

pub const WORD_OPS: [WordOp; 10] = [
    WordOp::Add,
    WordOp::Sub,
    WordOp::Mul,
    WordOp::SDiv,
    WordOp::And,
    WordOp::Or,
    WordOp::Xor,
    WordOp::Shl,
    WordOp::LShr,
    WordOp::AShr,
];

/// Independent oracle built on i128 and u64 arithmetic.
pub fn oracle(op: WordOp, a: i64, b: i64) -> i64 {
    let (wa, wb) = (a as i128, b as i128);
    let wrap = |v: i128| v as i64;
    match op {
        WordOp::Add => wrap(wa + wb),
        WordOp::Sub => wrap(wa - wb),
        WordOp::Mul => wrap(wa * wb),
        WordOp::SDiv if b == 0 => {
            if a < 0 {
                1
            } else {
                -1
            }
        }
        WordOp::SDiv => wrap(wa / wb),
        WordOp::And => a & b,
        WordOp::Or => a | b,
        WordOp::Xor => a ^ b,
        WordOp::Shl if (b as u64) >= 64 => 0,
        WordOp::Shl => ((a as u64) << b) as i64,
        WordOp::LShr if (b as u64) >= 64 => 0,
        WordOp::LShr => ((a as u64) >> b) as i64,
        WordOp::AShr => {
            let s = (b as u64).min(63) as u32;
            (wa >> s) as i64
        }
    }
}

pub fn folding_matches_oracle(op: WordOp, a: i64, b: i64) -> Check {
    let expect = oracle(op, a, b);
    prop_assert_eq!(Concrete::word_op(op, &a, &b), expect, "{:?} {} {}", op, a, b);
    let folded = Symbolic::word_op(op, &SymValue::word(a), &SymValue::word(b));
    prop_assert_eq!(folded.as_i64(), Some(expect), "{:?} {} {}", op, a, b);
    Ok(())
}

/// Every word operation, comparison, unary operation and overflow test on
/// all pairs of boundary values. Returns the number of pairs checked.
pub fn folding_on_boundaries() -> usize {
    let mut pairs = 0;
    for a in BOUNDARY {
        assert_eq!(Symbolic::abs(&SymValue::word(a)).as_i64(), Some(a.wrapping_abs()));
        assert_eq!(Symbolic::neg(&SymValue::word(a)).as_i64(), Some(a.wrapping_neg()));
        assert_eq!(Symbolic::bitnot(&SymValue::word(a)).as_i64(), Some(!a));
        for b in BOUNDARY {
            for op in WORD_OPS {
                folding_matches_oracle(op, a, b).unwrap();
            }
            let (sa, sb) = (SymValue::word(a), SymValue::word(b));
            let comparisons = [(Cmp::Eq, a == b), (Cmp::Slt, a < b), (Cmp::Sgt, a > b), (Cmp::Ult, (a as u64) < (b as u64))];
            for (cmp, expect) in comparisons {
                assert_eq!(Symbolic::cmp(cmp, &sa, &sb).as_bool(), Some(expect));
                assert_eq!(Concrete::cmp(cmp, &a, &b), expect);
            }
            let checked = [
                (WordOp::Add, a.checked_add(b).is_none()),
                (WordOp::Sub, a.checked_sub(b).is_none()),
                (WordOp::Mul, a.checked_mul(b).is_none()),
            ];
            for (op, expect) in checked {
                assert_eq!(Concrete::overflows(op, &a, &b), expect, "{op:?} {a} {b}");
                assert_eq!(Symbolic::overflows(op, &sa, &sb).as_bool(), Some(expect), "{op:?} {a} {b}");
            }
            pairs += 1;
        }
    }
    pairs
}

pub fn narrow_width_folding() {
    for w in [1u32, 2, 8, 16, 63] {
        let mask = (1u64 << w) - 1;
        for a in [0u64, 1, mask, mask >> 1, (mask >> 1) + 1] {
            for b in [0u64, 1, mask, mask >> 1] {
                let (x, y) = (SymValue::constant(Sort::Bv(w), a), SymValue::constant(Sort::Bv(w), b));
                let sum = apply(Op::Add, &[x.clone(), y.clone()]).unwrap();
                assert_eq!(sum.as_const(), Some((a + b) & mask));
                let prod = apply(Op::Mul, &[x.clone(), y.clone()]).unwrap();
                assert_eq!(prod.as_const(), Some(a.wrapping_mul(b) & mask));
                let ult = apply(Op::Ult, &[x, y]).unwrap();
                assert_eq!(ult.as_bool(), Some(a < b));
            }
        }
    }
}

// ---- array laws ----

/// Read-over-write, shadowing and merging on memories with concrete indices,
/// all of which fold away without a solver.
pub fn folded_array_laws(i: u8, j: u8, v: i64, w: i64) -> Check {
    let mem = Symbolic::memory(&vec![SymValue::word(w); 4]);
    let (ai, aj) = (Symbolic::addr(i), Symbolic::addr(j));
    let stored = Symbolic::write(&mem, &ai, &SymValue::word(v));
    prop_assert_eq!(Symbolic::read(&stored, &ai).as_i64(), Some(v));
    if i != j {
        prop_assert_eq!(Symbolic::read(&stored, &aj), Symbolic::read(&mem, &aj));
    }
    let twice = Symbolic::write(&stored, &ai, &SymValue::word(w));
    prop_assert_eq!(Symbolic::read(&twice, &ai).as_i64(), Some(w));
    let c = SymValue::var("array_law_c", Sort::Bool);
    let merged = Symbolic::ite_memory(&c, &stored, &mem);
    let expect = SymValue::ite(&c, &Symbolic::read(&stored, &aj), &Symbolic::read(&mem, &aj));
    for choice in [0, 1] {
        let env: HashMap<String, u64> = [("array_law_c".to_string(), choice)].into();
        prop_assert_eq!(Symbolic::read(&merged, &aj).evaluate(&env), expect.evaluate(&env));
    }
    Ok(())
}

/// The same laws over a free array with free indices, proven by the solver.
pub fn solver_array_laws(solver: &Solver, v: i64, w: i64) -> Check {
    let a = SymArray::var(ArrayVar { name: "law_a".into(), index: Sort::ADDR, value: Sort::WORD });
    let i = SymValue::var("law_i", Sort::ADDR);
    let j = SymValue::var("law_j", Sort::ADDR);
    let (v, w) = (SymValue::word(v), SymValue::word(w));
    let hit = a.store(&i, &v).read(&i).eq_to(&v);
    prop_assert_eq!(prove(solver, &hit, &[]).unwrap().verdict, Verdict::Proven);
    let miss = a.store(&i, &v).read(&j).eq_to(&a.read(&j));
    prop_assert_eq!(prove(solver, &miss, &[i.eq_to(&j).not()]).unwrap().verdict, Verdict::Proven);
    let shadow = a.store(&i, &v).store(&i, &w).read(&j).eq_to(&a.store(&i, &w).read(&j));
    prop_assert_eq!(prove(solver, &shadow, &[]).unwrap().verdict, Verdict::Proven);
    match prove(solver, &miss, &[]).unwrap().verdict {
        Verdict::Falsified(m) => prop_assert_eq!(m.bits("law_i"), m.bits("law_j")),
        // Storing the value the array already holds cannot be told apart.
        Verdict::Proven => {}
        other => prop_assert!(false, "expected a collision, got {:?}", other),
    }
    Ok(())
}

// ---- concrete and symbolic execution ----

pub const SYMBOLIC_CELLS: u8 = 8;

pub fn run_concrete(code: &[Instruction], data: &[i64], steps: usize, cycles: CycleModel) -> ConcreteState {
    let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
    let s = ConcreteState::boot(&codes, data).unwrap();
    Interpreter::new(cycles).simulate(steps, &s).unwrap()
}

/// Runs `code` concretely and again with the first data cells replaced by
/// free variables, then checks every component of the symbolic final state
/// evaluates to the concrete one under the original data.
pub fn concrete_and_symbolic_agree(code: &[Instruction], data: &[i64], penalty: bool) -> Check {
    let cycles = CycleModel::default().with_abs_penalty(penalty);
    let steps = code.len() + 1;
    let concrete = run_concrete(code, data, steps, cycles);

    let names: Vec<String> = (0..SYMBOLIC_CELLS).map(|c| format!("agree_c{c}")).collect();
    let image: Vec<SymValue> = data
        .iter()
        .enumerate()
        .map(|(i, v)| if i < SYMBOLIC_CELLS as usize { SymValue::var(&names[i], Sort::WORD) } else { SymValue::word(*v) })
        .collect();
    let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
    let boot = SymbolicState::boot(&codes, &image).unwrap();
    let symbolic = Interpreter::new(cycles).simulate(steps, &boot).unwrap();
    let env: HashMap<String, u64> = names.iter().zip(data).map(|(n, v)| (n.clone(), *v as u64)).collect();

    for r in Register::ALL {
        prop_assert_eq!(symbolic.register(r).evaluate(&env).unwrap() as i64, *concrete.register(r), "{}", r);
    }
    for f in Flag::ALL {
        prop_assert_eq!(symbolic.flag(f).evaluate(&env).unwrap() != 0, *concrete.flag(f), "{}", f);
    }
    prop_assert_eq!(symbolic.clock.evaluate(&env).unwrap() as i64, concrete.clock);
    prop_assert_eq!(Symbolic::addr_value(&symbolic.ic), Some(concrete.ic));
    for a in 0..=255u8 {
        prop_assert_eq!(symbolic.read_memory(a).evaluate(&env).unwrap() as i64, concrete.read_memory(a), "cell {}", a);
    }
    Ok(())
}

// ---- compiler correctness ----

/// Compiles `e` with the stack pointer in cell 5 and the temporary in cell 4,
/// runs it on `inputs` in cells 0..=3, and compares against the reference
/// evaluator. The stack pointer must be restored and only the temporary and
/// the stack region may change.
pub fn compiler_correct(e: &Expr, inputs: &[i64], result: Register, stack_base: i64) -> Check {
    let target = CompileTarget::new(result, 5, 4);
    let code = compile_program(e, &target).unwrap();
    prop_assert_eq!(&code, &compile_program(e, &target).unwrap());
    let mut data = inputs.to_vec();
    data.extend([0, stack_base]);
    let end = run_concrete(&code, &data, code.len() + 1, CycleModel::default());
    prop_assert!(*end.flag(Flag::Halt));
    let env: BTreeMap<u8, i64> = inputs.iter().enumerate().map(|(i, v)| (i as u8, *v)).collect();
    prop_assert_eq!(*end.register(result), eval_expr(e, &env).unwrap());
    prop_assert_eq!(end.read_memory(5), stack_base);
    let depth = e.stack_depth() as i64;
    for a in 0..=255u8 {
        let written = a == 4 || ((stack_base - depth + 1)..=stack_base).contains(&(a as i64));
        if !written {
            prop_assert_eq!(end.read_memory(a), data.get(a as usize).copied().unwrap_or(0), "cell {}", a);
        }
    }
    Ok(())
}

// ---- simulation invariants ----

pub const INVARIANT_STEPS: usize = 60;

/// Steps one instruction at a time: halted states never change, running
/// states gain between one and three cycles, and the single-step trace ends
/// where one long simulation does.
pub fn halt_freezes_and_clock_advances(code: &[Instruction], data: &[i64], penalty: bool) -> Check {
    let cycles = CycleModel::default().with_abs_penalty(penalty);
    let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
    let boot = ConcreteState::boot(&codes, data).unwrap();
    let mut interp = Interpreter::new(cycles);
    let mut prev = boot.clone();
    for _ in 0..INVARIANT_STEPS {
        let next = interp.simulate(1, &prev).unwrap();
        if *prev.flag(Flag::Halt) {
            prop_assert_eq!(snapshot(&next), snapshot(&prev));
        } else {
            prop_assert!(next.clock > prev.clock);
            prop_assert!(next.clock - prev.clock <= 3);
        }
        prev = next;
    }
    let whole = interp.simulate(INVARIANT_STEPS, &boot).unwrap();
    prop_assert_eq!(snapshot(&whole), snapshot(&prev));
    Ok(())
}

pub fn step_decomposes(code: &[Instruction], data: &[i64], warmup: usize) -> Check {
    let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
    let boot = ConcreteState::boot(&codes, data).unwrap();
    let mut interp = Interpreter::default();
    let s = interp.simulate(warmup, &boot).unwrap();
    let stepped = interp.step(&s).unwrap();
    let fetched = fetch(&s).unwrap();
    prop_assert_eq!(fetched.clock, s.clock + 1);
    prop_assert_eq!(fetched.ir, s.program.fetch(s.ic).0);
    let inc = increment(&fetched);
    prop_assert_eq!(inc.ic, s.ic.wrapping_add(1));
    let composed = interp.execute(&inc).unwrap();
    prop_assert_eq!(snapshot(&stepped), snapshot(&composed));
    Ok(())
}

pub fn simulation_composes(code: &[Instruction], data: &[i64], m: usize, n: usize) -> Check {
    let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
    let boot = ConcreteState::boot(&codes, data).unwrap();
    let mut interp = Interpreter::default();
    let split = interp.simulate(m, &boot).and_then(|s| interp.simulate(n, &s)).unwrap();
    let whole = interp.simulate(m + n, &boot).unwrap();
    prop_assert_eq!(snapshot(&split), snapshot(&whole));
    Ok(())
}
