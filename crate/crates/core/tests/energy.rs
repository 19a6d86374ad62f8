use std::collections::BTreeMap;

use redfin_core::asm;
use redfin_core::hll::{compile_program, eval_expr, CompileTarget, Expr};
use redfin_core::isa::{Instruction, Register};
use redfin_core::smt::{Solver, Verdict};
use redfin_core::verify::{check_equivalence, timing_bounds, verify, Options, PropertySpec};
use redfin_core::{ConcreteState, CycleModel, Interpreter};

const LOW_LEVEL: &str = include_str!("../../../programs/energy_ll.s");
const FALSIFY: &str = include_str!("../../../programs/energy_falsify.json");
const PROOF: &str = include_str!("../../../programs/energy_proof.json");
const TIMING: &str = include_str!("../../../programs/energy_timing.json");

fn low_level() -> Vec<Instruction> {
    asm::assemble(LOW_LEVEL).unwrap()
}

fn high_level() -> Vec<Instruction> {
    compile_program(&Expr::energy_estimate(0, 1, 2, 3), &CompileTarget::new(Register::R0, 5, 4)).unwrap()
}

fn options() -> Options {
    Options::new(Solver::locate(None))
}

fn run(code: &[Instruction], data: &[i64]) -> ConcreteState {
    let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
    let s = ConcreteState::boot(&codes, data).unwrap();
    Interpreter::new(CycleModel::default()).simulate(100, &s).unwrap()
}

#[test]
fn both_programs_compute_twenty() {
    let data = [10, 5, 3, 5, 0, 100];
    let hl = run(&high_level(), &data).report(0, 5);
    assert_eq!(hl.registers[0], 20);
    assert_eq!(hl.memory, vec![10, 5, 3, 5, 5, 100]);
    let ll = run(&low_level(), &data).report(0, 5);
    assert_eq!(ll.registers[0], 20);
    assert_eq!(ll.memory, vec![10, 5, 3, 8, 0, 100]);
}

#[test]
fn published_counterexample_overflows() {
    let env: BTreeMap<u8, i64> =
        [(0, 5190405167614263295), (1, 0), (2, 149927859193384455), (3, 157447350457463356)].into();
    let v = eval_expr(&Expr::energy_estimate(0, 1, 2, 3), &env).unwrap();
    // Independent oracle: exact product in i128, truncated to 64 bits.
    let exact = 5190405167614263295i128 * (149927859193384455i128 + 157447350457463356i128);
    let wrapped = exact as i64;
    assert_eq!(v, wrapped / 2);
    assert!(v < 0);
}

#[test]
fn theorem_without_time_bounds_is_falsified() {
    let spec = PropertySpec::from_json(FALSIFY).unwrap();
    let report = verify(&high_level(), &spec, &options()).unwrap();
    let model = match report.verdict {
        Verdict::Falsified(m) => m,
        other => panic!("{other:?}"),
    };
    let data: Vec<i64> = ["t1", "t2", "p1", "p2"].iter().map(|n| model.signed(n).unwrap()).chain([0, 100]).collect();
    let end = run(&high_level(), &data);
    assert!(end.report(0, 0).flags[2]);
    assert!(end.registers[0] < 0, "model {model} gives r0 = {}", end.registers[0]);
}

#[test]
fn theorem_with_bounds_is_proven() {
    let spec = PropertySpec::from_json(PROOF).unwrap();
    let report = verify(&high_level(), &spec, &options()).unwrap();
    assert_eq!(report.verdict, Verdict::Proven, "{:?}", report.stats);
}

#[test]
fn low_and_high_level_agree() {
    let spec = PropertySpec::from_json(PROOF).unwrap();
    let report = check_equivalence(&low_level(), &high_level(), &spec, "reg(r0)", &options()).unwrap();
    assert_eq!(report.verdict, Verdict::Proven);
}

#[test]
fn timing_bounds_of_low_level_program() {
    let spec = PropertySpec::from_json(TIMING).unwrap();
    let report = timing_bounds(&low_level(), &spec, &options()).unwrap();
    assert_eq!(report.best_value(), Some(12));
    assert_eq!(report.worst_value(), Some(13));
    let m = report.worst.model().unwrap();
    assert!(m.signed("t1").unwrap() - m.signed("t2").unwrap() < 0);
}
