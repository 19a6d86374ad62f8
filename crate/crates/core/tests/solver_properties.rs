mod common;

use proptest::prelude::*;

use common::checks::solver_array_laws;
use common::*;
use redfin_core::isa::{Instruction, Register};
use redfin_core::machine::Flag;
use redfin_core::smt::{optimize_by_search, optimize_native, Direction, Solver, Verdict};
use redfin_core::sym::{Op, Sort, SymValue};
use redfin_core::verify::{timing_bounds, verify, InputSpec, Options, PropertySpec};
use redfin_core::{ConcreteState, CycleModel, Interpreter};

const INPUTS: u8 = 4;

fn solver() -> Solver {
    Solver::locate(None)
}

fn pinned_spec(data: &[i64], goal: String) -> PropertySpec {
    PropertySpec {
        inputs: (0..INPUTS).map(|c| InputSpec { name: format!("x{c}"), cell: c }).collect(),
        constraints: (0..INPUTS as usize).map(|c| format!("x{c} = {}", data[c])).collect(),
        steps: 40,
        goal: Some(goal),
        penalty: false,
        data: data.to_vec(),
        observable: None,
    }
}

fn halted_program() -> impl Strategy<Value = Vec<Instruction>> {
    prop::collection::vec(straight_line_instruction(), 1..14).prop_map(|mut code| {
        code.push(Instruction::Halt);
        code
    })
}

fn inputs_and_data() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(word(), INPUTS as usize..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symbolic_index_array_laws_hold(v in word(), w in word()) {
        solver_array_laws(&solver(), v, w)?;
    }

    #[test]
    fn pinned_verification_agrees_with_concrete_runs(code in halted_program(), data in inputs_and_data()) {
        let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
        let end = Interpreter::default()
            .simulate(40, &ConcreteState::boot(&codes, &data).unwrap())
            .unwrap();
        prop_assert!(*end.flag(Flag::Halt));
        let facts = format!(
            "flag(Halt) && reg(r0) = {} && reg(r3) = {} && mem(0) = {} && mem(7) = {} && clock = {} && flag(Overflow) = {}",
            end.register(Register::R0),
            end.register(Register::R3),
            end.read_memory(0),
            end.read_memory(7),
            end.clock,
            end.flag(Flag::Overflow),
        );
        let options = Options::new(solver());
        let report = verify(&code, &pinned_spec(&data, facts), &options).unwrap();
        prop_assert_eq!(report.verdict, Verdict::Proven);

        let wrong = format!("reg(r1) != {}", end.register(Register::R1));
        match verify(&code, &pinned_spec(&data, wrong), &options).unwrap().verdict {
            Verdict::Falsified(m) => {
                for (c, value) in data.iter().take(INPUTS as usize).enumerate() {
                    prop_assert_eq!(m.signed(&format!("x{c}")), Some(*value));
                }
            }
            other => prop_assert!(false, "expected a counterexample, got {other:?}"),
        }
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn native_and_search_optimizers_agree(
        scale in -16i64..16,
        offset in word(),
        lo in -5000i64..5000,
        width in 0i64..5000,
        maximize in any::<bool>(),
    ) {
        let x = SymValue::var("opt_x", Sort::WORD);
        let objective = x.binary(Op::Mul, &SymValue::word(scale)).binary(Op::Add, &SymValue::word(offset));
        let hyps = [
            x.binary(Op::Slt, &SymValue::word(lo)).not(),
            SymValue::word(lo + width).binary(Op::Slt, &x).not(),
        ];
        let dir = if maximize { Direction::Maximize } else { Direction::Minimize };
        let s = solver();
        let native = optimize_native(&s, "objective", &objective, dir, &hyps).unwrap().verdict;
        let search = optimize_by_search(&s, "objective", &objective, dir, &hyps).unwrap().verdict;
        let value = |v: &Verdict| match v {
            Verdict::Optimum { value, .. } => Some(*value),
            _ => None,
        };
        // Oracle: enumerate the window with wrapping arithmetic.
        let all = (lo..=lo + width).map(|x| x.wrapping_mul(scale).wrapping_add(offset));
        let expect = if maximize { all.max() } else { all.min() };
        prop_assert_eq!(value(&native), expect);
        prop_assert_eq!(value(&search), expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn native_and_search_clock_bounds_agree(code in halted_program(), data in inputs_and_data()) {
        let mut spec = pinned_spec(&data, String::new());
        spec.goal = None;
        spec.constraints = (0..INPUTS).map(|c| format!("x{c} >= -100 && x{c} <= 100")).collect();
        spec.penalty = true;
        let native = timing_bounds(&code, &spec, &Options::new(solver())).unwrap();
        let search = timing_bounds(&code, &spec, &Options::new(solver().without_optimization())).unwrap();
        prop_assert_eq!(native.best_value(), search.best_value());
        prop_assert_eq!(native.worst_value(), search.worst_value());
        let (best, worst) = (native.best_value().unwrap(), native.worst_value().unwrap());
        prop_assert!(best <= worst);

        let mut concrete = data.clone();
        for x in &mut concrete[..INPUTS as usize] {
            *x = (*x).clamp(-100, 100);
        }
        let codes: Vec<_> = code.iter().map(Instruction::encode).collect();
        let end = Interpreter::new(CycleModel::default().with_abs_penalty(true))
            .simulate(40, &ConcreteState::boot(&codes, &concrete).unwrap())
            .unwrap();
        prop_assert!((best..=worst).contains(&end.clock));
    }
}

#[test]
fn verification_scripts_are_deterministic() {
    let code = redfin_core::asm::assemble(include_str!("../../../programs/energy_ll.s")).unwrap();
    let spec = PropertySpec::from_json(include_str!("../../../programs/energy_proof.json")).unwrap();
    let mut options = Options::new(solver());
    options.keep_script = true;
    let first = verify(&code, &spec, &options).unwrap();
    let second = verify(&code, &spec, &options).unwrap();
    assert_eq!(first.verdict, Verdict::Proven);
    assert!(first.script.is_some());
    assert_eq!(first.script, second.script);
}
