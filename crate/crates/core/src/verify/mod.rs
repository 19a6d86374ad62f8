//! Verification harness: functional properties, program equivalence and
//! timing bounds over bounded symbolic simulation.
//!
//! Every query boots the machine with the property's data image and a fresh
//! 64-bit variable in each input cell, runs the symbolic executor for the
//! step budget and hands the resulting formula to the solver. Counterexamples
//! and optima are replayed on the concrete simulator before they are
//! reported.

mod goal;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Concrete;
use crate::interp::{CycleModel, Interpreter, SimError, DEFAULT_FORK_CAP};
use crate::isa::{Instruction, MemoryAddress};
use crate::machine::{BootError, Flag, MachineState, Program, MEMORY_SIZE};
use crate::smt::{self, Direction, Model, QueryStats, SmtError, SmtScript, Solver, Verdict};
use crate::sym::{DuplicateVar, Sort, SymValue, SymbolTable, Symbolic};

pub use goal::{milliseconds, milliwatts, GoalError, Rel, Term, Type, Value, MS_PER_YEAR};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub name: String,
    pub cell: MemoryAddress,
}

/// A property file.
///
/// `constraints` are evaluated on the boot state; `goal` and `observable` on
/// the final state, with input names and `m[N]` still denoting initial cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub constraints: Vec<String>,
    pub steps: usize,
    #[serde(default)]
    pub goal: Option<String>,
    #[serde(default)]
    pub penalty: bool,
    /// Initial memory image; input cells are overwritten by variables.
    #[serde(default)]
    pub data: Vec<i64>,
    #[serde(default)]
    pub observable: Option<String>,
}

impl PropertySpec {
    pub fn from_json(text: &str) -> Result<PropertySpec, VerifyError> {
        let spec: PropertySpec = serde_json::from_str(text).map_err(|e| VerifyError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if self.steps == 0 {
            return Err(VerifyError::Spec("steps must be at least 1".into()));
        }
        if self.data.len() > MEMORY_SIZE {
            return Err(VerifyError::Spec(format!("data has {} cells; memory holds {MEMORY_SIZE}", self.data.len())));
        }
        let mut cells = BTreeSet::new();
        let mut table = SymbolTable::new();
        for input in &self.inputs {
            if !cells.insert(input.cell) {
                return Err(VerifyError::Spec(format!("cell {} is used by two inputs", input.cell)));
            }
            table.declare(&input.name, Sort::WORD).map_err(|e| VerifyError::Spec(e.to_string()))?;
        }
        Ok(())
    }

    /// Input names and their cells.
    pub fn input_cells(&self) -> BTreeMap<String, MemoryAddress> {
        self.inputs.iter().map(|i| (i.name.clone(), i.cell)).collect()
    }

    fn parse_bool(&self, what: &str, text: &str) -> Result<Term, VerifyError> {
        Term::parse_bool(text, &self.input_cells())
            .map_err(|e| VerifyError::Property { what: what.to_string(), text: text.to_string(), error: e })
    }

    fn parse_any(&self, what: &str, text: &str) -> Result<Term, VerifyError> {
        Term::parse(text, &self.input_cells())
            .map(|(t, _)| t)
            .map_err(|e| VerifyError::Property { what: what.to_string(), text: text.to_string(), error: e })
    }

    fn constraint_terms(&self) -> Result<Vec<Term>, VerifyError> {
        self.constraints.iter().map(|c| self.parse_bool("constraint", c)).collect()
    }

    /// The data image with `values` placed in the input cells.
    fn image<W: Clone>(&self, constant: impl Fn(i64) -> W, values: &BTreeMap<&str, W>) -> Vec<W> {
        let len = self.inputs.iter().map(|i| i.cell as usize + 1).max().unwrap_or(0).max(self.data.len());
        let mut image: Vec<W> = (0..len).map(|i| constant(self.data.get(i).copied().unwrap_or(0))).collect();
        for input in &self.inputs {
            image[input.cell as usize] = values[input.name.as_str()].clone();
        }
        image
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("invalid property: {0}")]
    Spec(String),
    #[error("in {what} `{text}`: {error}")]
    Property { what: String, text: String, error: GoalError },
    #[error(transparent)]
    Boot(#[from] BootError),
    #[error("program does not provably halt within the step budget: {0}")]
    NonHalting(String),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("internal consistency error: {0}")]
    Inconsistent(String),
}

impl From<DuplicateVar> for VerifyError {
    fn from(e: DuplicateVar) -> Self {
        VerifyError::Spec(e.to_string())
    }
}

/// Solver and machine configuration shared by all queries.
#[derive(Clone, Debug)]
pub struct Options {
    pub solver: Solver,
    pub cycles: CycleModel,
    pub fork_cap: usize,
    /// Keep the SMT-LIB text of the main query in the report.
    pub keep_script: bool,
}

impl Options {
    pub fn new(solver: Solver) -> Options {
        Options { solver, cycles: CycleModel::default(), fork_cap: DEFAULT_FORK_CAP, keep_script: false }
    }

    fn interpreter(&self, spec: &PropertySpec) -> Interpreter {
        let cycles = self.cycles.with_abs_penalty(self.cycles.abs_negative_penalty || spec.penalty);
        Interpreter::new(cycles).with_fork_cap(self.fork_cap)
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub verdict: Verdict,
    pub stats: QueryStats,
    pub elapsed: Duration,
    pub diagnostics: Vec<String>,
    pub script: Option<String>,
}

#[derive(Clone, Debug)]
pub struct TimingReport {
    /// `Optimum` of the final clock, or `Unknown`.
    pub best: Verdict,
    pub worst: Verdict,
    pub stats: [QueryStats; 2],
    pub elapsed: Duration,
    pub diagnostics: Vec<String>,
}

impl TimingReport {
    pub fn best_value(&self) -> Option<i64> {
        optimum_value(&self.best)
    }

    pub fn worst_value(&self) -> Option<i64> {
        optimum_value(&self.worst)
    }
}

fn optimum_value(v: &Verdict) -> Option<i64> {
    match v {
        Verdict::Optimum { value, .. } => Some(*value),
        _ => None,
    }
}

struct SymbolicBoot {
    image: Vec<SymValue>,
    hypotheses: Vec<SymValue>,
}

fn symbolic_boot(spec: &PropertySpec) -> Result<SymbolicBoot, VerifyError> {
    spec.validate()?;
    let mut table = SymbolTable::new();
    let mut vars = BTreeMap::new();
    for input in &spec.inputs {
        vars.insert(input.name.as_str(), table.declare(&input.name, Sort::WORD)?);
    }
    let image = spec.image(SymValue::word, &vars);
    let boot = MachineState::<Symbolic>::boot(&[], &image)?;
    let hypotheses = spec.constraint_terms()?.iter().map(|c| c.eval_bool(&boot, &boot)).collect();
    Ok(SymbolicBoot { image, hypotheses })
}

fn concrete_boot(spec: &PropertySpec, program: &Arc<Program>, model: &Model) -> MachineState<Concrete> {
    let values: BTreeMap<&str, i64> =
        spec.inputs.iter().map(|i| (i.name.as_str(), model.signed(&i.name).unwrap_or(0))).collect();
    MachineState::boot_with(program.clone(), &spec.image(|v| v, &values))
}

fn program_of(code: &[Instruction]) -> Result<Arc<Program>, VerifyError> {
    Ok(Arc::new(Program::from_instructions(code)?))
}

fn unknown_report(e: SimError, start: Instant) -> Report {
    Report {
        verdict: Verdict::Unknown(format!("symbolic simulation stopped: {e}")),
        stats: QueryStats::default(),
        elapsed: start.elapsed(),
        diagnostics: vec![e.to_string()],
        script: None,
    }
}

fn script_text(options: &Options, hypotheses: &[SymValue], goal: &SymValue) -> Option<String> {
    options.keep_script.then(|| {
        let mut assertions = hypotheses.to_vec();
        assertions.push(goal.not());
        let script: SmtScript = smt::lower(&assertions);
        script.text
    })
}

fn all_hold(spec: &PropertySpec, boot: &MachineState<Concrete>) -> Result<bool, VerifyError> {
    Ok(spec.constraint_terms()?.iter().all(|c| c.eval_bool(boot, boot)))
}

/// Proves that `spec.goal` holds in the final state of `program` for every
/// input satisfying the constraints.
pub fn verify(program: &[Instruction], spec: &PropertySpec, options: &Options) -> Result<Report, VerifyError> {
    let start = Instant::now();
    let goal_text = spec.goal.as_deref().ok_or_else(|| VerifyError::Spec("no goal given".into()))?;
    let goal_term = spec.parse_bool("goal", goal_text)?;
    let prog = program_of(program)?;
    let s0 = symbolic_boot(spec)?;
    let boot = MachineState::<Symbolic>::boot_with(prog.clone(), &s0.image);
    let mut interp = options.interpreter(spec);
    let last = match interp.simulate(spec.steps, &boot) {
        Ok(s) => s,
        Err(e) => return Ok(unknown_report(e, start)),
    };
    let diagnostics = interp.take_diagnostics().iter().map(ToString::to_string).collect();
    let goal = goal_term.eval_bool(&boot, &last);
    let outcome = smt::prove(&options.solver, &goal, &s0.hypotheses)?;

    if let Verdict::Falsified(model) = &outcome.verdict {
        let cboot = concrete_boot(spec, &prog, model);
        let cend = options.interpreter(spec).simulate(spec.steps, &cboot).map_err(|e| {
            VerifyError::Inconsistent(format!("concrete replay failed: {e}"))
        })?;
        if !all_hold(spec, &cboot)? || goal_term.eval_bool(&cboot, &cend) {
            return Err(VerifyError::Inconsistent(format!(
                "counterexample does not reproduce on the concrete simulator:\n{model}"
            )));
        }
    }
    Ok(Report {
        verdict: outcome.verdict,
        stats: outcome.stats,
        elapsed: start.elapsed(),
        diagnostics,
        script: script_text(options, &s0.hypotheses, &goal),
    })
}

/// Proves that `observable` has the same value in the final states of both
/// programs when they start from the same memory.
pub fn check_equivalence(
    a: &[Instruction],
    b: &[Instruction],
    spec: &PropertySpec,
    observable: &str,
    options: &Options,
) -> Result<Report, VerifyError> {
    let start = Instant::now();
    let obs = spec.parse_any("observable", observable)?;
    let (pa, pb) = (program_of(a)?, program_of(b)?);
    let s0 = symbolic_boot(spec)?;
    let boot_a = MachineState::<Symbolic>::boot_with(pa.clone(), &s0.image);
    let boot_b = MachineState::<Symbolic>::boot_with(pb.clone(), &s0.image);
    let mut interp = options.interpreter(spec);
    let end_a = match interp.simulate(spec.steps, &boot_a) {
        Ok(s) => s,
        Err(e) => return Ok(unknown_report(e, start)),
    };
    let end_b = match interp.simulate(spec.steps, &boot_b) {
        Ok(s) => s,
        Err(e) => return Ok(unknown_report(e, start)),
    };
    let diagnostics = interp.take_diagnostics().iter().map(ToString::to_string).collect();
    let same = |ia: &MachineState<Symbolic>, la: &MachineState<Symbolic>, ib, lb| -> SymValue {
        match (obs.eval(ia, la), obs.eval(ib, lb)) {
            (Value::Int(x), Value::Int(y)) => x.eq_to(&y),
            (Value::Bool(x), Value::Bool(y)) => x.eq_to(&y),
            _ => unreachable!("one term has one type"),
        }
    };
    let goal = same(&boot_a, &end_a, &boot_b, &end_b);
    let outcome = smt::prove(&options.solver, &goal, &s0.hypotheses)?;

    if let Verdict::Falsified(model) = &outcome.verdict {
        let run = |p: &Arc<Program>| -> Result<_, VerifyError> {
            let boot = concrete_boot(spec, p, model);
            let end = options
                .interpreter(spec)
                .simulate(spec.steps, &boot)
                .map_err(|e| VerifyError::Inconsistent(format!("concrete replay failed: {e}")))?;
            Ok((boot, end))
        };
        let (ba, ea) = run(&pa)?;
        let (bb, eb) = run(&pb)?;
        let differ = match (obs.eval(&ba, &ea), obs.eval(&bb, &eb)) {
            (Value::Int(x), Value::Int(y)) => x != y,
            (Value::Bool(x), Value::Bool(y)) => x != y,
            _ => unreachable!("one term has one type"),
        };
        if !all_hold(spec, &ba)? || !differ {
            return Err(VerifyError::Inconsistent(format!(
                "distinguishing input does not reproduce on the concrete simulator:\n{model}"
            )));
        }
    }
    Ok(Report {
        verdict: outcome.verdict,
        stats: outcome.stats,
        elapsed: start.elapsed(),
        diagnostics,
        script: script_text(options, &s0.hypotheses, &goal),
    })
}

/// Least and greatest final clock over all constrained inputs. Halting within
/// the budget is proven first so that the clock is a bounded objective.
pub fn timing_bounds(program: &[Instruction], spec: &PropertySpec, options: &Options) -> Result<TimingReport, VerifyError> {
    let start = Instant::now();
    let prog = program_of(program)?;
    let s0 = symbolic_boot(spec)?;
    let boot = MachineState::<Symbolic>::boot_with(prog.clone(), &s0.image);
    let mut interp = options.interpreter(spec);
    let last = match interp.simulate(spec.steps, &boot) {
        Ok(s) => s,
        Err(e) => {
            let v = Verdict::Unknown(format!("symbolic simulation stopped: {e}"));
            return Ok(TimingReport {
                best: v.clone(),
                worst: v,
                stats: Default::default(),
                elapsed: start.elapsed(),
                diagnostics: vec![e.to_string()],
            });
        }
    };
    let diagnostics = interp.take_diagnostics().iter().map(ToString::to_string).collect();

    let halts = smt::prove(&options.solver, last.flag(Flag::Halt), &s0.hypotheses)?;
    if !halts.verdict.is_proven() {
        return Err(VerifyError::NonHalting(halts.verdict.to_string()));
    }

    let clock = last.clock.clone();
    let (best, worst) = std::thread::scope(|scope| {
        let min = scope.spawn(|| smt::optimize(&options.solver, "Best case", &clock, Direction::Minimize, &s0.hypotheses));
        let max = scope.spawn(|| smt::optimize(&options.solver, "Worst case", &clock, Direction::Maximize, &s0.hypotheses));
        (min.join().expect("optimizer thread"), max.join().expect("optimizer thread"))
    });
    let (best, worst) = (best?, worst?);

    for v in [&best.verdict, &worst.verdict] {
        if let Verdict::Optimum { value, model, .. } = v {
            let cboot = concrete_boot(spec, &prog, model);
            let cend = options
                .interpreter(spec)
                .simulate(spec.steps, &cboot)
                .map_err(|e| VerifyError::Inconsistent(format!("concrete replay failed: {e}")))?;
            if !all_hold(spec, &cboot)? || cend.clock != *value {
                return Err(VerifyError::Inconsistent(format!(
                    "optimal model replays to clock {} instead of {value}:\n{model}",
                    cend.clock
                )));
            }
        }
    }
    Ok(TimingReport {
        best: best.verdict,
        worst: worst.verdict,
        stats: [best.stats, worst.stats],
        elapsed: start.elapsed(),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> Result<PropertySpec, VerifyError> {
        PropertySpec::from_json(json)
    }

    #[test]
    fn spec_validation() {
        assert!(spec(r#"{"inputs":[],"steps":1,"goal":"true"}"#).is_ok());
        assert!(matches!(spec(r#"{"inputs":[],"steps":0}"#), Err(VerifyError::Spec(_))));
        let dup = r#"{"inputs":[{"name":"a","cell":0},{"name":"b","cell":0}],"steps":1}"#;
        assert!(matches!(spec(dup), Err(VerifyError::Spec(m)) if m.contains("cell 0")));
        let dup = r#"{"inputs":[{"name":"a","cell":0},{"name":"a","cell":1}],"steps":1}"#;
        assert!(matches!(spec(dup), Err(VerifyError::Spec(m)) if m.contains("twice")));
        assert!(matches!(spec(r#"{"inputs":[],"steps":1,"extra":1}"#), Err(VerifyError::Spec(_))));
        assert!(matches!(spec("not json"), Err(VerifyError::Spec(_))));
    }

    #[test]
    fn image_places_inputs_over_data() {
        let s = spec(r#"{"inputs":[{"name":"a","cell":7}],"steps":1,"data":[1,2,3]}"#).unwrap();
        let values = BTreeMap::from([("a", 9i64)]);
        assert_eq!(s.image(|v| v, &values), vec![1, 2, 3, 0, 0, 0, 0, 9]);
    }
}
