//! SMT-LIB 2 lowering, an external solver driver, validity and optimization
//! queries.
//!
//! Every falsifying model is re-evaluated against the original DAG before it
//! is reported, so a solver or lowering bug surfaces as
//! [`SmtError::Inconsistent`] rather than as a bogus counterexample.

mod lower;
mod process;
mod sexp;

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde::ser::{Serialize, SerializeMap, Serializer};
use thiserror::Error;

use crate::sym::{signed, EvalError, Op, Sort, SymValue, Valuation};

pub use lower::{lower, lower_query, Direction, Logic, SmtScript};
pub use process::{Solver, SolverError, DEFAULT_TIMEOUT, SOLVER_ENV};
pub use sexp::{literal, parse_all, ParseError, Sexp};

/// Values for the declared variables of a query.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model {
    values: BTreeMap<String, (Sort, u64)>,
    cells: BTreeMap<(String, u64), u64>,
}

impl Model {
    pub fn new() -> Model {
        Model::default()
    }

    pub fn insert(&mut self, name: &str, sort: Sort, bits: u64) {
        let mask = if sort.width() >= 64 { u64::MAX } else { (1u64 << sort.width()) - 1 };
        self.values.insert(name.to_string(), (sort, bits & mask));
    }

    pub fn bits(&self, name: &str) -> Option<u64> {
        self.values.get(name).map(|(_, b)| *b)
    }

    /// The value of a bitvector variable read as two's complement.
    pub fn signed(&self, name: &str) -> Option<i64> {
        self.values.get(name).map(|(s, b)| signed(*b, s.width()))
    }

    /// Records that `array` holds `bits` at `index`.
    pub fn insert_cell(&mut self, array: &str, index: u64, bits: u64) {
        self.cells.insert((array.to_string(), index), bits);
    }

    /// Array cells the solver reported, by array name and index.
    pub fn cells(&self) -> impl Iterator<Item = (&str, u64, u64)> {
        self.cells.iter().map(|((a, i), b)| (a.as_str(), *i, *b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Sort, u64)> {
        self.values.iter().map(|(k, (s, b))| (k.as_str(), *s, *b))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Valuation for Model {
    fn var(&self, name: &str) -> Option<u64> {
        self.bits(name)
    }

    fn select(&self, array: &str, index: u64) -> Option<u64> {
        self.cells.get(&(array.to_string(), index)).copied()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, sort, bits)) in self.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match sort {
                Sort::Bool => write!(f, "  {name} = {} :: Bool", bits != 0)?,
                Sort::Bv(64) => write!(f, "  {name} = {} :: Int64", bits as i64)?,
                Sort::Bv(w) => write!(f, "  {name} = {bits} :: Word{w}")?,
            }
        }
        for (i, (array, index, bits)) in self.cells().enumerate() {
            if i > 0 || !self.is_empty() {
                writeln!(f)?;
            }
            write!(f, "  {array}[{index}] = {bits:#x}")?;
        }
        Ok(())
    }
}

impl Serialize for Model {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.values.len() + self.cells.len()))?;
        for (name, sort, bits) in self.iter() {
            match sort {
                Sort::Bool => map.serialize_entry(name, &(bits != 0))?,
                Sort::Bv(w) => map.serialize_entry(name, &signed(bits, w))?,
            }
        }
        for (array, index, bits) in self.cells() {
            map.serialize_entry(&format!("{array}[{index}]"), &bits)?;
        }
        map.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Proven,
    Falsified(Model),
    Unknown(String),
    Optimum { objective: String, value: i64, model: Model },
}

impl Verdict {
    pub fn is_proven(&self) -> bool {
        matches!(self, Verdict::Proven)
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            Verdict::Falsified(m) | Verdict::Optimum { model: m, .. } => Some(m),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Proven => f.write_str("Q.E.D."),
            Verdict::Falsified(m) if m.is_empty() => f.write_str("Falsifiable."),
            Verdict::Falsified(m) => write!(f, "Falsifiable. Counter-example:\n{m}"),
            Verdict::Unknown(reason) => write!(f, "Unknown: {reason}"),
            Verdict::Optimum { objective, value, model } => {
                write!(f, "Optimal model:\n  {objective} = {value} :: Int64")?;
                if !model.is_empty() {
                    write!(f, "\n{model}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SmtError {
    /// The solver's model does not do what the solver claims it does.
    #[error("internal consistency error: {0}")]
    Inconsistent(String),
}

/// Size and cost of one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub terms: usize,
    pub assertions: usize,
    pub solver_calls: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub verdict: Verdict,
    pub stats: QueryStats,
}

/// Result of a plain satisfiability check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sat {
    Sat(Model),
    Unsat,
    Unknown(String),
}

/// Substitutes `model` into `term` and folds it.
pub fn evaluate_model(model: &Model, term: &SymValue) -> Result<u64, EvalError> {
    term.evaluate(model)
}

/// Runs `script` and reads back the answer and, when satisfiable, a model
/// covering every declared variable. Variables the solver leaves out are
/// unconstrained and default to zero.
pub fn check_script(solver: &Solver, script: &SmtScript) -> Sat {
    let out = match solver.run(&script.text) {
        Ok(out) => out,
        Err(e) => return Sat::Unknown(e.to_string()),
    };
    interpret(&out, script)
}

/// Checks satisfiability of the conjunction of `assertions`.
pub fn check(solver: &Solver, assertions: &[SymValue]) -> Sat {
    check_script(solver, &lower(assertions))
}

fn interpret(out: &str, script: &SmtScript) -> Sat {
    let items = match parse_all(out) {
        Ok(items) => items,
        Err(e) => return Sat::Unknown(format!("unparseable solver output ({}): {}", e.0, out.trim())),
    };
    let mut iter = items.iter();
    let answer = iter.find(|s| s.atom().is_some() || is_error(s));
    match answer {
        Some(Sexp::Atom(a)) if a == "unsat" => Sat::Unsat,
        Some(Sexp::Atom(a)) if a == "sat" => {
            let defs = iter.find_map(|s| s.list()).unwrap_or(&[]);
            let mut model = read_model(defs, script);
            if !script.selects.is_empty() {
                let values = iter.find_map(|s| s.list()).unwrap_or(&[]);
                read_cells(&mut model, values, script);
            }
            Sat::Sat(model)
        }
        Some(Sexp::Atom(a)) if a == "unknown" => Sat::Unknown("solver returned unknown".into()),
        Some(other) => Sat::Unknown(format!("solver error: {other}")),
        None => Sat::Unknown("solver produced no answer".into()),
    }
}

fn is_error(s: &Sexp) -> bool {
    matches!(s.list(), Some([Sexp::Atom(head), ..]) if head == "error")
}

fn read_model(defs: &[Sexp], script: &SmtScript) -> Model {
    let mut found: BTreeMap<&str, &Sexp> = BTreeMap::new();
    for d in defs {
        if let Some([Sexp::Atom(kw), Sexp::Atom(name), _params, _sort, value]) = d.list() {
            if kw == "define-fun" {
                found.insert(name.as_str(), value);
            }
        }
    }
    let mut model = Model::new();
    for (name, sort) in &script.declarations {
        let bits = found.get(name.as_str()).and_then(|v| literal(v, sort.width())).unwrap_or(0);
        model.insert(name, *sort, bits);
    }
    model
}

/// Reads a `(get-value ...)` answer of `(read value) (index value)` pairs in
/// the order the script requested them.
fn read_cells(model: &mut Model, pairs: &[Sexp], script: &SmtScript) {
    let value = |s: &Sexp, width: u32| match s.list() {
        Some([_, v]) => literal(v, width),
        _ => None,
    };
    for ((array, sort), pair) in script.selects.iter().zip(pairs.chunks(2)) {
        let Some(index_width) = script.arrays.iter().find(|a| *a.name == **array).map(|a| a.index.width()) else {
            continue;
        };
        if let [read, index] = pair {
            if let (Some(v), Some(i)) = (value(read, sort.width()), value(index, index_width)) {
                model.insert_cell(array, i, v);
            }
        }
    }
}

fn all_true(model: &Model, terms: &[SymValue]) -> Result<bool, SmtError> {
    for t in terms {
        let v = evaluate_model(model, t).map_err(|e| SmtError::Inconsistent(e.to_string()))?;
        if v == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Proves `hypotheses ⟹ goal` for all values of the free variables.
pub fn prove(solver: &Solver, goal: &SymValue, hypotheses: &[SymValue]) -> Result<Outcome, SmtError> {
    assert_eq!(goal.sort(), Sort::Bool, "goal must be boolean");
    let start = Instant::now();
    let mut assertions = hypotheses.to_vec();
    assertions.push(goal.not());
    let script = lower(&assertions);
    let verdict = match check_script(solver, &script) {
        Sat::Unsat => Verdict::Proven,
        Sat::Unknown(reason) => Verdict::Unknown(reason),
        Sat::Sat(model) => {
            if !all_true(&model, hypotheses)? {
                return Err(SmtError::Inconsistent(format!("model violates the hypotheses:\n{model}")));
            }
            if evaluate_model(&model, goal).map_err(|e| SmtError::Inconsistent(e.to_string()))? != 0 {
                return Err(SmtError::Inconsistent(format!("model satisfies the goal:\n{model}")));
            }
            Verdict::Falsified(model)
        }
    };
    Ok(Outcome { verdict, stats: stats(&script, 1, start) })
}

fn stats(script: &SmtScript, solver_calls: usize, start: Instant) -> QueryStats {
    QueryStats {
        terms: script.term_count(),
        assertions: script.assertions,
        solver_calls,
        elapsed: start.elapsed(),
    }
}

/// Finds the least (or greatest) signed value of `objective` over all
/// assignments satisfying `hypotheses`. Uses the solver's native
/// optimization when available, binary search otherwise.
pub fn optimize(
    solver: &Solver,
    name: &str,
    objective: &SymValue,
    direction: Direction,
    hypotheses: &[SymValue],
) -> Result<Outcome, SmtError> {
    if solver.optimization {
        optimize_native(solver, name, objective, direction, hypotheses)
    } else {
        optimize_by_search(solver, name, objective, direction, hypotheses)
    }
}

fn signed_value(model: &Model, objective: &SymValue) -> Result<i64, SmtError> {
    let bits = evaluate_model(model, objective).map_err(|e| SmtError::Inconsistent(e.to_string()))?;
    Ok(signed(bits, objective.sort().width()))
}

fn check_objective_sort(objective: &SymValue) {
    assert!(matches!(objective.sort(), Sort::Bv(_)), "objective must be a bitvector");
}

pub fn optimize_native(
    solver: &Solver,
    name: &str,
    objective: &SymValue,
    direction: Direction,
    hypotheses: &[SymValue],
) -> Result<Outcome, SmtError> {
    check_objective_sort(objective);
    let start = Instant::now();
    // Solvers order bitvector objectives as unsigned; flipping the sign bit
    // makes that order agree with the signed one.
    let width = objective.sort().width();
    let sign = SymValue::constant(objective.sort(), 1u64 << (width - 1));
    let biased = objective.binary(Op::Xor, &sign);
    let script = lower_query(hypotheses, Some((direction, &biased)));
    let out = match solver.run(&script.text) {
        Ok(out) => out,
        Err(e) => {
            return Ok(Outcome { verdict: Verdict::Unknown(e.to_string()), stats: stats(&script, 1, start) })
        }
    };
    if out.split_whitespace().any(|w| w.trim_matches(|c| c == '(' || c == ')') == "oo") {
        return Ok(Outcome { verdict: Verdict::Unknown("unbounded".into()), stats: stats(&script, 1, start) });
    }
    let verdict = match interpret(&out, &script) {
        Sat::Unsat => Verdict::Unknown("infeasible: hypotheses are unsatisfiable".into()),
        Sat::Unknown(reason) => Verdict::Unknown(reason),
        Sat::Sat(model) => {
            if !all_true(&model, hypotheses)? {
                return Err(SmtError::Inconsistent(format!("optimal model violates the hypotheses:\n{model}")));
            }
            let value = signed_value(&model, objective)?;
            Verdict::Optimum { objective: name.to_string(), value, model }
        }
    };
    Ok(Outcome { verdict, stats: stats(&script, 1, start) })
}

const MAX_SEARCH_CALLS: usize = 2 * 64 + 2;

/// Optimization by repeated satisfiability checks: doubling steps away from
/// the first feasible model, then bisection. Each phase needs at most one
/// call per bit of the objective.
pub fn optimize_by_search(
    solver: &Solver,
    name: &str,
    objective: &SymValue,
    direction: Direction,
    hypotheses: &[SymValue],
) -> Result<Outcome, SmtError> {
    check_objective_sort(objective);
    let start = Instant::now();
    let width = objective.sort().width();
    let min = signed(1u64 << (width - 1), width) as i128;
    let max = -min - 1;
    let first = lower(hypotheses);
    let mut calls = 1;
    let mut best = match check_script(solver, &first) {
        Sat::Sat(m) => m,
        Sat::Unsat => {
            return Ok(Outcome {
                verdict: Verdict::Unknown("infeasible: hypotheses are unsatisfiable".into()),
                stats: stats(&first, calls, start),
            })
        }
        Sat::Unknown(reason) => return Ok(Outcome { verdict: Verdict::Unknown(reason), stats: stats(&first, calls, start) }),
    };
    let mut value = signed_value(&best, objective)? as i128;
    let (mut lo, mut hi) = match direction {
        Direction::Minimize => (min, value),
        Direction::Maximize => (value, max),
    };
    let bound = |v: i128| SymValue::constant(objective.sort(), v as u64);
    let mut last = first;
    // Gallop away from the incumbent in doubling steps until a probe fails,
    // then bisect the remaining gap. Optima near the first model cost a few
    // calls instead of one per bit.
    let mut step: i128 = 1;
    let mut galloping = true;
    while lo < hi {
        if calls > MAX_SEARCH_CALLS {
            return Ok(Outcome {
                verdict: Verdict::Unknown("binary search did not converge".into()),
                stats: stats(&last, calls, start),
            });
        }
        let (mid, probe) = match direction {
            Direction::Minimize => {
                let mid = if galloping { (hi - step).max(lo) } else { lo + (hi - lo) / 2 };
                (mid, objective.binary(Op::Sgt, &bound(mid)).not())
            }
            Direction::Maximize => {
                let mid = if galloping { (lo + step).min(hi) } else { lo + (hi - lo + 1) / 2 };
                (mid, objective.binary(Op::Slt, &bound(mid)).not())
            }
        };
        let mut assertions = hypotheses.to_vec();
        assertions.push(probe);
        last = lower(&assertions);
        calls += 1;
        match check_script(solver, &last) {
            Sat::Sat(m) => {
                if !all_true(&m, hypotheses)? {
                    return Err(SmtError::Inconsistent(format!("model violates the hypotheses:\n{m}")));
                }
                value = signed_value(&m, objective)? as i128;
                best = m;
                match direction {
                    Direction::Minimize => hi = value,
                    Direction::Maximize => lo = value,
                }
                step *= 2;
            }
            Sat::Unsat => {
                galloping = false;
                match direction {
                    Direction::Minimize => lo = mid + 1,
                    Direction::Maximize => hi = mid - 1,
                }
            }
            Sat::Unknown(reason) => {
                return Ok(Outcome { verdict: Verdict::Unknown(reason), stats: stats(&last, calls, start) })
            }
        }
    }
    Ok(Outcome {
        verdict: Verdict::Optimum { objective: name.to_string(), value: value as i64, model: best },
        stats: stats(&last, calls, start),
    })
}
