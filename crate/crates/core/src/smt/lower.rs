use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::sym::{post_order, ArrayVar, Kind, Op, Sort, SymValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Logic {
    QfBv,
    QfAbv,
}

impl Logic {
    pub fn name(self) -> &'static str {
        match self {
            Logic::QfBv => "QF_BV",
            Logic::QfAbv => "QF_ABV",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    fn command(self) -> &'static str {
        match self {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        }
    }
}

/// A complete SMT-LIB 2 query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmtScript {
    pub logic: Logic,
    /// Declared constants by name, with their sorts.
    pub declarations: BTreeMap<String, Sort>,
    pub arrays: Vec<ArrayVar>,
    /// Shared interior nodes emitted as named definitions.
    pub definitions: usize,
    pub assertions: usize,
    /// Array reads whose values are requested after the model, as
    /// `(array, element sort)` in request order.
    pub selects: Vec<(String, Sort)>,
    pub text: String,
}

impl SmtScript {
    /// Total distinct terms in the lowered DAG, a rough size measure.
    pub fn term_count(&self) -> usize {
        self.definitions + self.declarations.len()
    }
}

/// Lowers a conjunction of boolean assertions to a satisfiability query that
/// ends in `(check-sat)` and `(get-model)`, followed by a `(get-value ...)`
/// for every array read and its index.
pub fn lower(assertions: &[SymValue]) -> SmtScript {
    lower_query(assertions, None)
}

/// Like [`lower`], with an optimization objective before `(check-sat)`.
pub fn lower_query(assertions: &[SymValue], objective: Option<(Direction, &SymValue)>) -> SmtScript {
    for a in assertions {
        assert_eq!(a.sort(), Sort::Bool, "assertions must be boolean");
    }
    let mut roots: Vec<SymValue> = assertions.to_vec();
    if let Some((_, obj)) = objective {
        roots.push(obj.clone());
    }
    let nodes = post_order(&roots);

    let mut declarations = BTreeMap::new();
    let mut arrays: BTreeMap<String, ArrayVar> = BTreeMap::new();
    for n in &nodes {
        match n.kind() {
            Kind::Var(name) => {
                declarations.insert(name.to_string(), n.sort());
            }
            Kind::Select(array, _) => {
                arrays.insert(array.name.to_string(), array.clone());
            }
            _ => {}
        }
    }
    let logic = if arrays.is_empty() { Logic::QfBv } else { Logic::QfAbv };

    let mut text = String::new();
    text.push_str("(set-option :produce-models true)\n");
    let _ = writeln!(text, "(set-logic {})", logic.name());
    for (name, sort) in &declarations {
        let _ = writeln!(text, "(declare-const {} {})", quote(name), sort_text(*sort));
    }
    for a in arrays.values() {
        let _ = writeln!(
            text,
            "(declare-const {} (Array {} {}))",
            quote(&a.name),
            sort_text(a.index),
            sort_text(a.value)
        );
    }

    let mut names: HashMap<u64, String> = HashMap::new();
    let mut definitions = 0;
    let mut selects = Vec::new();
    let mut requests = Vec::new();
    for n in &nodes {
        if matches!(n.kind(), Kind::App(..) | Kind::Select(..)) {
            let name = format!("%{definitions}");
            let body = application(n, &names);
            let _ = writeln!(text, "(define-fun {name} () {} {body})", sort_text(n.sort()));
            if let Kind::Select(array, index) = n.kind() {
                selects.push((array.name.to_string(), n.sort()));
                requests.push(format!("{name} {}", reference(index, &names)));
            }
            names.insert(n.id(), name);
            definitions += 1;
        }
    }

    for a in assertions {
        let _ = writeln!(text, "(assert {})", reference(a, &names));
    }
    if let Some((direction, obj)) = objective {
        let _ = writeln!(text, "({} {})", direction.command(), reference(obj, &names));
    }
    text.push_str("(check-sat)\n(get-model)\n");
    if !requests.is_empty() {
        let _ = writeln!(text, "(get-value ({}))", requests.join(" "));
    }

    SmtScript {
        logic,
        declarations,
        arrays: arrays.into_values().collect(),
        definitions,
        assertions: assertions.len(),
        selects,
        text,
    }
}

fn quote(name: &str) -> String {
    format!("|{name}|")
}

pub(crate) fn sort_text(sort: Sort) -> String {
    match sort {
        Sort::Bool => "Bool".to_string(),
        Sort::Bv(w) => format!("(_ BitVec {w})"),
    }
}

fn constant(sort: Sort, bits: u64) -> String {
    match sort {
        Sort::Bool => if bits != 0 { "true" } else { "false" }.to_string(),
        Sort::Bv(w) if w % 4 == 0 => format!("#x{:0width$x}", bits, width = (w / 4) as usize),
        Sort::Bv(w) => format!("#b{:0width$b}", bits, width = w as usize),
    }
}

fn reference(n: &SymValue, names: &HashMap<u64, String>) -> String {
    match n.kind() {
        Kind::Const(bits) => constant(n.sort(), *bits),
        Kind::Var(name) => quote(name),
        _ => names[&n.id()].clone(),
    }
}

fn application(n: &SymValue, names: &HashMap<u64, String>) -> String {
    let arg = |i: usize| reference(&n.children()[i], names);
    match n.kind() {
        Kind::Select(array, _) => format!("(select {} {})", quote(&array.name), arg(0)),
        Kind::App(op, args) => {
            let boolean = args[0].sort() == Sort::Bool;
            let head = match op {
                Op::Neg => "bvneg".to_string(),
                Op::Not if boolean => "not".to_string(),
                Op::Not => "bvnot".to_string(),
                Op::And if boolean => "and".to_string(),
                Op::And => "bvand".to_string(),
                Op::Or if boolean => "or".to_string(),
                Op::Or => "bvor".to_string(),
                Op::Xor if boolean => "xor".to_string(),
                Op::Xor => "bvxor".to_string(),
                Op::Add => "bvadd".to_string(),
                Op::Sub => "bvsub".to_string(),
                Op::Mul => "bvmul".to_string(),
                Op::SDiv => "bvsdiv".to_string(),
                Op::Shl => "bvshl".to_string(),
                Op::LShr => "bvlshr".to_string(),
                Op::AShr => "bvashr".to_string(),
                Op::Eq => "=".to_string(),
                Op::Slt => "bvslt".to_string(),
                Op::Sgt => "bvsgt".to_string(),
                Op::Ult => "bvult".to_string(),
                Op::Ite => "ite".to_string(),
                Op::ZeroExt(k) => format!("(_ zero_extend {k})"),
                Op::SignExt(k) => format!("(_ sign_extend {k})"),
                Op::Extract(hi, lo) => format!("(_ extract {hi} {lo})"),
            };
            let operands: Vec<String> = (0..args.len()).map(arg).collect();
            format!("({head} {})", operands.join(" "))
        }
        Kind::Const(_) | Kind::Var(_) => unreachable!("leaves are referenced inline"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_print_in_hex_or_binary() {
        assert_eq!(constant(Sort::WORD, 1), "#x0000000000000001");
        assert_eq!(constant(Sort::ADDR, 0xfe), "#xfe");
        assert_eq!(constant(Sort::Bv(2), 2), "#b10");
        assert_eq!(constant(Sort::Bool, 1), "true");
    }

    #[test]
    fn shared_nodes_defined_once() {
        let x = SymValue::var("lower_tests_x", Sort::WORD);
        let s = x.binary(Op::Add, &SymValue::word(1));
        let sq = s.binary(Op::Mul, &s);
        let goal = sq.eq_to(&sq.binary(Op::Add, &s));
        let script = lower(&[goal]);
        assert_eq!(script.logic, Logic::QfBv);
        assert_eq!(script.definitions, 4);
        assert_eq!(script.text.matches("bvadd |lower_tests_x|").count(), 1);
        assert!(script.text.contains("(declare-const |lower_tests_x| (_ BitVec 64))"));
        assert!(script.text.ends_with("(assert %3)\n(check-sat)\n(get-model)\n"));
    }

    #[test]
    fn selects_switch_logic() {
        let a = ArrayVar { name: "lower_tests_m".into(), index: Sort::ADDR, value: Sort::WORD };
        let i = SymValue::var("lower_tests_i", Sort::ADDR);
        let r = SymValue::select(&a, &i).unwrap();
        let script = lower(&[r.eq_to(&SymValue::word(0))]);
        assert_eq!(script.logic, Logic::QfAbv);
        assert!(script.text.contains("(declare-const |lower_tests_m| (Array (_ BitVec 8) (_ BitVec 64)))"));
        assert!(script.text.contains("(select |lower_tests_m| |lower_tests_i|)"));
    }
}
