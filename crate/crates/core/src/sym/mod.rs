//! Symbolic values: a hash-consed, constant-folding expression DAG over
//! booleans and fixed-width bitvectors, plus functional arrays.
//!
//! Structurally equal terms are the same allocation, so equality of
//! [`SymValue`]s is pointer equality and sharing is preserved all the way to
//! the SMT script. The only simplifications are constant folding, `ite` with a
//! constant condition and `ite` with identical branches.

mod array;
mod eval;
mod symbolic;
mod vars;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, Weak};

use thiserror::Error;

use crate::domain::{eval_cmp, eval_word_op, Cmp, WordOp};

pub use array::{ArrayBase, SymArray};
pub use eval::{EvalError, Valuation};
pub use symbolic::Symbolic;
pub use vars::{DuplicateVar, SymbolTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    /// Bitvector of the given width, 1 to 64 bits.
    Bv(u32),
}

impl Sort {
    pub const WORD: Sort = Sort::Bv(64);
    pub const ADDR: Sort = Sort::Bv(8);
    pub const CODE: Sort = Sort::Bv(16);

    pub fn width(self) -> u32 {
        match self {
            Sort::Bool => 1,
            Sort::Bv(w) => w,
        }
    }

    fn mask(self) -> u64 {
        mask(self.width())
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => f.write_str("Bool"),
            Sort::Bv(w) => write!(f, "(_ BitVec {w})"),
        }
    }
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Sign-extends the low `width` bits of `bits`.
pub fn signed(bits: u64, width: u32) -> i64 {
    let shift = 64 - width;
    ((bits << shift) as i64) >> shift
}

/// Operators of the DAG.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Neg,
    /// Boolean negation or bitwise complement.
    Not,
    Add,
    Sub,
    Mul,
    SDiv,
    /// Conjunction or bitwise and; likewise `Or` and `Xor`.
    And,
    Or,
    Xor,
    Shl,
    LShr,
    AShr,
    Eq,
    Slt,
    Sgt,
    Ult,
    Ite,
    ZeroExt(u32),
    SignExt(u32),
    /// `Extract(hi, lo)`, inclusive bounds.
    Extract(u32, u32),
}

impl From<WordOp> for Op {
    fn from(op: WordOp) -> Op {
        match op {
            WordOp::Add => Op::Add,
            WordOp::Sub => Op::Sub,
            WordOp::Mul => Op::Mul,
            WordOp::SDiv => Op::SDiv,
            WordOp::And => Op::And,
            WordOp::Or => Op::Or,
            WordOp::Xor => Op::Xor,
            WordOp::Shl => Op::Shl,
            WordOp::LShr => Op::LShr,
            WordOp::AShr => Op::AShr,
        }
    }
}

impl From<Cmp> for Op {
    fn from(op: Cmp) -> Op {
        match op {
            Cmp::Eq => Op::Eq,
            Cmp::Slt => Op::Slt,
            Cmp::Sgt => Op::Sgt,
            Cmp::Ult => Op::Ult,
        }
    }
}

/// An uninterpreted array constant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrayVar {
    pub name: Arc<str>,
    pub index: Sort,
    pub value: Sort,
}

#[derive(Debug)]
pub enum Kind {
    Const(u64),
    Var(Arc<str>),
    App(Op, Vec<SymValue>),
    /// `select` on an uninterpreted array.
    Select(ArrayVar, SymValue),
}

pub struct Node {
    id: u64,
    sort: Sort,
    kind: Kind,
}

/// Handle to an interned DAG node.
#[derive(Clone)]
pub struct SymValue(Arc<Node>);

impl PartialEq for SymValue {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for SymValue {}

impl Hash for SymValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}

impl PartialOrd for SymValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SymValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.id.cmp(&other.0.id)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SortError {
    #[error("{op:?} expects {expected} operands, got {got}")]
    Arity { op: Op, expected: usize, got: usize },
    #[error("{op:?} cannot be applied to operands of sorts {sorts:?}")]
    Mismatch { op: Op, sorts: Vec<Sort> },
}

#[derive(PartialEq, Eq, Hash)]
enum Key {
    Const(Sort, u64),
    Var(Sort, Arc<str>),
    App(Op, Vec<u64>),
    Select(ArrayVar, u64),
}

struct Interner {
    table: HashMap<Key, Weak<Node>>,
    purge_at: usize,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn interner() -> &'static Mutex<Interner> {
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| Mutex::new(Interner { table: HashMap::new(), purge_at: 1 << 16 }))
}

fn intern(key: Key, sort: Sort, make: impl FnOnce() -> Kind) -> SymValue {
    let mut guard = interner().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(node) = guard.table.get(&key).and_then(Weak::upgrade) {
        return SymValue(node);
    }
    if guard.table.len() >= guard.purge_at {
        guard.table.retain(|_, w| w.strong_count() > 0);
        guard.purge_at = (guard.table.len() * 2).max(1 << 16);
    }
    let node = Arc::new(Node { id: NEXT_ID.fetch_add(1, Ordering::Relaxed), sort, kind: make() });
    guard.table.insert(key, Arc::downgrade(&node));
    SymValue(node)
}

/// Number of live interned nodes (approximate: dead entries are purged lazily).
pub fn live_nodes() -> usize {
    let guard = interner().lock().unwrap_or_else(|e| e.into_inner());
    guard.table.values().filter(|w| w.strong_count() > 0).count()
}

impl SymValue {
    pub fn constant(sort: Sort, bits: u64) -> SymValue {
        let bits = bits & sort.mask();
        intern(Key::Const(sort, bits), sort, || Kind::Const(bits))
    }

    pub fn bool(b: bool) -> SymValue {
        SymValue::constant(Sort::Bool, b as u64)
    }

    pub fn word(v: i64) -> SymValue {
        SymValue::constant(Sort::WORD, v as u64)
    }

    /// A free variable. Two calls with the same name and sort return the
    /// same node; use a [`SymbolTable`] to reject duplicates within a query.
    pub fn var(name: &str, sort: Sort) -> SymValue {
        let name: Arc<str> = Arc::from(name);
        intern(Key::Var(sort, name.clone()), sort, || Kind::Var(name))
    }

    pub fn select(array: &ArrayVar, index: &SymValue) -> Result<SymValue, SortError> {
        if index.sort() != array.index {
            return Err(SortError::Mismatch { op: Op::Eq, sorts: vec![array.index, index.sort()] });
        }
        let index = index.clone();
        Ok(intern(Key::Select(array.clone(), index.id()), array.value, || {
            Kind::Select(array.clone(), index)
        }))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn sort(&self) -> Sort {
        self.0.sort
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.0.kind {
            Kind::Const(bits) => Some(bits),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.sort() {
            Sort::Bool => self.as_const().map(|b| b != 0),
            Sort::Bv(_) => None,
        }
    }

    /// Signed value of a constant bitvector.
    pub fn as_i64(&self) -> Option<i64> {
        match self.sort() {
            Sort::Bv(w) => self.as_const().map(|b| signed(b, w)),
            Sort::Bool => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.as_const().is_some()
    }

    pub fn children(&self) -> &[SymValue] {
        match &self.0.kind {
            Kind::App(_, args) => args,
            Kind::Select(_, index) => std::slice::from_ref(index),
            Kind::Const(_) | Kind::Var(_) => &[],
        }
    }

    /// Number of distinct nodes reachable from `self`.
    pub fn dag_size(&self) -> usize {
        post_order(std::slice::from_ref(self)).len()
    }

    /// Names and sorts of the free variables in `self`, ordered by name.
    pub fn free_vars(&self) -> Vec<(Arc<str>, Sort)> {
        let mut vars: Vec<_> = post_order(std::slice::from_ref(self))
            .into_iter()
            .filter_map(|n| match n.kind() {
                Kind::Var(name) => Some((name.clone(), n.sort())),
                _ => None,
            })
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }

    // Infallible helpers for callers that build well-sorted terms by
    // construction.

    fn app(op: Op, args: &[&SymValue]) -> SymValue {
        let args: Vec<SymValue> = args.iter().map(|a| (*a).clone()).collect();
        apply(op, &args).unwrap_or_else(|e| panic!("ill-sorted term: {e}"))
    }

    pub fn not(&self) -> SymValue {
        SymValue::app(Op::Not, &[self])
    }
    pub fn neg(&self) -> SymValue {
        SymValue::app(Op::Neg, &[self])
    }
    pub fn and(&self, o: &SymValue) -> SymValue {
        SymValue::app(Op::And, &[self, o])
    }
    pub fn or(&self, o: &SymValue) -> SymValue {
        SymValue::app(Op::Or, &[self, o])
    }
    pub fn binary(&self, op: Op, o: &SymValue) -> SymValue {
        SymValue::app(op, &[self, o])
    }
    pub fn eq_to(&self, o: &SymValue) -> SymValue {
        SymValue::app(Op::Eq, &[self, o])
    }
    pub fn ite(c: &SymValue, t: &SymValue, e: &SymValue) -> SymValue {
        SymValue::app(Op::Ite, &[c, t, e])
    }
    pub fn extract(&self, hi: u32, lo: u32) -> SymValue {
        SymValue::app(Op::Extract(hi, lo), &[self])
    }
}

impl fmt::Debug for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Const(bits) => match self.sort() {
                Sort::Bool => write!(f, "{}", *bits != 0),
                Sort::Bv(w) => write!(f, "{}:{w}", signed(*bits, w)),
            },
            Kind::Var(name) => write!(f, "{name}"),
            Kind::Select(a, i) => write!(f, "(select {} {i:?})", a.name),
            Kind::App(op, args) => {
                write!(f, "({op:?}")?;
                for a in args {
                    write!(f, " {a:?}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Result sort of `op` applied to operands of `sorts`.
pub fn result_sort(op: Op, sorts: &[Sort]) -> Result<Sort, SortError> {
    let arity = match op {
        Op::Neg | Op::Not | Op::ZeroExt(_) | Op::SignExt(_) | Op::Extract(..) => 1,
        Op::Ite => 3,
        _ => 2,
    };
    if sorts.len() != arity {
        return Err(SortError::Arity { op, expected: arity, got: sorts.len() });
    }
    let mismatch = || SortError::Mismatch { op, sorts: sorts.to_vec() };
    let bv = |s: Sort| matches!(s, Sort::Bv(_));
    match op {
        Op::Neg if bv(sorts[0]) => Ok(sorts[0]),
        Op::Not => Ok(sorts[0]),
        Op::And | Op::Or | Op::Xor if sorts[0] == sorts[1] => Ok(sorts[0]),
        Op::Add | Op::Sub | Op::Mul | Op::SDiv | Op::Shl | Op::LShr | Op::AShr
            if bv(sorts[0]) && sorts[0] == sorts[1] =>
        {
            Ok(sorts[0])
        }
        Op::Eq if sorts[0] == sorts[1] => Ok(Sort::Bool),
        Op::Slt | Op::Sgt | Op::Ult if bv(sorts[0]) && sorts[0] == sorts[1] => Ok(Sort::Bool),
        Op::Ite if sorts[0] == Sort::Bool && sorts[1] == sorts[2] => Ok(sorts[1]),
        Op::ZeroExt(k) | Op::SignExt(k) if bv(sorts[0]) && sorts[0].width() + k <= 64 => {
            Ok(Sort::Bv(sorts[0].width() + k))
        }
        Op::Extract(hi, lo) if bv(sorts[0]) && lo <= hi && hi < sorts[0].width() => Ok(Sort::Bv(hi - lo + 1)),
        _ => Err(mismatch()),
    }
}

/// Evaluates `op` on constant operands. `sorts` are the operand sorts and
/// `bits` their values, masked to width.
pub fn fold(op: Op, sorts: &[Sort], bits: &[u64]) -> u64 {
    let w = sorts[0].width();
    let s = |i: usize| signed(bits[i], sorts[i].width());
    let out = match op {
        Op::Not => !bits[0],
        Op::Neg => bits[0].wrapping_neg(),
        Op::And => bits[0] & bits[1],
        Op::Or => bits[0] | bits[1],
        Op::Xor => bits[0] ^ bits[1],
        Op::Add | Op::Sub | Op::Mul | Op::SDiv if w == 64 => {
            let word_op = match op {
                Op::Add => WordOp::Add,
                Op::Sub => WordOp::Sub,
                Op::Mul => WordOp::Mul,
                _ => WordOp::SDiv,
            };
            eval_word_op(word_op, bits[0] as i64, bits[1] as i64) as u64
        }
        Op::Add => bits[0].wrapping_add(bits[1]),
        Op::Sub => bits[0].wrapping_sub(bits[1]),
        Op::Mul => bits[0].wrapping_mul(bits[1]),
        Op::SDiv => {
            let (a, b) = (s(0), s(1));
            match b {
                0 if a < 0 => 1,
                0 => u64::MAX,
                _ => a.wrapping_div(b) as u64,
            }
        }
        Op::Shl => {
            if bits[1] >= w as u64 {
                0
            } else {
                bits[0] << bits[1]
            }
        }
        Op::LShr => {
            if bits[1] >= w as u64 {
                0
            } else {
                bits[0] >> bits[1]
            }
        }
        Op::AShr => (s(0) >> bits[1].min(w as u64 - 1)) as u64,
        Op::Eq => (bits[0] == bits[1]) as u64,
        Op::Slt => eval_cmp(Cmp::Slt, s(0), s(1)) as u64,
        Op::Sgt => eval_cmp(Cmp::Sgt, s(0), s(1)) as u64,
        Op::Ult => (bits[0] < bits[1]) as u64,
        Op::Ite => {
            if bits[0] != 0 {
                bits[1]
            } else {
                bits[2]
            }
        }
        Op::ZeroExt(_) => bits[0],
        Op::SignExt(_) => s(0) as u64,
        Op::Extract(_, lo) => bits[0] >> lo,
    };
    let out_sort = result_sort(op, sorts).expect("fold on well-sorted operands");
    out & out_sort.mask()
}

/// Applies `op` to `args`, folding constants and sharing structure.
pub fn apply(op: Op, args: &[SymValue]) -> Result<SymValue, SortError> {
    let sorts: Vec<Sort> = args.iter().map(SymValue::sort).collect();
    let sort = result_sort(op, &sorts)?;
    if op == Op::Ite {
        if let Some(c) = args[0].as_bool() {
            return Ok(if c { args[1].clone() } else { args[2].clone() });
        }
        if args[1] == args[2] {
            return Ok(args[1].clone());
        }
    }
    if let Some(bits) = args.iter().map(SymValue::as_const).collect::<Option<Vec<u64>>>() {
        return Ok(SymValue::constant(sort, fold(op, &sorts, &bits)));
    }
    let key = Key::App(op, args.iter().map(SymValue::id).collect());
    Ok(intern(key, sort, || Kind::App(op, args.to_vec())))
}

/// Every node reachable from `roots`, children before parents, each once.
/// Iterative so deep terms do not exhaust the stack.
pub fn post_order(roots: &[SymValue]) -> Vec<SymValue> {
    let mut seen = std::collections::HashSet::new();
    let mut order = Vec::new();
    let mut stack: Vec<(SymValue, bool)> = roots.iter().rev().map(|r| (r.clone(), false)).collect();
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            order.push(node);
            continue;
        }
        if !seen.insert(node.id()) {
            continue;
        }
        stack.push((node.clone(), true));
        for child in node.children().iter().rev() {
            if !seen.contains(&child.id()) {
                stack.push((child.clone(), false));
            }
        }
    }
    order
}
