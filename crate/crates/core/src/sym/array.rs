use std::fmt;
use std::sync::Arc;

use super::{ArrayVar, Op, Sort, SymValue};

/// What an array holds before any store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArrayBase {
    /// Every cell holds the given constant.
    Const(SymValue),
    /// An uninterpreted array.
    Var(ArrayVar),
}

struct Store {
    index: SymValue,
    value: SymValue,
    prev: Option<Arc<Store>>,
}

/// A functional array: a base plus a persistent chain of stores, newest
/// first. Cloning is O(1) and stores share their prefix.
#[derive(Clone)]
pub struct SymArray {
    base: ArrayBase,
    index: Sort,
    value: Sort,
    head: Option<Arc<Store>>,
    len: usize,
}

impl SymArray {
    pub fn constant(index: Sort, default: SymValue) -> SymArray {
        let value = default.sort();
        SymArray { base: ArrayBase::Const(default), index, value, head: None, len: 0 }
    }

    pub fn var(array: ArrayVar) -> SymArray {
        let (index, value) = (array.index, array.value);
        SymArray { base: ArrayBase::Var(array), index, value, head: None, len: 0 }
    }

    pub fn base(&self) -> &ArrayBase {
        &self.base
    }

    pub fn index_sort(&self) -> Sort {
        self.index
    }

    pub fn value_sort(&self) -> Sort {
        self.value
    }

    /// Number of stores on top of the base.
    pub fn stores(&self) -> usize {
        self.len
    }

    /// Stores in write order, oldest first.
    pub fn store_chain(&self) -> Vec<(SymValue, SymValue)> {
        let mut out = Vec::with_capacity(self.len);
        let mut cur = self.head.as_deref();
        while let Some(s) = cur {
            out.push((s.index.clone(), s.value.clone()));
            cur = s.prev.as_deref();
        }
        out.reverse();
        out
    }

    pub fn store(&self, index: &SymValue, value: &SymValue) -> SymArray {
        assert_eq!(index.sort(), self.index, "array index sort");
        assert_eq!(value.sort(), self.value, "array value sort");
        SymArray {
            base: self.base.clone(),
            index: self.index,
            value: self.value,
            head: Some(Arc::new(Store { index: index.clone(), value: value.clone(), prev: self.head.clone() })),
            len: self.len + 1,
        }
    }

    /// Reads cell `index`. Concrete indices resolve through the store chain;
    /// a symbolic comparison becomes an `ite` over the remaining chain.
    pub fn read(&self, index: &SymValue) -> SymValue {
        assert_eq!(index.sort(), self.index, "array index sort");
        let mut pending: Vec<(SymValue, SymValue)> = Vec::new();
        let mut cur = self.head.as_deref();
        let mut hit = None;
        while let Some(s) = cur {
            let same = index.eq_to(&s.index);
            match same.as_bool() {
                Some(true) => {
                    hit = Some(s.value.clone());
                    break;
                }
                Some(false) => {}
                None => pending.push((same, s.value.clone())),
            }
            cur = s.prev.as_deref();
        }
        let mut acc = hit.unwrap_or_else(|| self.base_read(index));
        for (cond, value) in pending.into_iter().rev() {
            acc = SymValue::ite(&cond, &value, &acc);
        }
        acc
    }

    fn base_read(&self, index: &SymValue) -> SymValue {
        match &self.base {
            ArrayBase::Const(v) => v.clone(),
            ArrayBase::Var(a) => SymValue::select(a, index).expect("index sort checked"),
        }
    }

    fn ptr_eq(a: &Option<Arc<Store>>, b: &Option<Arc<Store>>) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => Arc::ptr_eq(x, y),
            _ => false,
        }
    }

    /// `ite(cond, then, else)` cell by cell. Both arrays must share a base;
    /// stores past their common prefix are replayed as conditional stores.
    pub fn merge(cond: &SymValue, then: &SymArray, els: &SymArray) -> Option<SymArray> {
        if then.base != els.base || then.index != els.index || then.value != els.value {
            return None;
        }
        match cond.as_bool() {
            Some(true) => return Some(then.clone()),
            Some(false) => return Some(els.clone()),
            None => {}
        }
        if SymArray::ptr_eq(&then.head, &els.head) {
            return Some(then.clone());
        }
        let (mut t, mut e) = (then.head.clone(), els.head.clone());
        let (mut tl, mut el) = (then.len, els.len);
        let mut then_suffix = Vec::new();
        let mut else_suffix = Vec::new();
        while tl > el {
            let s = t.expect("chain length");
            then_suffix.push((s.index.clone(), s.value.clone()));
            t = s.prev.clone();
            tl -= 1;
        }
        while el > tl {
            let s = e.expect("chain length");
            else_suffix.push((s.index.clone(), s.value.clone()));
            e = s.prev.clone();
            el -= 1;
        }
        while !SymArray::ptr_eq(&t, &e) {
            let (ts, es) = (t.expect("chain length"), e.expect("chain length"));
            then_suffix.push((ts.index.clone(), ts.value.clone()));
            else_suffix.push((es.index.clone(), es.value.clone()));
            t = ts.prev.clone();
            e = es.prev.clone();
            tl -= 1;
        }
        let mut merged =
            SymArray { base: then.base.clone(), index: then.index, value: then.value, head: t, len: tl };
        // While replaying the then-stores, `merged` equals the else side
        // whenever `cond` is false; afterwards it equals the then side
        // whenever `cond` is true. Either way each conditional store keeps the
        // other side intact.
        for (i, v) in then_suffix.into_iter().rev() {
            let old = merged.read(&i);
            merged = merged.store(&i, &SymValue::ite(cond, &v, &old));
        }
        for (i, v) in else_suffix.into_iter().rev() {
            let old = merged.read(&i);
            merged = merged.store(&i, &SymValue::ite(cond, &old, &v));
        }
        Some(merged)
    }

    /// True when both arrays are the same value syntactically.
    pub fn same_as(&self, other: &SymArray) -> bool {
        self.base == other.base && SymArray::ptr_eq(&self.head, &other.head)
    }
}

impl fmt::Debug for SymArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymArray({:?}", self.base)?;
        for (i, v) in self.store_chain() {
            write!(f, " [{i:?}] := {v:?}")?;
        }
        write!(f, ")")
    }
}

impl SymValue {
    /// `self == k` for a constant `k` of the same sort.
    pub fn is_value(&self, k: u64) -> SymValue {
        self.binary(Op::Eq, &SymValue::constant(self.sort(), k))
    }
}
