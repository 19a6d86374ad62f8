//! Value domains the machine semantics is generic over.
//!
//! A [`Domain`] supplies the sorts the state is built from (booleans, 64-bit
//! words, 8-bit addresses, 16-bit instruction codes and a 256-cell memory)
//! together with the operations the instruction transformers need. The
//! concrete domain computes with plain integers; the symbolic domain
//! ([`crate::sym::Symbolic`]) builds hash-consed expression DAGs and folds
//! constants with exactly the same scalar semantics as this module.

use std::fmt::Debug;
use std::sync::Arc;

/// Binary word operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WordOp {
    Add,
    Sub,
    Mul,
    /// Truncating signed division with the SMT-LIB `bvsdiv` zero-divisor rule.
    SDiv,
    And,
    Or,
    Xor,
    /// Shifts follow SMT-LIB: an amount of at least the width yields 0 (or
    /// the sign fill for `AShr`). Callers mask the amount themselves.
    Shl,
    LShr,
    AShr,
}

/// Word comparisons producing a boolean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Eq,
    Slt,
    Sgt,
    Ult,
}

/// A family of value sorts and the operations over them.
pub trait Domain: Sized + 'static {
    type Bit: Clone + Debug + PartialEq;
    type Word: Clone + Debug + PartialEq;
    type Addr: Clone + Debug + PartialEq;
    type Code: Clone + Debug + PartialEq;
    type Memory: Clone + Debug;

    fn bit(value: bool) -> Self::Bit;
    fn bit_value(b: &Self::Bit) -> Option<bool>;
    fn not(b: &Self::Bit) -> Self::Bit;
    fn and(a: &Self::Bit, b: &Self::Bit) -> Self::Bit;
    fn or(a: &Self::Bit, b: &Self::Bit) -> Self::Bit;
    fn ite_bit(c: &Self::Bit, t: &Self::Bit, e: &Self::Bit) -> Self::Bit;

    fn word(value: i64) -> Self::Word;
    fn word_value(w: &Self::Word) -> Option<i64>;
    fn word_op(op: WordOp, a: &Self::Word, b: &Self::Word) -> Self::Word;
    fn neg(a: &Self::Word) -> Self::Word;
    fn bitnot(a: &Self::Word) -> Self::Word;
    fn cmp(op: Cmp, a: &Self::Word, b: &Self::Word) -> Self::Bit;
    fn ite_word(c: &Self::Bit, t: &Self::Word, e: &Self::Word) -> Self::Word;

    fn addr(value: u8) -> Self::Addr;
    fn addr_value(a: &Self::Addr) -> Option<u8>;
    /// `a + offset` modulo 256.
    fn addr_offset(a: &Self::Addr, offset: i8) -> Self::Addr;
    /// The low eight bits of a word, used for indirect addressing.
    fn addr_of_word(w: &Self::Word) -> Self::Addr;
    fn addr_is(a: &Self::Addr, value: u8) -> Self::Bit;
    /// Concrete values `a` can take, or `None` when they cannot be bounded
    /// syntactically. May over-approximate.
    fn addr_candidates(a: &Self::Addr) -> Option<Vec<u8>>;
    fn ite_addr(c: &Self::Bit, t: &Self::Addr, e: &Self::Addr) -> Self::Addr;

    fn code(value: u16) -> Self::Code;
    fn code_value(c: &Self::Code) -> Option<u16>;
    fn ite_code(c: &Self::Bit, t: &Self::Code, e: &Self::Code) -> Self::Code;

    /// A memory with `cells` at addresses `0..cells.len()` and zero elsewhere.
    fn memory(cells: &[Self::Word]) -> Self::Memory;
    fn read(m: &Self::Memory, a: &Self::Addr) -> Self::Word;
    fn write(m: &Self::Memory, a: &Self::Addr, v: &Self::Word) -> Self::Memory;
    fn ite_memory(c: &Self::Bit, t: &Self::Memory, e: &Self::Memory) -> Self::Memory;

    // Derived operations shared by every domain.

    fn add(a: &Self::Word, b: &Self::Word) -> Self::Word {
        Self::word_op(WordOp::Add, a, b)
    }

    fn is_negative(a: &Self::Word) -> Self::Bit {
        Self::cmp(Cmp::Slt, a, &Self::word(0))
    }

    /// Two's-complement absolute value; `abs(i64::MIN) = i64::MIN`.
    fn abs(a: &Self::Word) -> Self::Word {
        Self::ite_word(&Self::is_negative(a), &Self::neg(a), a)
    }

    fn bits_equal(a: &Self::Bit, b: &Self::Bit) -> Self::Bit {
        Self::ite_bit(a, b, &Self::not(b))
    }

    /// Signed overflow of `op` on `a` and `b` for `Add`, `Sub` and `Mul`.
    fn overflows(op: WordOp, a: &Self::Word, b: &Self::Word) -> Self::Bit {
        let r = Self::word_op(op, a, b);
        let (na, nb, nr) = (Self::is_negative(a), Self::is_negative(b), Self::is_negative(&r));
        match op {
            WordOp::Add => Self::and(&Self::bits_equal(&na, &nb), &Self::not(&Self::bits_equal(&nr, &na))),
            WordOp::Sub => {
                Self::and(&Self::not(&Self::bits_equal(&na, &nb)), &Self::not(&Self::bits_equal(&nr, &na)))
            }
            WordOp::Mul => {
                // a != 0 && (r / a != b || (a == -1 && b == MIN))
                let a_zero = Self::cmp(Cmp::Eq, a, &Self::word(0));
                let back = Self::word_op(WordOp::SDiv, &r, a);
                let mismatch = Self::not(&Self::cmp(Cmp::Eq, &back, b));
                let corner = Self::and(
                    &Self::cmp(Cmp::Eq, a, &Self::word(-1)),
                    &Self::cmp(Cmp::Eq, b, &Self::word(i64::MIN)),
                );
                Self::and(&Self::not(&a_zero), &Self::or(&mismatch, &corner))
            }
            _ => Self::bit(false),
        }
    }
}

/// Scalar semantics of [`WordOp`] on 64-bit words.
pub fn eval_word_op(op: WordOp, a: i64, b: i64) -> i64 {
    match op {
        WordOp::Add => a.wrapping_add(b),
        WordOp::Sub => a.wrapping_sub(b),
        WordOp::Mul => a.wrapping_mul(b),
        WordOp::SDiv => sdiv(a, b),
        WordOp::And => a & b,
        WordOp::Or => a | b,
        WordOp::Xor => a ^ b,
        WordOp::Shl => shift_amount(b).map_or(0, |s| a.wrapping_shl(s)),
        WordOp::LShr => shift_amount(b).map_or(0, |s| ((a as u64) >> s) as i64),
        WordOp::AShr => a >> shift_amount(b).unwrap_or(63),
    }
}

fn shift_amount(b: i64) -> Option<u32> {
    ((b as u64) < 64).then_some(b as u32)
}

/// Truncating signed division; `x / 0` is `1` for negative `x` and `-1`
/// otherwise, and `MIN / -1` wraps to `MIN`.
pub fn sdiv(a: i64, b: i64) -> i64 {
    if b == 0 {
        if a < 0 {
            1
        } else {
            -1
        }
    } else {
        a.wrapping_div(b)
    }
}

pub fn eval_cmp(op: Cmp, a: i64, b: i64) -> bool {
    match op {
        Cmp::Eq => a == b,
        Cmp::Slt => a < b,
        Cmp::Sgt => a > b,
        Cmp::Ult => (a as u64) < (b as u64),
    }
}

/// Plain integers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Concrete;

/// Concrete data memory: 256 words behind a shared pointer so states clone
/// cheaply.
pub type ConcreteMemory = Arc<[i64; 256]>;

impl Domain for Concrete {
    type Bit = bool;
    type Word = i64;
    type Addr = u8;
    type Code = u16;
    type Memory = ConcreteMemory;

    fn bit(value: bool) -> bool {
        value
    }
    fn bit_value(b: &bool) -> Option<bool> {
        Some(*b)
    }
    fn not(b: &bool) -> bool {
        !b
    }
    fn and(a: &bool, b: &bool) -> bool {
        *a && *b
    }
    fn or(a: &bool, b: &bool) -> bool {
        *a || *b
    }
    fn ite_bit(c: &bool, t: &bool, e: &bool) -> bool {
        if *c {
            *t
        } else {
            *e
        }
    }

    fn word(value: i64) -> i64 {
        value
    }
    fn word_value(w: &i64) -> Option<i64> {
        Some(*w)
    }
    fn word_op(op: WordOp, a: &i64, b: &i64) -> i64 {
        eval_word_op(op, *a, *b)
    }
    fn neg(a: &i64) -> i64 {
        a.wrapping_neg()
    }
    fn bitnot(a: &i64) -> i64 {
        !a
    }
    fn cmp(op: Cmp, a: &i64, b: &i64) -> bool {
        eval_cmp(op, *a, *b)
    }
    fn ite_word(c: &bool, t: &i64, e: &i64) -> i64 {
        if *c {
            *t
        } else {
            *e
        }
    }

    fn addr(value: u8) -> u8 {
        value
    }
    fn addr_value(a: &u8) -> Option<u8> {
        Some(*a)
    }
    fn addr_offset(a: &u8, offset: i8) -> u8 {
        a.wrapping_add(offset as u8)
    }
    fn addr_of_word(w: &i64) -> u8 {
        *w as u8
    }
    fn addr_is(a: &u8, value: u8) -> bool {
        *a == value
    }
    fn addr_candidates(a: &u8) -> Option<Vec<u8>> {
        Some(vec![*a])
    }
    fn ite_addr(c: &bool, t: &u8, e: &u8) -> u8 {
        if *c {
            *t
        } else {
            *e
        }
    }

    fn code(value: u16) -> u16 {
        value
    }
    fn code_value(c: &u16) -> Option<u16> {
        Some(*c)
    }
    fn ite_code(c: &bool, t: &u16, e: &u16) -> u16 {
        if *c {
            *t
        } else {
            *e
        }
    }

    fn memory(cells: &[i64]) -> ConcreteMemory {
        let mut m = [0i64; 256];
        m[..cells.len()].copy_from_slice(cells);
        Arc::new(m)
    }
    fn read(m: &ConcreteMemory, a: &u8) -> i64 {
        m[*a as usize]
    }
    fn write(m: &ConcreteMemory, a: &u8, v: &i64) -> ConcreteMemory {
        let mut m = m.clone();
        Arc::make_mut(&mut m)[*a as usize] = *v;
        m
    }
    fn ite_memory(c: &bool, t: &ConcreteMemory, e: &ConcreteMemory) -> ConcreteMemory {
        if *c {
            t.clone()
        } else {
            e.clone()
        }
    }
}
