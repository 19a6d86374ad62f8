use super::{Kind, Op, Sort, SymArray, SymValue};
use crate::domain::{Cmp, Domain, WordOp};

/// Expression DAGs. Every sort is a [`SymValue`]; memory is a [`SymArray`]
/// from 8-bit addresses to 64-bit words.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Symbolic;

impl Domain for Symbolic {
    type Bit = SymValue;
    type Word = SymValue;
    type Addr = SymValue;
    type Code = SymValue;
    type Memory = SymArray;

    fn bit(value: bool) -> SymValue {
        SymValue::bool(value)
    }
    fn bit_value(b: &SymValue) -> Option<bool> {
        b.as_bool()
    }
    fn not(b: &SymValue) -> SymValue {
        b.not()
    }
    fn and(a: &SymValue, b: &SymValue) -> SymValue {
        a.and(b)
    }
    fn or(a: &SymValue, b: &SymValue) -> SymValue {
        a.or(b)
    }
    fn ite_bit(c: &SymValue, t: &SymValue, e: &SymValue) -> SymValue {
        SymValue::ite(c, t, e)
    }

    fn word(value: i64) -> SymValue {
        SymValue::word(value)
    }
    fn word_value(w: &SymValue) -> Option<i64> {
        w.as_i64()
    }
    fn word_op(op: WordOp, a: &SymValue, b: &SymValue) -> SymValue {
        a.binary(op.into(), b)
    }
    fn neg(a: &SymValue) -> SymValue {
        a.neg()
    }
    fn bitnot(a: &SymValue) -> SymValue {
        a.not()
    }
    fn cmp(op: Cmp, a: &SymValue, b: &SymValue) -> SymValue {
        a.binary(op.into(), b)
    }
    fn ite_word(c: &SymValue, t: &SymValue, e: &SymValue) -> SymValue {
        SymValue::ite(c, t, e)
    }

    fn addr(value: u8) -> SymValue {
        SymValue::constant(Sort::ADDR, value as u64)
    }
    fn addr_value(a: &SymValue) -> Option<u8> {
        a.as_const().map(|b| b as u8)
    }
    fn addr_offset(a: &SymValue, offset: i8) -> SymValue {
        a.binary(Op::Add, &SymValue::constant(Sort::ADDR, offset as u8 as u64))
    }
    fn addr_of_word(w: &SymValue) -> SymValue {
        w.extract(7, 0)
    }
    fn addr_is(a: &SymValue, value: u8) -> SymValue {
        a.is_value(value as u64)
    }
    fn addr_candidates(a: &SymValue) -> Option<Vec<u8>> {
        let mut out = Vec::new();
        let mut stack = vec![a.clone()];
        while let Some(t) = stack.pop() {
            match t.kind() {
                Kind::Const(bits) => out.push(*bits as u8),
                Kind::App(Op::Ite, args) => {
                    stack.push(args[1].clone());
                    stack.push(args[2].clone());
                }
                _ => return None,
            }
        }
        out.sort_unstable();
        out.dedup();
        Some(out)
    }
    fn ite_addr(c: &SymValue, t: &SymValue, e: &SymValue) -> SymValue {
        SymValue::ite(c, t, e)
    }

    fn code(value: u16) -> SymValue {
        SymValue::constant(Sort::CODE, value as u64)
    }
    fn code_value(c: &SymValue) -> Option<u16> {
        c.as_const().map(|b| b as u16)
    }
    fn ite_code(c: &SymValue, t: &SymValue, e: &SymValue) -> SymValue {
        SymValue::ite(c, t, e)
    }

    fn memory(cells: &[SymValue]) -> SymArray {
        let zero = SymValue::word(0);
        cells
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != zero)
            .fold(SymArray::constant(Sort::ADDR, zero.clone()), |m, (i, v)| {
                m.store(&SymValue::constant(Sort::ADDR, i as u64), v)
            })
    }
    fn read(m: &SymArray, a: &SymValue) -> SymValue {
        m.read(a)
    }
    fn write(m: &SymArray, a: &SymValue, v: &SymValue) -> SymArray {
        m.store(a, v)
    }
    fn ite_memory(c: &SymValue, t: &SymArray, e: &SymArray) -> SymArray {
        SymArray::merge(c, t, e).expect("merged memories share a base")
    }
}
