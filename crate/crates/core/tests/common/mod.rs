#![allow(dead_code)]

pub mod checks;

use proptest::prelude::*;

use redfin_core::hll::Expr;
use redfin_core::isa::{Instruction, Register};
use redfin_core::{ConcreteState, StateReport};

pub fn register() -> impl Strategy<Value = Register> {
    prop::sample::select(Register::ALL.to_vec())
}

/// Addresses biased toward the low cells where data and inputs live.
pub fn address() -> impl Strategy<Value = u8> {
    prop_oneof![4 => 0u8..16, 1 => any::<u8>()]
}

/// Every instruction except jumps, so that the instruction counter stays
/// concrete under symbolic execution.
pub fn straight_line_instruction() -> impl Strategy<Value = Instruction> {
    use Instruction as I;
    let ra = || (register(), address());
    prop_oneof![
        Just(I::Nop),
        ra().prop_map(|(r, a)| I::Ld(r, a)),
        (register(), any::<i8>()).prop_map(|(r, k)| I::LdI(r, k)),
        ra().prop_map(|(r, a)| I::Ldmi(r, a)),
        ra().prop_map(|(r, a)| I::St(r, a)),
        ra().prop_map(|(r, a)| I::Stmi(r, a)),
        ra().prop_map(|(r, a)| I::Add(r, a)),
        ra().prop_map(|(r, a)| I::Sub(r, a)),
        ra().prop_map(|(r, a)| I::Mul(r, a)),
        ra().prop_map(|(r, a)| I::Div(r, a)),
        ra().prop_map(|(r, a)| I::And(r, a)),
        ra().prop_map(|(r, a)| I::Or(r, a)),
        ra().prop_map(|(r, a)| I::Xor(r, a)),
        register().prop_map(I::Abs),
        register().prop_map(I::Not),
        ra().prop_map(|(r, a)| I::Sll(r, a)),
        ra().prop_map(|(r, a)| I::Srl(r, a)),
        ra().prop_map(|(r, a)| I::Sra(r, a)),
        (register(), any::<u8>()).prop_map(|(r, k)| I::SllI(r, k)),
        (register(), any::<u8>()).prop_map(|(r, k)| I::SrlI(r, k)),
        (register(), any::<u8>()).prop_map(|(r, k)| I::SraI(r, k)),
        ra().prop_map(|(r, a)| I::CmpEq(r, a)),
        ra().prop_map(|(r, a)| I::CmpLt(r, a)),
        ra().prop_map(|(r, a)| I::CmpGt(r, a)),
    ]
}

/// Any instruction, jumps and `halt` included.
pub fn instruction() -> impl Strategy<Value = Instruction> {
    use Instruction as I;
    prop_oneof![
        12 => straight_line_instruction(),
        1 => Just(I::Halt),
        1 => (-6i8..6).prop_map(I::Jmpi),
        1 => (-6i8..6).prop_map(I::JmpiCt),
        1 => (-6i8..6).prop_map(I::JmpiCf),
    ]
}

/// Words mixing small values, which make useful addresses and shift amounts,
/// with the extremes of the signed range.
pub fn word() -> impl Strategy<Value = i64> {
    prop_oneof![
        3 => -16i64..64,
        2 => any::<i64>(),
        1 => prop::sample::select(vec![i64::MIN, i64::MIN + 1, -1, 0, 1, i64::MAX - 1, i64::MAX]),
    ]
}

pub fn data() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(word(), 0..24)
}

/// Expressions of depth at most `depth` over cells 0..=3.
pub fn expr(depth: u32) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0u8..4).prop_map(Expr::var), any::<i8>().prop_map(Expr::constant)];
    leaf.prop_recursive(depth.saturating_sub(1), 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::add(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::sub(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::mul(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| {
                let r = if r == Expr::ConstI(0) { Expr::ConstI(1) } else { r };
                Expr::div(l, r)
            }),
            inner.prop_map(Expr::abs),
        ]
    })
}

/// Everything observable about a concrete state.
pub fn snapshot(s: &ConcreteState) -> StateReport {
    s.report(0, 255)
}
