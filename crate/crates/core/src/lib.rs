//! Executable semantics and verification tooling for a small REDFIN-style
//! register-memory instruction set.
//!
//! The machine semantics in [`interp`] is written once, generic over a value
//! [`Domain`]. Instantiated with [`Concrete`] it is a cycle-accurate
//! simulator; instantiated with [`Symbolic`] it is a bounded symbolic executor
//! whose final states are handed to an SMT solver by [`verify`].

pub mod asm;
pub mod domain;
pub mod hll;
pub mod interp;
pub mod isa;
pub mod machine;
pub mod smt;
pub mod sym;
pub mod verify;

pub use domain::{Concrete, Domain};
pub use interp::{CycleModel, Interpreter};
pub use isa::{Instruction, InstructionCode, Register};
pub use machine::{Flag, MachineState, Program, StateReport};
pub use sym::{Symbolic, SymValue};

/// A fully concrete machine state.
pub type ConcreteState = MachineState<Concrete>;

/// A machine state whose components are expression DAGs.
pub type SymbolicState = MachineState<Symbolic>;
