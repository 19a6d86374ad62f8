use std::collections::HashMap;

use thiserror::Error;

use super::{fold, post_order, Kind, Sort, SymValue};

/// Values for the free symbols of a term.
pub trait Valuation {
    fn var(&self, name: &str) -> Option<u64>;

    fn select(&self, _array: &str, _index: u64) -> Option<u64> {
        None
    }
}

impl Valuation for HashMap<String, u64> {
    fn var(&self, name: &str) -> Option<u64> {
        self.get(name).copied()
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no value for variable `{0}`")]
    MissingVar(String),
    #[error("no value for `{0}` at index {1}")]
    MissingSelect(String, u64),
}

impl SymValue {
    /// Substitutes `env` into the term and folds it to its bits.
    pub fn evaluate(&self, env: &dyn Valuation) -> Result<u64, EvalError> {
        let mut values: HashMap<u64, u64> = HashMap::new();
        for node in post_order(std::slice::from_ref(self)) {
            let bits = match node.kind() {
                Kind::Const(bits) => *bits,
                Kind::Var(name) => {
                    let raw = env.var(name).ok_or_else(|| EvalError::MissingVar(name.to_string()))?;
                    raw & mask_of(node.sort())
                }
                Kind::Select(array, index) => {
                    let i = values[&index.id()];
                    let raw = env
                        .select(&array.name, i)
                        .ok_or_else(|| EvalError::MissingSelect(array.name.to_string(), i))?;
                    raw & mask_of(node.sort())
                }
                Kind::App(op, args) => {
                    let sorts: Vec<Sort> = args.iter().map(SymValue::sort).collect();
                    let bits: Vec<u64> = args.iter().map(|a| values[&a.id()]).collect();
                    fold(*op, &sorts, &bits)
                }
            };
            values.insert(node.id(), bits);
        }
        Ok(values[&self.id()])
    }
}

fn mask_of(sort: Sort) -> u64 {
    super::mask(sort.width())
}
