use std::collections::BTreeMap;

use thiserror::Error;

use super::{Sort, SymValue};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DuplicateVar {
    #[error("variable `{0}` declared twice")]
    Duplicate(String),
    #[error("`{0}` is not a valid variable name")]
    InvalidName(String),
}

/// The free variables of one verification query.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    vars: BTreeMap<String, SymValue>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a fresh variable. Names must be identifiers
    /// (`[A-Za-z_][A-Za-z0-9_]*`) and unique within the table.
    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<SymValue, DuplicateVar> {
        if !is_identifier(name) {
            return Err(DuplicateVar::InvalidName(name.to_string()));
        }
        if self.vars.contains_key(name) {
            return Err(DuplicateVar::Duplicate(name.to_string()));
        }
        let v = SymValue::var(name, sort);
        self.vars.insert(name.to_string(), v.clone());
        Ok(v)
    }

    pub fn get(&self, name: &str) -> Option<&SymValue> {
        self.vars.get(name)
    }

    /// Declared variables ordered by name.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &SymValue)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
