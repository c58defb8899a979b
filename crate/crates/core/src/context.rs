//! Global and local binding contexts.

use indexmap::IndexMap;

use crate::elab::CoreType;
use crate::error::{ErrorKind, Result};
use crate::name::{HierName, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    Def,
    Theorem,
    Axiom,
    /// Built-in type formers such as `Nat` or `Prod`.
    Type,
    Builtin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub kind: DeclKind,
    /// Known once the declaration has been elaborated.
    pub ty: Option<CoreType>,
}

/// Declarations keyed by full symbol, macro scopes included.
#[derive(Debug, Clone, Default)]
pub struct GlobalContext {
    decls: IndexMap<Symbol, Decl>,
}

impl GlobalContext {
    pub fn add(&mut self, name: Symbol, decl: Decl) -> Result<()> {
        if self.decls.contains_key(&name) {
            return Err(ErrorKind::Redefinition(name).into());
        }
        self.decls.insert(name, decl);
        Ok(())
    }

    pub fn get(&self, name: &Symbol) -> Option<&Decl> {
        self.decls.get(name)
    }

    pub fn get_mut(&mut self, name: &Symbol) -> Option<&mut Decl> {
        self.decls.get_mut(name)
    }

    pub fn contains(&self, name: &Symbol) -> bool {
        self.decls.contains_key(name)
    }

    /// Declarations an identifier with value `id` may refer to, in
    /// declaration order.
    pub fn matching(&self, id: &HierName) -> Vec<Symbol> {
        self.decls.keys().filter(|g| id.matches_global(g)).cloned().collect()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.decls.keys()
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }
}

/// Symbols bound by enclosing binders, innermost last.
#[derive(Debug, Clone, Default)]
pub struct LocalContext {
    bound: Vec<Symbol>,
}

impl LocalContext {
    pub fn from_symbols(bound: Vec<Symbol>) -> Self {
        LocalContext { bound }
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.bound.iter().rev().any(|b| b == s)
    }

    pub fn push(&mut self, s: Symbol) {
        self.bound.push(s);
    }

    pub fn len(&self) -> usize {
        self.bound.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bound.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.bound.truncate(n);
    }
}
