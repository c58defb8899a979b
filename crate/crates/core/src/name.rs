//! Hierarchical names and macro scopes.
//!
//! Macro scopes live inline in a [`HierName`] as trailing numeric
//! components, so a *symbol* (name plus its ordered scope stack) is just a
//! `HierName` compared for equality.

use std::fmt;

/// A fresh tag applied to identifiers introduced by one macro invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacroScope(pub u64);

impl MacroScope {
    /// Scope reserved for [`crate::quotation::mk_cident`]; never handed out
    /// by the run counter, which starts at 1.
    pub const RESERVED: MacroScope = MacroScope(0);
}

impl fmt::Display for MacroScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NameComponent {
    Str(String),
    Num(u64),
}

/// Hierarchical name. The empty sequence is the anonymous name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HierName {
    components: Vec<NameComponent>,
}

/// A binding-equality unit: base name plus macro-scope suffix.
pub type Symbol = HierName;

impl HierName {
    pub fn anonymous() -> Self {
        Self::default()
    }

    pub fn from_components(components: Vec<NameComponent>) -> Self {
        Self { components }
    }

    /// Splits a dotted surface spelling into string components.
    /// `"Prod.mk"` becomes `[Prod, mk]`; no numeric components are produced.
    pub fn from_dotted(s: &str) -> Self {
        if s.is_empty() {
            return Self::anonymous();
        }
        Self {
            components: s.split('.').map(|c| NameComponent::Str(c.to_string())).collect(),
        }
    }

    /// Single-component name, used for generated node kinds that may contain
    /// dots or punctuation.
    pub fn atomic(s: impl Into<String>) -> Self {
        Self {
            components: vec![NameComponent::Str(s.into())],
        }
    }

    pub fn components(&self) -> &[NameComponent] {
        &self.components
    }

    pub fn is_anonymous(&self) -> bool {
        self.components.is_empty()
    }

    pub fn push_str(mut self, s: impl Into<String>) -> Self {
        self.components.push(NameComponent::Str(s.into()));
        self
    }

    pub fn push_num(mut self, n: u64) -> Self {
        self.components.push(NameComponent::Num(n));
        self
    }

    /// Appends one macro scope, extending the ordered scope stack.
    pub fn add_macro_scope(&self, scope: MacroScope) -> Self {
        self.clone().push_num(scope.0)
    }

    /// Keep-last-scope-only variant: replaces the scope stack by `scope`.
    /// Only used to demonstrate why the stack is needed.
    pub fn replace_macro_scopes(&self, scope: MacroScope) -> Self {
        self.base().push_num(scope.0)
    }

    /// The maximal trailing run of numeric components, in application order.
    pub fn macro_scopes(&self) -> Vec<MacroScope> {
        let n = self.base_len();
        self.components[n..]
            .iter()
            .map(|c| match c {
                NameComponent::Num(v) => MacroScope(*v),
                NameComponent::Str(_) => unreachable!("trailing run is numeric"),
            })
            .collect()
    }

    fn base_len(&self) -> usize {
        self.components
            .iter()
            .rposition(|c| matches!(c, NameComponent::Str(_)))
            .map_or(0, |i| i + 1)
    }

    /// The name without its trailing macro scopes.
    pub fn base(&self) -> HierName {
        Self {
            components: self.components[..self.base_len()].to_vec(),
        }
    }

    pub fn has_macro_scopes(&self) -> bool {
        self.base_len() < self.components.len()
    }

    /// Whether an identifier spelled `self` may refer to the global `global`:
    /// equal scope stacks, and the string part of `global` ends with the string
    /// part of `self` (every namespace prefix counts as open).
    pub fn matches_global(&self, global: &HierName) -> bool {
        if self.macro_scopes() != global.macro_scopes() {
            return false;
        }
        let mine = &self.components[..self.base_len()];
        let theirs = &global.components[..global.base_len()];
        !mine.is_empty() && theirs.len() >= mine.len() && theirs.ends_with(mine)
    }

    /// The last string component, if any.
    pub fn last_str(&self) -> Option<&str> {
        self.components.iter().rev().find_map(|c| match c {
            NameComponent::Str(s) => Some(s.as_str()),
            NameComponent::Num(_) => None,
        })
    }
}

impl fmt::Display for HierName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "[anonymous]");
        }
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            match c {
                NameComponent::Str(s) => f.write_str(s)?,
                NameComponent::Num(n) => write!(f, "{n}")?,
            }
        }
        Ok(())
    }
}

impl From<&str> for HierName {
    fn from(s: &str) -> Self {
        HierName::from_dotted(s)
    }
}
