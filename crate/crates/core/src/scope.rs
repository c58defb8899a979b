//! Macro-scope allocation.
//!
//! Entering a macro invocation only marks the current scope as pending; a
//! number is drawn from the counter the first time the scope is read. Macros
//! that never instantiate a captured identifier therefore leave the visible
//! numbering untouched.

use crate::name::MacroScope;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Current {
    Pending,
    Allocated(MacroScope),
}

#[derive(Debug, Clone)]
pub struct ScopeState {
    next: u64,
    current: Current,
    /// Scratch scopes count down from the top of the range and never touch
    /// `next`.
    scratch_next: u64,
    scratch_depth: usize,
    /// Test-only: identifiers keep only their most recent scope.
    pub keep_last_only: bool,
}

impl Default for ScopeState {
    fn default() -> Self {
        ScopeState {
            next: 1,
            current: Current::Pending,
            scratch_next: u64::MAX,
            scratch_depth: 0,
            keep_last_only: false,
        }
    }
}

impl ScopeState {
    /// The scope of the running invocation, allocated on first use.
    pub fn current(&mut self) -> MacroScope {
        match self.current {
            Current::Allocated(s) => s,
            Current::Pending => {
                let s = self.allocate();
                self.current = Current::Allocated(s);
                s
            }
        }
    }

    /// The current scope if it has already been allocated.
    pub fn peek_current(&self) -> Option<MacroScope> {
        match self.current {
            Current::Allocated(s) => Some(s),
            Current::Pending => None,
        }
    }

    fn allocate(&mut self) -> MacroScope {
        if self.scratch_depth > 0 {
            let s = self.scratch_next;
            self.scratch_next -= 1;
            MacroScope(s)
        } else {
            let s = self.next;
            self.next += 1;
            MacroScope(s)
        }
    }

    /// The next scope the visible counter would hand out.
    pub fn next_scope(&self) -> MacroScope {
        MacroScope(self.next)
    }

    /// Runs `f` under a fresh (pending) scope; returns the scope if `f` used it.
    pub fn with_fresh<R>(&mut self, f: impl FnOnce(&mut Self) -> R) -> (R, Option<MacroScope>) {
        let saved = self.current;
        self.current = Current::Pending;
        let r = f(self);
        let used = self.peek_current();
        self.current = saved;
        (r, used)
    }

    pub(crate) fn enter_scratch(&mut self) {
        self.scratch_depth += 1;
    }

    pub(crate) fn leave_scratch(&mut self) {
        self.scratch_depth -= 1;
    }

    /// Runs `f` with every allocation drawn from the scratch range.
    pub fn with_scratch<R>(&mut self, f: impl FnOnce(&mut Self) -> R) -> R {
        self.scratch_depth += 1;
        let r = f(self);
        self.scratch_depth -= 1;
        r
    }
}

/// Access to the macro-scope state shared by transformers, elaborators and
/// tactics.
pub trait MonadQuotation {
    fn scope_state(&mut self) -> &mut ScopeState;

    fn current_macro_scope(&mut self) -> MacroScope {
        self.scope_state().current()
    }

    fn with_fresh_macro_scope<R>(&mut self, f: impl FnOnce(&mut Self) -> R) -> R
    where
        Self: Sized,
    {
        let saved = std::mem::replace(&mut self.scope_state().current, Current::Pending);
        let r = f(self);
        self.scope_state().current = saved;
        r
    }
}

impl MonadQuotation for ScopeState {
    fn scope_state(&mut self) -> &mut ScopeState {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successive_invocations_get_increasing_scopes() {
        let mut s = ScopeState::default();
        let (a, _) = s.with_fresh(|s| s.current());
        let (b, _) = s.with_fresh(|s| s.current());
        assert_eq!((a, b), (MacroScope(1), MacroScope(2)));
    }

    #[test]
    fn nested_fresh_scopes_are_distinct_and_restored() {
        let mut s = ScopeState::default();
        s.with_fresh(|s| {
            let outer = s.current();
            let inner: Vec<_> = (0..2).map(|_| s.with_fresh(|s| s.current()).0).collect();
            assert_eq!(inner, vec![MacroScope(2), MacroScope(3)]);
            assert_eq!(s.current(), outer);
        });
    }

    #[test]
    fn unused_scope_is_not_observable() {
        let mut s = ScopeState::default();
        let (_, used) = s.with_fresh(|_| ());
        assert_eq!(used, None);
        assert_eq!(s.next_scope(), MacroScope(1));
    }

    #[test]
    fn scratch_scopes_do_not_touch_counter() {
        let mut s = ScopeState::default();
        let x = s.with_scratch(|s| s.with_fresh(|s| s.current()).0);
        assert_eq!(x, MacroScope(u64::MAX));
        assert_eq!(s.with_fresh(|s| s.current()).0, MacroScope(1));
    }

    #[test]
    fn trait_scoping_matches_state() {
        let mut s = ScopeState::default();
        let a = s.with_fresh_macro_scope(|s| s.current_macro_scope());
        let b = s.with_fresh_macro_scope(|s| s.current_macro_scope());
        assert!(a < b);
    }
}
