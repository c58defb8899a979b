//! Declaration-time analysis of double-backtick quotations for identifiers
//! that are certainly unbound.

use std::sync::Arc;

use crate::error::{Error, ErrorKind, Result};
use crate::expander::Session;
use crate::quotation::QuotationTemplate;
use crate::syntax::{kinds, SyntaxTree};

/// A per-kind checker. It may extend the quotation context and recurse via
/// [`Prechecker::check`].
pub type PrecheckHook = Arc<dyn Fn(&SyntaxTree, &mut Prechecker) -> Result<()> + Send + Sync>;

/// Pseudo-kind under which the identifier hook is registered.
pub const IDENT_HOOK: &str = "ident";

pub const DEFAULT_UNFOLD_LIMIT: usize = 32;

pub struct Prechecker<'a> {
    session: &'a mut Session,
    /// Surface names bound inside the quotation so far.
    pub qctx: Vec<String>,
    unfolds: usize,
    pub unfold_limit: usize,
}

/// Checks a processed double-backtick quotation.
pub fn precheck_template(session: &mut Session, t: &QuotationTemplate) -> Result<()> {
    let mut p = Prechecker {
        session,
        qctx: Vec::new(),
        unfolds: 0,
        unfold_limit: DEFAULT_UNFOLD_LIMIT,
    };
    p.check(&t.body)
}

/// Whether `stx` contains an identifier outside antiquotations.
fn has_captured_ident(stx: &SyntaxTree) -> bool {
    match stx {
        SyntaxTree::Ident { .. } => true,
        _ if stx.is_antiquot_like() => false,
        SyntaxTree::Node { children, .. } => children.iter().any(has_captured_ident),
        _ => false,
    }
}

impl Prechecker<'_> {
    pub fn check(&mut self, stx: &SyntaxTree) -> Result<()> {
        if stx.is_antiquot_like() || matches!(stx, SyntaxTree::Atom { .. } | SyntaxTree::Missing) {
            return Ok(());
        }
        let key = match stx {
            SyntaxTree::Ident { .. } => crate::name::HierName::atomic(IDENT_HOOK),
            _ => stx.kind().cloned().unwrap_or_default(),
        };
        if stx.is_kind(kinds::NULL) {
            return stx.children().iter().try_for_each(|c| self.check(c));
        }
        if let Some(hook) = self.session.precheck_hooks.get(&key).cloned() {
            return hook(stx, self);
        }
        if !has_captured_ident(stx) {
            return Ok(());
        }
        if self.session.has_transformer(&key) {
            if self.unfolds >= self.unfold_limit {
                return Err(Error::at(ErrorKind::NotAnalyzable(key), stx.position()));
            }
            let out = self
                .unfold(stx)
                .map_err(|_| Error::at(ErrorKind::NotAnalyzable(key.clone()), stx.position()))?;
            self.unfolds += 1;
            let r = self.check(&out);
            self.unfolds -= 1;
            return r;
        }
        Err(Error::at(ErrorKind::NotAnalyzable(key), stx.position()))
    }

    /// One macro step drawn from the scratch scope range, without tracing.
    fn unfold(&mut self, stx: &SyntaxTree) -> Result<SyntaxTree> {
        let s = &mut *self.session;
        let trace = std::mem::replace(&mut s.config.trace_expansion, false);
        s.scopes.enter_scratch();
        let r = s.expand_macro_step(stx);
        s.scopes.leave_scratch();
        s.config.trace_expansion = trace;
        match r? {
            Some((out, _)) => Ok(out),
            None => Err(ErrorKind::NoTransformer(stx.kind().cloned().unwrap_or_default()).into()),
        }
    }

    /// Runs `f` with `names` temporarily bound.
    pub fn with_bound<R>(&mut self, names: Vec<String>, f: impl FnOnce(&mut Self) -> R) -> R {
        let n = self.qctx.len();
        self.qctx.extend(names);
        let r = f(self);
        self.qctx.truncate(n);
        r
    }

    pub fn is_bound_globally(&self, id: &SyntaxTree) -> bool {
        match id {
            SyntaxTree::Ident { value, preresolved, .. } => {
                !preresolved.is_empty() || !self.session.gctx.matching(value).is_empty()
            }
            _ => false,
        }
    }
}

fn check_ident(stx: &SyntaxTree, p: &mut Prechecker) -> Result<()> {
    let raw = stx.ident_raw().unwrap_or_default();
    if p.qctx.iter().any(|b| b == raw) || p.is_bound_globally(stx) {
        Ok(())
    } else {
        Err(Error::at(ErrorKind::UnknownIdentifier(raw.to_string()), stx.position()))
    }
}

fn check_fun(stx: &SyntaxTree, p: &mut Prechecker) -> Result<()> {
    let mut names = Vec::new();
    for b in stx.child(1).children() {
        match b {
            SyntaxTree::Ident { raw, .. } => names.push(raw.clone()),
            // Unknown binder name: the body cannot be analysed soundly.
            _ if b.is_antiquot_like() => return Ok(()),
            _ if b.is_kind(kinds::TYPED_BINDER) => {
                p.with_bound(names.clone(), |p| p.check(b.child(3)))?;
                match b.child(1) {
                    SyntaxTree::Ident { raw, .. } => names.push(raw.clone()),
                    _ => return Ok(()),
                }
            }
            _ => p.with_bound(names.clone(), |p| p.check(b))?,
        }
    }
    p.with_bound(names, |p| p.check(stx.child(3)))
}

fn check_children(stx: &SyntaxTree, p: &mut Prechecker) -> Result<()> {
    stx.children().iter().try_for_each(|c| p.check(c))
}

fn pattern_idents(stx: &SyntaxTree, out: &mut Vec<String>) {
    match stx {
        SyntaxTree::Ident { raw, .. } => out.push(raw.clone()),
        _ if stx.is_antiquot_like() => {}
        SyntaxTree::Node { children, .. } => children.iter().for_each(|c| pattern_idents(c, out)),
        _ => {}
    }
}

fn check_match(stx: &SyntaxTree, p: &mut Prechecker) -> Result<()> {
    p.check(stx.child(1))?;
    for alt in stx.child(3).children() {
        if !alt.is_kind(kinds::MATCH_ALT) {
            p.check(alt)?;
            continue;
        }
        let mut names = Vec::new();
        pattern_idents(alt.child(1), &mut names);
        p.with_bound(names, |p| p.check(alt.child(3)))?;
    }
    Ok(())
}

/// Hooks for the built-in term forms.
pub fn builtin_hooks() -> Vec<(&'static str, PrecheckHook)> {
    vec![
        (IDENT_HOOK, Arc::new(check_ident)),
        (kinds::FUN, Arc::new(check_fun)),
        (kinds::APP, Arc::new(check_children)),
        (kinds::MATCH, Arc::new(check_match)),
        (kinds::PLUS, Arc::new(check_children)),
        (kinds::ARROW, Arc::new(check_children)),
        (kinds::PAREN, Arc::new(check_children)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::DeclKind;
    use crate::parser::parse_str;
    use crate::quotation::process_quotation;

    fn check(s: &mut Session, src: &str) -> Result<()> {
        let q = parse_str(&s.tables, "term", src).unwrap();
        let t = process_quotation(&q, &s.gctx, &s.tables).unwrap();
        precheck_template(s, &t)
    }

    #[test]
    fn unbound_identifier_reported() {
        let mut s = Session::default();
        s.declare_builtin("id", DeclKind::Def, None).unwrap();
        let e = check(&mut s, "``(fun x => x + $y + id z)").unwrap_err();
        assert_eq!(e.to_string(), "unknown identifier 'z'");
        assert!(e.position.is_some());
    }

    #[test]
    fn closed_and_antiquoted_terms_pass() {
        let mut s = Session::default();
        s.declare_builtin("id", DeclKind::Def, None).unwrap();
        check(&mut s, "``(fun x => x)").unwrap();
        check(&mut s, "``(id $z)").unwrap();
        check(&mut s, "``($a + $b)").unwrap();
        check(&mut s, "``(fun $x => y)").unwrap();
        check(&mut s, "``(match 1 with | foo a => a)").unwrap();
    }

    #[test]
    fn no_captured_idents_branch_is_exact() {
        assert!(!has_captured_ident(
            &parse_str(&Default::default(), "term", "$a + 1").unwrap()
        ));
        assert!(has_captured_ident(
            &parse_str(&Default::default(), "term", "$a + b").unwrap()
        ));
    }

    #[test]
    fn unknown_kind_not_analyzable() {
        let mut s = Session::default();
        s.declare_builtin("a", DeclKind::Def, None).unwrap();
        let e = check(&mut s, "``(⟨a, 1⟩)").unwrap_err();
        assert!(matches!(e.kind, ErrorKind::NotAnalyzable(_)));
    }
}
