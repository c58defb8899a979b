//! Bidirectional elaboration of term syntax into a small simply typed core.

use std::fmt;
use std::sync::Arc;

use crate::context::LocalContext;
use crate::error::{Error, ErrorKind, Frame, Result};
use crate::expander::{Resolution, Session};
use crate::name::{HierName, Symbol};
use crate::quotation::mk_cident;
use crate::scope::{MonadQuotation, ScopeState};
use crate::syntax::{kinds, render, render_name, strip_top_level_scopes, SyntaxTree};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CoreType {
    Nat,
    PropAtom(HierName),
    Arrow(Box<CoreType>, Box<CoreType>),
    Prod(Box<CoreType>, Box<CoreType>),
    Unit,
}

impl CoreType {
    pub fn arrow(a: CoreType, b: CoreType) -> Self {
        CoreType::Arrow(Box::new(a), Box::new(b))
    }

    pub fn prod(a: CoreType, b: CoreType) -> Self {
        CoreType::Prod(Box::new(a), Box::new(b))
    }

    /// Name of the head type former, used to pick anonymous constructors.
    pub fn head(&self) -> &'static str {
        match self {
            CoreType::Nat => "Nat",
            CoreType::PropAtom(_) => "Prop",
            CoreType::Arrow(..) => "→",
            CoreType::Prod(..) => "Prod",
            CoreType::Unit => "Unit",
        }
    }
}

impl fmt::Display for CoreType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreType::Nat => write!(f, "nat"),
            CoreType::Unit => write!(f, "unit"),
            CoreType::PropAtom(n) => write!(f, "{}", render_name(n, &|_| false)),
            CoreType::Arrow(a, b) => write!(f, "(arrow {a} {b})"),
            CoreType::Prod(a, b) => write!(f, "(prod {a} {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreExpr {
    Const(HierName),
    Local(Symbol),
    Lam {
        binder: Symbol,
        ty: CoreType,
        body: Box<CoreExpr>,
    },
    App(Box<CoreExpr>, Box<CoreExpr>),
    NatLit(u64),
    Pair(Box<CoreExpr>, Box<CoreExpr>),
}

impl CoreExpr {
    pub fn app(f: CoreExpr, a: CoreExpr) -> Self {
        CoreExpr::App(Box::new(f), Box::new(a))
    }
}

impl fmt::Display for CoreExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |n: &HierName| render_name(n, &|_| false);
        match self {
            CoreExpr::Const(n) => write!(f, "(const {})", name(n)),
            CoreExpr::Local(n) => write!(f, "(local {})", name(n)),
            CoreExpr::Lam { binder, ty, body } if binder.to_string() == "_" => write!(f, "(lam _ {ty} {body})"),
            CoreExpr::Lam { binder, ty, body } => write!(f, "(lam {} {ty} {body})", name(binder)),
            CoreExpr::App(a, b) => write!(f, "(app {a} {b})"),
            CoreExpr::NatLit(n) => write!(f, "(nat {n})"),
            CoreExpr::Pair(a, b) => write!(f, "(pair {a} {b})"),
        }
    }
}

/// A type-aware handler for one syntax kind.
pub type Elaborator = Arc<dyn Fn(&SyntaxTree, Option<&CoreType>, &mut ElabCtx) -> Result<CoreExpr> + Send + Sync>;

/// Elaboration state: the session (globals, scopes, handlers) and the
/// typed local context.
pub struct ElabCtx<'a> {
    pub session: &'a mut Session,
    pub locals: Vec<(Symbol, CoreType)>,
}

impl MonadQuotation for ElabCtx<'_> {
    fn scope_state(&mut self) -> &mut ScopeState {
        &mut self.session.scopes
    }
}

const PROD_MK: &str = "Prod.mk";
const NAT_ADD: &str = "Nat.add";

fn elab_err(msg: impl Into<String>, stx: &SyntaxTree) -> Error {
    Error::at(ErrorKind::Elab(msg.into()), stx.position())
}

impl<'a> ElabCtx<'a> {
    pub fn new(session: &'a mut Session) -> Self {
        ElabCtx {
            session,
            locals: Vec::new(),
        }
    }

    fn local_type(&self, s: &Symbol) -> Option<&CoreType> {
        self.locals.iter().rev().find(|(n, _)| n == s).map(|(_, t)| t)
    }

    fn global(&self, g: &HierName, stx: &SyntaxTree) -> Result<(CoreExpr, CoreType)> {
        match self.session.gctx.get(g).and_then(|d| d.ty.clone()) {
            Some(t) => Ok((CoreExpr::Const(g.clone()), t)),
            None => Err(elab_err(format!("'{g}' has no known type"), stx)),
        }
    }

    fn candidates(&self, ids: &[SyntaxTree], stx: &SyntaxTree) -> Result<(CoreExpr, CoreType)> {
        let typed: Vec<&HierName> = ids
            .iter()
            .filter_map(|i| i.ident_value())
            .filter(|g| self.session.gctx.get(g).is_some_and(|d| d.ty.is_some()))
            .collect();
        match typed.as_slice() {
            [g] => self.global(g, stx),
            _ => Err(Error::at(
                ErrorKind::Ambiguous(ids.iter().map(render).collect::<Vec<_>>().join(", ")),
                stx.position(),
            )),
        }
    }

    fn reference(&self, id: &SyntaxTree) -> Result<(CoreExpr, CoreType)> {
        let lctx = LocalContext::from_symbols(self.locals.iter().map(|(s, _)| s.clone()).collect());
        match self.session.resolve(id, &lctx)? {
            Resolution::Local(s) => {
                let t = self.local_type(&s).cloned().expect("resolved local is bound");
                Ok((CoreExpr::Local(s), t))
            }
            Resolution::Global(g) => self.global(&g, id),
            Resolution::Overloaded(gs) => {
                let ids: Vec<SyntaxTree> = gs.into_iter().map(SyntaxTree::ident).collect();
                self.candidates(&ids, id)
            }
        }
    }

    /// The global a head names, if it is a global reference.
    fn head_global(&self, f: &SyntaxTree) -> Option<HierName> {
        if f.is_kind(kinds::GLOBAL_REF) {
            return f.child(0).ident_value().cloned();
        }
        if f.is_ident() {
            let lctx = LocalContext::from_symbols(self.locals.iter().map(|(s, _)| s.clone()).collect());
            if let Ok(Resolution::Global(g)) = self.session.resolve(f, &lctx) {
                return Some(g);
            }
        }
        None
    }

    /// Elaborates `stx`, checking against `expected` when given.
    pub fn elab(&mut self, stx: &SyntaxTree, expected: Option<&CoreType>) -> Result<(CoreExpr, CoreType)> {
        let (e, t) = self.elab_core(stx, expected)?;
        if let Some(exp) = expected {
            if *exp != t {
                return Err(Error::at(
                    ErrorKind::TypeMismatch {
                        expected: exp.to_string(),
                        found: t.to_string(),
                    },
                    stx.position(),
                ));
            }
        }
        Ok((e, t))
    }

    fn elab_core(&mut self, stx: &SyntaxTree, expected: Option<&CoreType>) -> Result<(CoreExpr, CoreType)> {
        if stx.is_ident() {
            return self.reference(stx);
        }
        let Some(kind) = stx.kind().cloned() else {
            return Err(elab_err(format!("unexpected syntax '{stx}'"), stx));
        };
        let k = |s: &str| stx.is_kind(s);
        if k(kinds::NUM) {
            let n = stx.child(0).atom_value().and_then(|v| v.parse().ok());
            return n
                .map(|n| (CoreExpr::NatLit(n), CoreType::Nat))
                .ok_or_else(|| elab_err("malformed numeral", stx));
        }
        if k(kinds::GLOBAL_REF) {
            let g = stx.child(0).ident_value().cloned().unwrap_or_default();
            return self.global(&g, stx);
        }
        if k(kinds::CHOICE) {
            return self.candidates(stx.children(), stx);
        }
        if k(kinds::FUN) && stx.child(1).children().len() == 1 {
            return self.elab_fun(stx, expected);
        }
        if k(kinds::APP) {
            return self.elab_app(stx, expected);
        }
        if k(kinds::PLUS) {
            let (l, _) = self.elab(stx.child(0), Some(&CoreType::Nat))?;
            let (r, _) = self.elab(stx.child(2), Some(&CoreType::Nat))?;
            let add = CoreExpr::Const(HierName::from_dotted(NAT_ADD));
            return Ok((CoreExpr::app(CoreExpr::app(add, l), r), CoreType::Nat));
        }
        if let Some(el) = self.session.elaborators.get(&kind).cloned() {
            let e = self.with_fresh_macro_scope(|ctx| el(stx, expected, ctx))?;
            return Ok((e.clone(), infer_type(&self.session.gctx, &self.locals, &e)?));
        }
        if self.session.has_transformer(&kind) {
            return self.adapter(stx, expected);
        }
        if k(kinds::FUN) {
            let binders = stx.child(1).children();
            let mut body = stx.child(3).clone();
            for b in binders.iter().rev() {
                body = SyntaxTree::node(
                    kinds::FUN,
                    vec![
                        stx.child(0).clone(),
                        SyntaxTree::null(vec![b.clone()]),
                        stx.child(2).clone(),
                        body,
                    ],
                );
            }
            return self.elab(&body, expected);
        }
        if k(kinds::PAREN) && stx.child(1).children().len() == 1 {
            return self.elab(&stx.child(1).children()[0], expected);
        }
        Err(elab_err(format!("unsupported syntax kind '{kind}'"), stx))
    }

    /// Runs the kind's transformer for one step and elaborates the output.
    fn adapter(&mut self, stx: &SyntaxTree, expected: Option<&CoreType>) -> Result<(CoreExpr, CoreType)> {
        let kind = stx.kind().cloned().unwrap_or_default();
        let Some((out, scope)) = self.session.expand_macro_step(stx)? else {
            return Err(Error::at(ErrorKind::NoTransformer(kind), stx.position()));
        };
        self.elab(&out, expected)
            .map_err(|e| e.with_position(stx.position()).in_frame(Frame { kind, scope }))
    }

    fn elab_fun(&mut self, stx: &SyntaxTree, expected: Option<&CoreType>) -> Result<(CoreExpr, CoreType)> {
        let b = &stx.child(1).children()[0];
        let (dom_exp, cod_exp) = match expected {
            Some(CoreType::Arrow(a, c)) => (Some((**a).clone()), Some((**c).clone())),
            _ => (None, None),
        };
        let (binder, dom) = if b.is_kind(kinds::TYPED_BINDER) {
            let t = self.elab_type(b.child(3))?;
            (strip_top_level_scopes(b.child(1))?, t)
        } else {
            let sym = if b.is_kind(kinds::HOLE) {
                HierName::atomic("_")
            } else {
                strip_top_level_scopes(b).map_err(|e| e.with_position(b.position()))?
            };
            match dom_exp.clone() {
                Some(t) => (sym, t),
                None => return Err(elab_err(format!("cannot infer the type of binder '{b}'"), b)),
            }
        };
        if let Some(d) = &dom_exp {
            if *d != dom {
                return Err(Error::at(
                    ErrorKind::TypeMismatch {
                        expected: d.to_string(),
                        found: dom.to_string(),
                    },
                    b.position(),
                ));
            }
        }
        self.locals.push((binder.clone(), dom.clone()));
        let body = self.elab(stx.child(3), cod_exp.as_ref());
        self.locals.pop();
        let (body, cod) = body?;
        Ok((
            CoreExpr::Lam {
                binder,
                ty: dom.clone(),
                body: Box::new(body),
            },
            CoreType::arrow(dom, cod),
        ))
    }

    fn elab_app(&mut self, stx: &SyntaxTree, expected: Option<&CoreType>) -> Result<(CoreExpr, CoreType)> {
        let args = stx.child(1).children();
        if self
            .head_global(stx.child(0))
            .is_some_and(|g| g == HierName::from_dotted(PROD_MK))
            && args.len() == 2
        {
            let (ea, eb) = match expected {
                Some(CoreType::Prod(a, b)) => (Some(&**a), Some(&**b)),
                _ => (None, None),
            };
            let (a, ta) = self.elab(&args[0], ea)?;
            let (b, tb) = self.elab(&args[1], eb)?;
            return Ok((CoreExpr::Pair(Box::new(a), Box::new(b)), CoreType::prod(ta, tb)));
        }
        let (mut f, mut ft) = self.elab(stx.child(0), None)?;
        for a in args {
            let CoreType::Arrow(dom, cod) = ft else {
                return Err(elab_err(format!("'{}' is not a function", stx.child(0)), stx));
            };
            let (ea, _) = self.elab(a, Some(&dom))?;
            f = CoreExpr::app(f, ea);
            ft = *cod;
        }
        Ok((f, ft))
    }

    /// Reads a type from term syntax.
    pub fn elab_type(&mut self, stx: &SyntaxTree) -> Result<CoreType> {
        let name = match stx {
            SyntaxTree::Ident { value, .. } => Some(value.clone()),
            _ if stx.is_kind(kinds::GLOBAL_REF) => stx.child(0).ident_value().cloned(),
            _ => None,
        };
        if let Some(n) = name {
            return Ok(match n.to_string().as_str() {
                "Nat" => CoreType::Nat,
                "Unit" => CoreType::Unit,
                _ => CoreType::PropAtom(n),
            });
        }
        if stx.is_kind(kinds::ARROW) {
            return Ok(CoreType::arrow(
                self.elab_type(stx.child(0))?,
                self.elab_type(stx.child(2))?,
            ));
        }
        if stx.is_kind(kinds::PAREN) && stx.child(1).children().len() == 1 {
            return self.elab_type(&stx.child(1).children()[0]);
        }
        if stx.is_kind(kinds::APP)
            && stx.child(1).children().len() == 2
            && self.head_global(stx.child(0)).is_some_and(|g| g.to_string() == "Prod")
        {
            let a = &stx.child(1).children()[0];
            let b = &stx.child(1).children()[1];
            return Ok(CoreType::prod(self.elab_type(a)?, self.elab_type(b)?));
        }
        Err(elab_err(format!("'{stx}' is not a type"), stx))
    }
}

/// The anonymous-constructor elaborator: `⟨a, b⟩` becomes an application
/// of the expected type's constructor.
pub fn elab_anonymous_ctor(stx: &SyntaxTree, expected: Option<&CoreType>, ctx: &mut ElabCtx) -> Result<CoreExpr> {
    let Some(exp) = expected else {
        return Err(Error::at(ErrorKind::ExpectedTypeRequired, stx.position()));
    };
    let args: Vec<SyntaxTree> = stx
        .child(1)
        .children()
        .iter()
        .filter(|c| !matches!(c, SyntaxTree::Atom { .. }))
        .cloned()
        .collect();
    let Some((ctor, arity)) = ctx.session.anon_ctors.get(exp.head()).cloned() else {
        return Err(elab_err(format!("type {exp} has no anonymous constructor"), stx));
    };
    if args.len() != arity {
        return Err(elab_err(
            format!("constructor '{ctor}' expects {arity} arguments, got {}", args.len()),
            stx,
        ));
    }
    let head = mk_cident(&ctor);
    let app = if arity == 0 {
        head
    } else {
        SyntaxTree::node(kinds::APP, vec![head, SyntaxTree::null(args)])
    };
    Ok(ctx.elab(&app, Some(exp))?.0)
}

/// Standalone type checker used to validate elaboration results.
pub fn infer_type(
    gctx: &crate::context::GlobalContext,
    locals: &[(Symbol, CoreType)],
    e: &CoreExpr,
) -> Result<CoreType> {
    fn go(gctx: &crate::context::GlobalContext, env: &mut Vec<(Symbol, CoreType)>, e: &CoreExpr) -> Result<CoreType> {
        let bad = |m: String| Error::new(ErrorKind::Elab(m));
        match e {
            CoreExpr::NatLit(_) => Ok(CoreType::Nat),
            CoreExpr::Const(c) => gctx
                .get(c)
                .and_then(|d| d.ty.clone())
                .ok_or_else(|| bad(format!("constant {c} has no type"))),
            CoreExpr::Local(s) => env
                .iter()
                .rev()
                .find(|(n, _)| n == s)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| bad(format!("unbound local {s}"))),
            CoreExpr::Lam { binder, ty, body } => {
                env.push((binder.clone(), ty.clone()));
                let b = go(gctx, env, body);
                env.pop();
                Ok(CoreType::arrow(ty.clone(), b?))
            }
            CoreExpr::App(f, a) => match go(gctx, env, f)? {
                CoreType::Arrow(d, c) if *d == go(gctx, env, a)? => Ok(*c),
                t => Err(bad(format!("ill-typed application of {t}"))),
            },
            CoreExpr::Pair(a, b) => Ok(CoreType::prod(go(gctx, env, a)?, go(gctx, env, b)?)),
        }
    }
    go(gctx, &mut locals.to_vec(), e)
}

/// Elaborates an expanded declaration, recording its type; returns the
/// rendered result for declarations and `None` for other commands.
pub fn elab_command(session: &mut Session, cmd: &SyntaxTree) -> Result<Option<String>> {
    let name_of = |c: &SyntaxTree| c.child(1).ident_value().cloned().unwrap_or_default();
    if cmd.is_kind(kinds::DEF) {
        let name = name_of(cmd);
        let mut ctx = ElabCtx::new(session);
        let ty = match cmd.child(2).children() {
            [_, t] => Some(ctx.elab_type(t)?),
            _ => None,
        };
        let (e, t) = ctx.elab(cmd.child(4), ty.as_ref())?;
        debug_assert_eq!(infer_type(&session.gctx, &[], &e).ok().as_ref(), Some(&t));
        set_type(session, &name, t.clone());
        return Ok(Some(format!("def {} : {t} := {e}", render_name(&name, &|_| false))));
    }
    if cmd.is_kind(kinds::AXIOM) {
        let name = name_of(cmd);
        let t = ElabCtx::new(session).elab_type(cmd.child(3))?;
        set_type(session, &name, t.clone());
        return Ok(Some(format!("axiom {} : {t}", render_name(&name, &|_| false))));
    }
    if cmd.is_kind(kinds::THEOREM) {
        let name = name_of(cmd);
        let stmt = crate::tactic::prove_theorem(session, cmd)?;
        return Ok(Some(format!(
            "theorem {} : {stmt} proved",
            render_name(&name, &|_| false)
        )));
    }
    Ok(None)
}

fn set_type(session: &mut Session, name: &HierName, t: CoreType) {
    if let Some(d) = session.gctx.get_mut(name) {
        d.ty = Some(t);
    }
}

/// Elaborates a term in a fresh context.
pub fn elab_term(session: &mut Session, stx: &SyntaxTree, expected: Option<&CoreType>) -> Result<(CoreExpr, CoreType)> {
    ElabCtx::new(session).elab(stx, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::DeclKind;
    use crate::parser::parse_str;

    fn session() -> Session {
        let mut s = Session::default();
        s.declare_builtin("Nat", DeclKind::Type, None).unwrap();
        s.declare_builtin("Prod", DeclKind::Type, None).unwrap();
        s.declare_builtin("Prod.mk", DeclKind::Builtin, None).unwrap();
        s.declare_builtin("Unit.unit", DeclKind::Builtin, Some(CoreType::Unit))
            .unwrap();
        s.declare_builtin(
            "Nat.add",
            DeclKind::Builtin,
            Some(CoreType::arrow(
                CoreType::Nat,
                CoreType::arrow(CoreType::Nat, CoreType::Nat),
            )),
        )
        .unwrap();
        s
    }

    fn term(s: &Session, src: &str) -> SyntaxTree {
        parse_str(&s.tables, "term", src).unwrap()
    }

    fn el(s: &mut Session, src: &str, expected: Option<&CoreType>) -> Result<(CoreExpr, CoreType)> {
        let t = term(s, src);
        elab_term(s, &t, expected)
    }

    fn nn() -> CoreType {
        CoreType::arrow(CoreType::Nat, CoreType::Nat)
    }

    #[test]
    fn identity_against_arrow() {
        let mut s = session();
        let (e, t) = el(&mut s, "fun x => x", Some(&nn())).unwrap();
        assert_eq!(t, nn());
        assert_eq!(e.to_string(), "(lam x nat (local x))");
    }

    #[test]
    fn untyped_binder_needs_expected_type() {
        let mut s = session();
        assert!(el(&mut s, "fun x => x", None).is_err());
        let (_, t) = el(&mut s, "fun (x : Nat) => x + 1", None).unwrap();
        assert_eq!(t, nn());
    }

    #[test]
    fn anonymous_constructor() {
        let mut s = session();
        let pnn = CoreType::prod(CoreType::Nat, CoreType::Nat);
        let (e, _) = el(&mut s, "⟨1, 2⟩", Some(&pnn)).unwrap();
        assert_eq!(
            e,
            CoreExpr::Pair(Box::new(CoreExpr::NatLit(1)), Box::new(CoreExpr::NatLit(2)))
        );
        let (e, _) = el(&mut s, "⟨⟩", Some(&CoreType::Unit)).unwrap();
        assert_eq!(e, CoreExpr::Const("Unit.unit".into()));
        let err = el(&mut s, "⟨1, 2⟩", None).unwrap_err();
        assert_eq!(err.to_string(), "expected type required");
        assert!(el(&mut s, "⟨1⟩", Some(&pnn)).is_err());
    }

    #[test]
    fn mismatch_reported() {
        let mut s = session();
        let err = el(&mut s, "1", Some(&CoreType::Unit)).unwrap_err();
        assert_eq!(err.to_string(), "type mismatch: expected unit, found nat");
    }

    #[test]
    fn checker_rejects_ill_typed() {
        let s = session();
        let bad = CoreExpr::app(CoreExpr::NatLit(1), CoreExpr::NatLit(2));
        assert!(infer_type(&s.gctx, &[], &bad).is_err());
        let add = CoreExpr::app(CoreExpr::Const("Nat.add".into()), CoreExpr::NatLit(2));
        assert_eq!(infer_type(&s.gctx, &[], &add).unwrap(), nn());
    }
}
