//! Goal-directed tactic evaluation with lazily unfolded tactic macros.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::context::LocalContext;
use crate::error::{Error, ErrorKind, Frame, Result};
use crate::expander::Session;
use crate::name::{HierName, Symbol};
use crate::scope::{MonadQuotation, ScopeState};
use crate::syntax::{kinds, render, render_name, strip_top_level_scopes, SyntaxTree};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Prop {
    Atom(HierName),
    Implies(Box<Prop>, Box<Prop>),
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop::Atom(n) => write!(f, "{}", render_name(n, &|_| false)),
            Prop::Implies(a, b) if matches!(**a, Prop::Implies(..)) => write!(f, "({a}) → {b}"),
            Prop::Implies(a, b) => write!(f, "{a} → {b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofGoal {
    pub hyps: IndexMap<Symbol, Prop>,
    pub target: Prop,
}

impl fmt::Display for ProofGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hyps: Vec<String> = self.hyps.iter().map(|(h, p)| format!("{h} : {p}")).collect();
        if !hyps.is_empty() {
            write!(f, "{} ", hyps.join(", "))?;
        }
        write!(f, "⊢ {}", self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TacticState {
    pub goals: Vec<ProofGoal>,
}

/// A procedural tactic registered for a syntax kind.
pub type TacticFn = Arc<dyn Fn(&SyntaxTree, &mut TacticCtx) -> Result<()> + Send + Sync>;

pub struct TacticCtx<'a> {
    pub session: &'a mut Session,
    pub state: TacticState,
    unfolds: usize,
}

impl MonadQuotation for TacticCtx<'_> {
    fn scope_state(&mut self) -> &mut ScopeState {
        &mut self.session.scopes
    }
}

fn failed(tactic: &str, reason: impl Into<String>, stx: &SyntaxTree) -> Error {
    Error::at(
        ErrorKind::TacticFailed {
            tactic: tactic.into(),
            reason: reason.into(),
        },
        stx.position(),
    )
}

/// Errors that `try` must not swallow.
fn is_fatal(e: &Error) -> bool {
    matches!(e.kind, ErrorKind::RepeatCapExceeded(_) | ErrorKind::DepthExceeded(_))
}

impl<'a> TacticCtx<'a> {
    pub fn new(session: &'a mut Session, state: TacticState) -> Self {
        TacticCtx {
            session,
            state,
            unfolds: 0,
        }
    }

    fn main_goal(&mut self, stx: &SyntaxTree) -> Result<&mut ProofGoal> {
        self.state
            .goals
            .first_mut()
            .ok_or_else(|| Error::at(ErrorKind::NoGoals, stx.position()))
    }

    /// Evaluates a tactic; on failure the state is left as it was.
    pub fn eval(&mut self, stx: &SyntaxTree) -> Result<()> {
        let saved = self.state.clone();
        let r = self.eval_inner(stx);
        if r.is_err() {
            self.state = saved;
        }
        r
    }

    fn trace(&mut self, stx: &SyntaxTree) {
        if self.session.config.trace_tactics {
            let goal = self
                .state
                .goals
                .first()
                .map_or("no goals".to_string(), |g| g.to_string());
            self.session.trace.push(format!("tactic {} on {goal}", render(stx)));
        }
    }

    fn eval_inner(&mut self, stx: &SyntaxTree) -> Result<()> {
        let Some(kind) = stx.kind().cloned() else {
            return Err(failed(&render(stx), "not a tactic", stx));
        };
        let k = |s: &str| stx.is_kind(s);
        if k(kinds::TACTIC_SEQ) {
            self.eval(stx.child(0))?;
            return self.eval(stx.child(2));
        }
        if k(kinds::TACTIC_PAREN) {
            return self.eval(stx.child(1));
        }
        let core = [
            kinds::INTRO,
            kinds::EXACT,
            kinds::ASSUMPTION,
            kinds::SKIP,
            kinds::FAIL,
            kinds::TRY,
        ];
        if core.iter().any(|c| k(c)) || self.session.tactics.contains_key(&kind) {
            self.trace(stx);
        }
        if k(kinds::SKIP) {
            return Ok(());
        }
        if k(kinds::FAIL) {
            return Err(failed("fail", "failed", stx));
        }
        if k(kinds::TRY) {
            return match self.eval(stx.child(1)) {
                Err(e) if is_fatal(&e) => Err(e),
                _ => Ok(()),
            };
        }
        if k(kinds::INTRO) {
            return self.intro(stx);
        }
        if k(kinds::EXACT) {
            return self.exact(stx);
        }
        if k(kinds::ASSUMPTION) {
            let g = self.main_goal(stx)?;
            if g.hyps.values().any(|p| *p == g.target) {
                self.state.goals.remove(0);
                return Ok(());
            }
            return Err(failed("assumption", "no hypothesis matches the goal", stx));
        }
        if let Some(t) = self.session.tactics.get(&kind).cloned() {
            return t(stx, self);
        }
        if self.session.has_transformer(&kind) {
            return self.unfold(stx, kind);
        }
        Err(Error::at(ErrorKind::UnknownTactic(kind), stx.position()))
    }

    /// Expands one macro step and evaluates the result; nested macro calls
    /// are only unfolded once evaluation reaches them.
    fn unfold(&mut self, stx: &SyntaxTree, kind: HierName) -> Result<()> {
        let cap = self.session.config.max_repeat;
        if self.unfolds >= cap {
            return Err(Error::at(ErrorKind::RepeatCapExceeded(cap), stx.position()));
        }
        self.unfolds += 1;
        let Some((out, scope)) = self.session.expand_macro_step(stx)? else {
            return Err(Error::at(ErrorKind::UnknownTactic(kind), stx.position()));
        };
        self.eval(&out)
            .map_err(|e| e.with_position(stx.position()).in_frame(Frame { kind, scope }))
    }

    fn intro(&mut self, stx: &SyntaxTree) -> Result<()> {
        let name = strip_top_level_scopes(stx.child(1)).map_err(|e| e.with_position(stx.position()))?;
        let g = self.main_goal(stx)?;
        let Prop::Implies(a, b) = g.target.clone() else {
            return Err(failed("intro", format!("goal {} is not an implication", g.target), stx));
        };
        if let Some(old) = g.hyps.get(&name).cloned() {
            // the shadowed hypothesis stays available, under an inaccessible name
            let hidden = inaccessible(&name, &g.hyps);
            let i = g.hyps.get_index_of(&name).unwrap();
            g.hyps.shift_remove(&name);
            g.hyps.shift_insert(i, hidden, old);
        }
        g.hyps.insert(name, *a);
        g.target = *b;
        Ok(())
    }

    fn exact(&mut self, stx: &SyntaxTree) -> Result<()> {
        let g = self.main_goal(stx)?.clone();
        let mut lctx = LocalContext::from_symbols(g.hyps.keys().cloned().collect());
        let e = self.session.expand_term(stx.child(1), &mut lctx)?;
        let Some(h) = e.ident_value().filter(|h| g.hyps.contains_key(*h)) else {
            return Err(failed("exact", format!("'{}' is not a hypothesis", render(&e)), stx));
        };
        if g.hyps[h] != g.target {
            return Err(failed(
                "exact",
                format!(
                    "'{}' proves {}, not {}",
                    render_name(h, &|_| false),
                    g.hyps[h],
                    g.target
                ),
                stx,
            ));
        }
        self.state.goals.remove(0);
        Ok(())
    }
}

fn inaccessible(name: &Symbol, hyps: &IndexMap<Symbol, Prop>) -> Symbol {
    let base = format!("{}✝", name.base());
    let mut n = 0;
    loop {
        let candidate = if n == 0 {
            HierName::atomic(base.clone())
        } else {
            HierName::atomic(format!("{base}{n}"))
        };
        if !hyps.contains_key(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

fn is_prop_sort(stx: &SyntaxTree) -> bool {
    let id = if stx.is_kind(kinds::GLOBAL_REF) {
        stx.child(0)
    } else {
        stx
    };
    id.ident_value().is_some_and(|v| v.to_string() == "Prop")
}

/// Reads a proposition from (expanded) term syntax.
pub fn prop_of(stx: &SyntaxTree) -> Result<Prop> {
    if let Some(v) = stx.ident_value() {
        return Ok(Prop::Atom(v.clone()));
    }
    if stx.is_kind(kinds::GLOBAL_REF) {
        return prop_of(stx.child(0));
    }
    if stx.is_kind(kinds::ARROW) {
        return Ok(Prop::Implies(
            Box::new(prop_of(stx.child(0))?),
            Box::new(prop_of(stx.child(2))?),
        ));
    }
    if stx.is_kind(kinds::PAREN) && stx.child(1).children().len() == 1 {
        return prop_of(&stx.child(1).children()[0]);
    }
    Err(Error::at(
        ErrorKind::Elab(format!("'{}' is not a proposition", render(stx))),
        stx.position(),
    ))
}

/// Runs the tactic proof of an expanded `theorem`; returns the statement.
pub fn prove_theorem(session: &mut Session, cmd: &SyntaxTree) -> Result<Prop> {
    let mut hyps = IndexMap::new();
    for b in cmd.child(2).children() {
        if is_prop_sort(b.child(3)) {
            continue;
        }
        hyps.insert(strip_top_level_scopes(b.child(1))?, prop_of(b.child(3))?);
    }
    let target = prop_of(cmd.child(4))?;
    let body = cmd.child(6);
    if !body.is_kind(kinds::BY) {
        return Err(Error::at(
            ErrorKind::Elab("theorem bodies must be tactic blocks".into()),
            body.position(),
        ));
    }
    let goal = ProofGoal {
        hyps,
        target: target.clone(),
    };
    let state = run_tactic(session, body.child(1), TacticState { goals: vec![goal] })?;
    if !state.goals.is_empty() {
        let gs: Vec<String> = state.goals.iter().map(|g| g.to_string()).collect();
        return Err(Error::at(ErrorKind::UnsolvedGoals(gs.join("; ")), body.position()));
    }
    Ok(target)
}

pub fn run_tactic(session: &mut Session, tac: &SyntaxTree, state: TacticState) -> Result<TacticState> {
    let mut ctx = TacticCtx::new(session, state);
    ctx.eval(tac)?;
    Ok(ctx.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_str;

    fn atom(s: &str) -> Prop {
        Prop::Atom(s.into())
    }

    fn imp(a: Prop, b: Prop) -> Prop {
        Prop::Implies(Box::new(a), Box::new(b))
    }

    fn goal(target: Prop) -> TacticState {
        TacticState {
            goals: vec![ProofGoal {
                hyps: IndexMap::new(),
                target,
            }],
        }
    }

    fn run(s: &mut Session, tac: &str, st: TacticState) -> Result<TacticState> {
        let t = parse_str(&s.tables, "tactic", tac).unwrap();
        run_tactic(s, &t, st)
    }

    #[test]
    fn intro_then_exact() {
        let mut s = Session::default();
        let st = run(&mut s, "intro h", goal(imp(atom("p"), atom("p")))).unwrap();
        assert_eq!(st.goals[0].to_string(), "h : p ⊢ p");
        let st = run(&mut s, "intro h; exact h", goal(imp(atom("p"), atom("p")))).unwrap();
        assert!(st.goals.is_empty());
    }

    #[test]
    fn failure_is_transactional() {
        let mut s = Session::default();
        let g = goal(imp(atom("p"), atom("q")));
        let st = run(&mut s, "try (intro h; fail)", g.clone()).unwrap();
        assert_eq!(st, g);
        assert!(run(&mut s, "intro h; assumption", g).is_err());
    }

    #[test]
    fn exact_on_unknown_name() {
        let mut s = Session::default();
        let e = run(&mut s, "exact h", goal(atom("p"))).unwrap_err();
        assert_eq!(e.to_string(), "unknown identifier 'h'");
    }

    #[test]
    fn shadowed_hypothesis_renamed() {
        let mut s = Session::default();
        let st = run(
            &mut s,
            "intro h; intro h",
            goal(imp(atom("p"), imp(atom("q"), atom("p")))),
        )
        .unwrap();
        assert_eq!(st.goals[0].to_string(), "h✝ : p, h : q ⊢ p");
        let st = run(&mut s, "assumption", st).unwrap();
        assert!(st.goals.is_empty());
    }

    #[test]
    fn no_goals() {
        let mut s = Session::default();
        let e = run(&mut s, "assumption; intro h", goal(imp(atom("p"), atom("p")))).unwrap_err();
        assert!(matches!(e.kind, ErrorKind::TacticFailed { .. }));
        let e = run(&mut s, "skip", TacticState::default());
        assert!(e.is_ok());
        let e = run(&mut s, "intro h", TacticState::default()).unwrap_err();
        assert_eq!(e.kind, ErrorKind::NoGoals);
    }
}
