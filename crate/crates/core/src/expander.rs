//! The recursive hygienic expander and per-command processing.

use std::sync::Arc;

use indexmap::IndexMap;

use crate::context::{Decl, DeclKind, GlobalContext, LocalContext};
use crate::elab::{self, Elaborator};
use crate::error::{Error, ErrorKind, Frame, Result};
use crate::name::{HierName, MacroScope, Symbol};
use crate::parser::ParserTables;
use crate::precheck::{self, PrecheckHook};
use crate::quotation::{self, make_rule_transformer, pattern_of_quotation, pattern_vars, RuleAlt, RuleRhs};
use crate::scope::{MonadQuotation, ScopeState};
use crate::syntax::{kinds, render, strip_top_level_scopes, SyntaxTree};
use crate::tactic::TacticFn;

/// What a transformer sees while it runs: read access to the global state
/// and the macro-scope state of its invocation.
pub struct MacroEnv<'a> {
    pub gctx: &'a GlobalContext,
    pub tables: &'a ParserTables,
    pub scopes: &'a mut ScopeState,
    pub notation_precheck: bool,
}

impl MonadQuotation for MacroEnv<'_> {
    fn scope_state(&mut self) -> &mut ScopeState {
        self.scopes
    }
}

/// A syntax transformer; `Ok(None)` means its patterns did not match.
pub type Transformer = Arc<dyn Fn(&SyntaxTree, &mut MacroEnv) -> Result<Option<SyntaxTree>> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stage {
    #[default]
    Expand,
    Elaborate,
}

#[derive(Debug, Clone)]
pub struct ExpanderConfig {
    pub stage: Stage,
    pub max_depth: usize,
    pub max_repeat: usize,
    pub notation_precheck: bool,
    pub trace_expansion: bool,
    pub trace_tactics: bool,
}

impl Default for ExpanderConfig {
    fn default() -> Self {
        ExpanderConfig {
            stage: Stage::Expand,
            max_depth: 512,
            max_repeat: 1024,
            notation_precheck: true,
            trace_expansion: false,
            trace_tactics: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Local(Symbol),
    Global(Symbol),
    Overloaded(Vec<Symbol>),
}

/// The result of processing one core command.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub expanded: SyntaxTree,
    /// Rendered elaboration result at the elaborate stage.
    pub elaborated: Option<String>,
}

/// All state threaded through a run.
#[derive(Clone)]
pub struct Session {
    pub tables: ParserTables,
    pub gctx: GlobalContext,
    pub scopes: ScopeState,
    pub config: ExpanderConfig,
    transformers: IndexMap<HierName, Vec<Transformer>>,
    pub(crate) elaborators: IndexMap<HierName, Elaborator>,
    pub(crate) precheck_hooks: IndexMap<HierName, PrecheckHook>,
    pub(crate) tactics: IndexMap<HierName, TacticFn>,
    /// Anonymous-constructor table: type head to constructor and arity.
    pub anon_ctors: IndexMap<&'static str, (HierName, usize)>,
    /// Trace lines in emission order; drained by the driver.
    pub trace: Vec<String>,
    depth: usize,
}

impl Default for Session {
    fn default() -> Self {
        Session::new(ExpanderConfig::default())
    }
}

impl Session {
    pub fn new(config: ExpanderConfig) -> Self {
        let mut s = Session {
            tables: ParserTables::default(),
            gctx: GlobalContext::default(),
            scopes: ScopeState::default(),
            config,
            transformers: IndexMap::new(),
            elaborators: IndexMap::new(),
            precheck_hooks: IndexMap::new(),
            tactics: IndexMap::new(),
            anon_ctors: IndexMap::from([
                ("Prod", (HierName::from_dotted("Prod.mk"), 2)),
                ("Unit", (HierName::from_dotted("Unit.unit"), 0)),
            ]),
            trace: Vec::new(),
            depth: 0,
        };
        for (kind, hook) in precheck::builtin_hooks() {
            s.precheck_hooks.insert(HierName::atomic(kind), hook);
        }
        s.elaborators
            .insert(HierName::atomic(kinds::ANON_CTOR), Arc::new(elab::elab_anonymous_ctor));
        s
    }

    /// Adds a transformer for `kind`, tried before all earlier ones.
    pub fn register_transformer(&mut self, kind: HierName, t: Transformer) {
        self.transformers.entry(kind).or_default().insert(0, t);
    }

    pub fn has_transformer(&self, kind: &HierName) -> bool {
        self.transformers.get(kind).is_some_and(|v| !v.is_empty())
    }

    pub fn register_elaborator(&mut self, kind: HierName, e: Elaborator) {
        self.elaborators.insert(kind, e);
    }

    /// Registers or replaces the precheck hook of `kind`.
    pub fn register_precheck_hook(&mut self, kind: HierName, h: PrecheckHook) {
        self.precheck_hooks.insert(kind, h);
    }

    pub fn register_tactic(&mut self, kind: HierName, t: TacticFn) {
        self.tactics.insert(kind, t);
    }

    pub fn declare_builtin(&mut self, name: &str, kind: DeclKind, ty: Option<elab::CoreType>) -> Result<()> {
        self.gctx.add(HierName::from_dotted(name), Decl { kind, ty })
    }

    /// Resolves an identifier in reference position.
    pub fn resolve(&self, id: &SyntaxTree, lctx: &LocalContext) -> Result<Resolution> {
        let SyntaxTree::Ident {
            raw,
            value,
            preresolved,
            info,
        } = id
        else {
            return Err(ErrorKind::NotAnIdentifier(render(id)).into());
        };
        if lctx.contains(value) {
            return Ok(Resolution::Local(value.clone()));
        }
        let mut cands = preresolved.clone();
        for g in self.gctx.matching(value) {
            if !cands.contains(&g) {
                cands.push(g);
            }
        }
        match cands.len() {
            0 => Err(Error::at(ErrorKind::UnknownIdentifier(raw.clone()), info.position())),
            1 => Ok(Resolution::Global(cands.pop().unwrap())),
            _ => Ok(Resolution::Overloaded(cands)),
        }
    }

    /// The expanded form of a reference.
    fn reference(&self, id: &SyntaxTree, lctx: &LocalContext) -> Result<SyntaxTree> {
        Ok(match self.resolve(id, lctx)? {
            Resolution::Local(s) => with_value(id, s),
            Resolution::Global(g) => SyntaxTree::node(kinds::GLOBAL_REF, vec![with_value(id, g)]),
            Resolution::Overloaded(gs) => {
                SyntaxTree::node(kinds::CHOICE, gs.into_iter().map(|g| with_value(id, g)).collect())
            }
        })
    }

    /// One macro step: the newest matching transformer of `stx`'s kind, run
    /// under a fresh scope. `Ok(None)` if the kind has no transformers.
    pub fn expand_macro_step(&mut self, stx: &SyntaxTree) -> Result<Option<(SyntaxTree, Option<MacroScope>)>> {
        let Some(kind) = stx.kind().cloned() else {
            return Ok(None);
        };
        let Some(ts) = self.transformers.get(&kind).cloned() else {
            return Ok(None);
        };
        let gctx = &self.gctx;
        let tables = &self.tables;
        let notation_precheck = self.config.notation_precheck;
        let (res, scope) = self.scopes.with_fresh(|scopes| -> Result<Option<SyntaxTree>> {
            let mut env = MacroEnv {
                gctx,
                tables,
                scopes,
                notation_precheck,
            };
            for t in &ts {
                if let Some(out) = t(stx, &mut env)? {
                    return Ok(Some(out));
                }
            }
            Ok(None)
        });
        let frame = Frame {
            kind: kind.clone(),
            scope,
        };
        match res {
            Ok(Some(out)) => {
                if self.config.trace_expansion {
                    self.trace.push(format!("{kind}: {} ==> {}", render(stx), render(&out)));
                }
                Ok(Some((out, scope)))
            }
            Ok(None) => Err(Error::at(ErrorKind::NoMatch(kind), stx.position()).in_frame(frame)),
            Err(e) => Err(e.with_position(stx.position()).in_frame(frame)),
        }
    }

    /// Runs a macro step and continues with `then` on its output, attributing
    /// errors to the invocation.
    fn via_macro<T>(
        &mut self,
        stx: &SyntaxTree,
        then: impl FnOnce(&mut Self, SyntaxTree) -> Result<T>,
    ) -> Result<Option<T>> {
        if self.depth >= self.config.max_depth {
            return Err(Error::at(
                ErrorKind::DepthExceeded(self.config.max_depth),
                stx.position(),
            ));
        }
        let Some((out, scope)) = self.expand_macro_step(stx)? else {
            return Ok(None);
        };
        let kind = stx.kind().cloned().unwrap_or_default();
        self.depth += 1;
        let r = then(self, out);
        self.depth -= 1;
        r.map(Some)
            .map_err(|e| e.with_position(stx.position()).in_frame(Frame { kind, scope }))
    }

    /// Fully expands a term.
    pub fn expand_term(&mut self, stx: &SyntaxTree, lctx: &mut LocalContext) -> Result<SyntaxTree> {
        let SyntaxTree::Node { kind, children } = stx else {
            return match stx {
                SyntaxTree::Ident { .. } => self.reference(stx, lctx),
                other => Ok(other.clone()),
            };
        };
        let k = |s: &str| stx.is_kind(s);
        if k(kinds::NUM) || k(kinds::STR) || k(kinds::HOLE) || k(kinds::GLOBAL_REF) || k(kinds::CHOICE) || k(kinds::BY)
        {
            return Ok(stx.clone());
        }
        if stx.is_antiquot_like() {
            return Err(Error::at(
                ErrorKind::Shape("antiquotation outside of a quotation".into()),
                stx.position(),
            ));
        }
        if k(kinds::FUN) && stx.child(1).children().len() == 1 {
            return self.expand_fun(stx, lctx);
        }
        if k(kinds::APP) {
            let f = self.expand_term(stx.child(0), lctx)?;
            let args = stx
                .child(1)
                .children()
                .iter()
                .map(|a| self.expand_term(a, lctx))
                .collect::<Result<_>>()?;
            return Ok(SyntaxTree::node(kinds::APP, vec![f, SyntaxTree::null(args)]));
        }
        if k(kinds::PLUS) || k(kinds::ARROW) {
            let l = self.expand_term(stx.child(0), lctx)?;
            let r = self.expand_term(stx.child(2), lctx)?;
            return Ok(SyntaxTree::node(kind.clone(), vec![l, stx.child(1).clone(), r]));
        }
        if k(kinds::MATCH) {
            return self.expand_match(stx, lctx);
        }
        if k(kinds::QUOT) || k(kinds::DQUOT) {
            let t = quotation::process_quotation(stx, &self.gctx, &self.tables)?;
            if t.double {
                precheck::precheck_template(self, &t)?;
            }
            return Ok(t.to_syntax());
        }
        if let Some(r) = self.via_macro(stx, |s, out| s.expand_term(&out, lctx))? {
            return Ok(r);
        }
        if k(kinds::FUN) {
            // multi-binder `fun` without a currying macro
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
            return self.expand_term(&body, lctx);
        }
        if k(kinds::PAREN) && stx.child(1).children().len() == 1 {
            return self.expand_term(&stx.child(1).children()[0], lctx);
        }
        if self.elaborators.contains_key(kind) {
            let children = children
                .iter()
                .map(|c| self.expand_children_generic(c, lctx))
                .collect::<Result<_>>()?;
            return Ok(SyntaxTree::node(kind.clone(), children));
        }
        Err(Error::at(ErrorKind::NoTransformer(kind.clone()), stx.position()))
    }

    fn expand_children_generic(&mut self, c: &SyntaxTree, lctx: &mut LocalContext) -> Result<SyntaxTree> {
        match c {
            SyntaxTree::Atom { .. } | SyntaxTree::Missing => Ok(c.clone()),
            _ if c.is_kind(kinds::NULL) => {
                let items = c
                    .children()
                    .iter()
                    .map(|i| self.expand_children_generic(i, lctx))
                    .collect::<Result<_>>()?;
                Ok(SyntaxTree::null(items))
            }
            _ => self.expand_term(c, lctx),
        }
    }

    /// Binder symbol (top-level scopes discarded) and the expanded binder.
    fn expand_binder(&mut self, b: &SyntaxTree, lctx: &mut LocalContext) -> Result<(Option<Symbol>, SyntaxTree)> {
        if b.is_ident() {
            let sym = strip_top_level_scopes(b)?;
            return Ok((Some(sym.clone()), with_value(b, sym)));
        }
        if b.is_kind(kinds::HOLE) {
            return Ok((None, b.clone()));
        }
        if b.is_kind(kinds::TYPED_BINDER) {
            let id = b.child(1);
            let sym = strip_top_level_scopes(id).map_err(|e| e.with_position(b.position()))?;
            let ty = self.expand_term(b.child(3), lctx)?;
            let mut ch = b.children().to_vec();
            ch[1] = with_value(id, sym.clone());
            ch[3] = ty;
            return Ok((Some(sym), SyntaxTree::node(kinds::TYPED_BINDER, ch)));
        }
        Err(Error::at(ErrorKind::NotAnIdentifier(render(b)), b.position()))
    }

    fn expand_fun(&mut self, stx: &SyntaxTree, lctx: &mut LocalContext) -> Result<SyntaxTree> {
        let (sym, binder) = self.expand_binder(&stx.child(1).children()[0], lctx)?;
        let n = lctx.len();
        if let Some(s) = sym {
            lctx.push(s);
        }
        let body = self.expand_term(stx.child(3), lctx);
        lctx.truncate(n);
        Ok(SyntaxTree::node(
            kinds::FUN,
            vec![
                stx.child(0).clone(),
                SyntaxTree::null(vec![binder]),
                stx.child(2).clone(),
                body?,
            ],
        ))
    }

    fn expand_match(&mut self, stx: &SyntaxTree, lctx: &mut LocalContext) -> Result<SyntaxTree> {
        let discrs = self.expand_children_generic(stx.child(1), lctx)?;
        let mut alts = Vec::new();
        for alt in stx.child(3).children() {
            if !alt.is_kind(kinds::MATCH_ALT) {
                return Err(Error::at(
                    ErrorKind::Shape(format!("unexpected match alternative '{alt}'")),
                    alt.position(),
                ));
            }
            let n = lctx.len();
            let mut bound = Vec::new();
            let pats = alt
                .child(1)
                .children()
                .iter()
                .map(|p| match p {
                    SyntaxTree::Atom { .. } => Ok(p.clone()),
                    _ => self.expand_pattern(p, lctx, &mut bound),
                })
                .collect::<Result<Vec<_>>>();
            let pats = match pats {
                Ok(p) => p,
                Err(e) => {
                    lctx.truncate(n);
                    return Err(e);
                }
            };
            for b in bound {
                lctx.push(b);
            }
            let rhs = self.expand_term(alt.child(3), lctx);
            lctx.truncate(n);
            alts.push(SyntaxTree::node(
                kinds::MATCH_ALT,
                vec![alt.child(0).clone(), SyntaxTree::null(pats), alt.child(2).clone(), rhs?],
            ));
        }
        Ok(SyntaxTree::node(
            kinds::MATCH,
            vec![
                stx.child(0).clone(),
                discrs,
                stx.child(2).clone(),
                SyntaxTree::null(alts),
            ],
        ))
    }

    /// Patterns: identifiers naming globals are constructor references;
    /// all other identifiers are pattern variables.
    fn expand_pattern(&mut self, p: &SyntaxTree, lctx: &LocalContext, bound: &mut Vec<Symbol>) -> Result<SyntaxTree> {
        match p {
            SyntaxTree::Ident { .. } => match self.resolve(p, &LocalContext::default()) {
                Ok(Resolution::Global(_)) | Ok(Resolution::Overloaded(_)) => {
                    self.reference(p, &LocalContext::default())
                }
                _ => {
                    let sym = strip_top_level_scopes(p)?;
                    bound.push(sym.clone());
                    Ok(with_value(p, sym))
                }
            },
            _ if p.is_kind(kinds::APP) => {
                let head = self.reference(p.child(0), lctx)?;
                let args = p
                    .child(1)
                    .children()
                    .iter()
                    .map(|a| self.expand_pattern(a, lctx, bound))
                    .collect::<Result<_>>()?;
                Ok(SyntaxTree::node(kinds::APP, vec![head, SyntaxTree::null(args)]))
            }
            _ if p.is_kind(kinds::PAREN) && p.child(1).children().len() == 1 => {
                self.expand_pattern(&p.child(1).children()[0], lctx, bound)
            }
            _ if p.is_kind(kinds::NUM) || p.is_kind(kinds::HOLE) || p.is_kind(kinds::STR) => Ok(p.clone()),
            SyntaxTree::Node { kind, .. } if self.has_transformer(kind) => {
                let Some((out, _)) = self.expand_macro_step(p)? else {
                    unreachable!()
                };
                self.expand_pattern(&out, lctx, bound)
            }
            _ => Err(Error::at(
                ErrorKind::Shape(format!("unsupported pattern '{p}'")),
                p.position(),
            )),
        }
    }

    /// Processes one command, including every command a macro expands to,
    /// each entering the global context before the next is processed.
    pub fn process_command(&mut self, stx: &SyntaxTree) -> Result<Vec<CommandOutput>> {
        let mut out = Vec::new();
        self.process_into(stx, &mut out)?;
        Ok(out)
    }

    fn process_into(&mut self, stx: &SyntaxTree, out: &mut Vec<CommandOutput>) -> Result<()> {
        let k = |s: &str| stx.is_kind(s);
        if k(kinds::COMMAND_SEQ) {
            for c in stx.children() {
                self.process_into(c, out)?;
            }
            return Ok(());
        }
        let expanded = if k(kinds::DEF) {
            self.process_def(stx)?
        } else if k(kinds::THEOREM) {
            self.process_theorem(stx)?
        } else if k(kinds::AXIOM) {
            let name = strip_top_level_scopes(stx.child(1)).map_err(|e| e.with_position(stx.position()))?;
            let ty = self.expand_term(stx.child(3), &mut LocalContext::default())?;
            self.add_global(stx, name.clone(), DeclKind::Axiom)?;
            let mut ch = stx.children().to_vec();
            ch[1] = with_value(stx.child(1), name);
            ch[3] = ty;
            SyntaxTree::node(kinds::AXIOM, ch)
        } else if k(kinds::SYNTAX) {
            let (cat, rule) =
                ParserTables::rule_from_syntax_command(stx).map_err(|e| e.with_position(stx.position()))?;
            self.tables
                .register_rule(&cat, rule)
                .map_err(|e| e.with_position(stx.position()))?;
            stx.clone()
        } else if k(kinds::MACRO_RULES) {
            self.process_macro_rules(stx)?
        } else if k(kinds::DECLARE_CAT) {
            let name = strip_top_level_scopes(stx.child(1))?.base();
            self.tables
                .declare_category(name)
                .map_err(|e| e.with_position(stx.position()))?;
            stx.clone()
        } else {
            let mut inner = Vec::new();
            let r = self.via_macro(stx, |s, cmd| s.process_into(&cmd, &mut inner))?;
            out.append(&mut inner);
            return match r {
                Some(()) => Ok(()),
                None => Err(Error::at(
                    ErrorKind::NoTransformer(stx.kind().cloned().unwrap_or_default()),
                    stx.position(),
                )),
            };
        };
        let elaborated = match self.config.stage {
            Stage::Elaborate => elab::elab_command(self, &expanded)?,
            Stage::Expand => None,
        };
        out.push(CommandOutput { expanded, elaborated });
        Ok(())
    }

    fn add_global(&mut self, stx: &SyntaxTree, name: Symbol, kind: DeclKind) -> Result<()> {
        self.gctx
            .add(name, Decl { kind, ty: None })
            .map_err(|e| e.with_position(stx.child(1).position().or(stx.position())))
    }

    fn process_def(&mut self, stx: &SyntaxTree) -> Result<SyntaxTree> {
        let name = strip_top_level_scopes(stx.child(1)).map_err(|e| e.with_position(stx.position()))?;
        let mut lctx = LocalContext::default();
        let ty = self.expand_children_generic(stx.child(2), &mut lctx)?;
        let body = self.expand_term(stx.child(4), &mut lctx)?;
        self.add_global(stx, name.clone(), DeclKind::Def)?;
        let mut ch = stx.children().to_vec();
        ch[1] = with_value(stx.child(1), name);
        ch[2] = ty;
        ch[4] = body;
        Ok(SyntaxTree::node(kinds::DEF, ch))
    }

    fn process_theorem(&mut self, stx: &SyntaxTree) -> Result<SyntaxTree> {
        let name = strip_top_level_scopes(stx.child(1)).map_err(|e| e.with_position(stx.position()))?;
        let mut lctx = LocalContext::default();
        let mut binders = Vec::new();
        for b in stx.child(2).children() {
            let (sym, eb) = self.expand_binder(b, &mut lctx)?;
            if let Some(s) = sym {
                lctx.push(s);
            }
            binders.push(eb);
        }
        let ty = self.expand_term(stx.child(4), &mut lctx)?;
        let body = self.expand_term(stx.child(6), &mut lctx)?;
        self.add_global(stx, name.clone(), DeclKind::Theorem)?;
        let mut ch = stx.children().to_vec();
        ch[1] = with_value(stx.child(1), name);
        ch[2] = SyntaxTree::null(binders);
        ch[4] = ty;
        ch[6] = body;
        Ok(SyntaxTree::node(kinds::THEOREM, ch))
    }

    /// Registers one transformer per pattern kind; returns the command with
    /// processed right-hand sides.
    fn process_macro_rules(&mut self, stx: &SyntaxTree) -> Result<SyntaxTree> {
        let mut groups: IndexMap<HierName, Vec<RuleAlt>> = IndexMap::new();
        let mut printed = Vec::new();
        for alt in stx.child(1).children() {
            let at = |e: Error| e.with_position(alt.position());
            let (kind, pattern) = pattern_of_quotation(alt.child(1)).map_err(at)?;
            let rhs_stx = alt.child(3);
            let (rhs, shown) = if rhs_stx.is_kind(kinds::QUOT) || rhs_stx.is_kind(kinds::DQUOT) {
                let t = quotation::process_quotation(rhs_stx, &self.gctx, &self.tables).map_err(at)?;
                if t.double {
                    precheck::precheck_template(self, &t).map_err(|e| e.with_position(rhs_stx.position()))?;
                }
                let shown = t.to_syntax();
                (RuleRhs::Template(t), shown)
            } else if let Some(v) = rhs_stx
                .ident_value()
                .filter(|v| pattern_vars(&pattern).contains(&v.to_string()))
            {
                (RuleRhs::Var(v.to_string()), rhs_stx.clone())
            } else {
                return Err(Error::at(
                    ErrorKind::UnsupportedRhs(format!("'{rhs_stx}' (expected a quotation or a pattern variable)")),
                    rhs_stx.position().or(alt.position()),
                ));
            };
            groups.entry(kind).or_default().push(RuleAlt { pattern, rhs });
            let mut ch = alt.children().to_vec();
            ch[3] = shown;
            printed.push(SyntaxTree::node(kinds::MACRO_RULES_ALT, ch));
        }
        for (kind, alts) in groups {
            self.register_transformer(kind, make_rule_transformer(alts));
        }
        Ok(SyntaxTree::node(
            kinds::MACRO_RULES,
            vec![stx.child(0).clone(), SyntaxTree::null(printed)],
        ))
    }
}

/// `id` with a new value and no top-level scopes.
fn with_value(id: &SyntaxTree, value: HierName) -> SyntaxTree {
    match id {
        SyntaxTree::Ident { info, raw, .. } => SyntaxTree::Ident {
            info: *info,
            raw: raw.clone(),
            value,
            preresolved: Vec::new(),
        },
        _ => SyntaxTree::ident(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_str;

    fn session(globals: &[&str]) -> Session {
        let mut s = Session::default();
        for g in globals {
            s.declare_builtin(g, DeclKind::Def, None).unwrap();
        }
        s
    }

    fn run(s: &mut Session, src: &str) -> Vec<String> {
        let mut lines = Vec::new();
        let mut offset = 0;
        loop {
            let tables = s.tables.clone();
            let mut p = crate::parser::Parser::new(src, offset, &tables);
            let Some(cmd) = p.parse_command().unwrap() else { break };
            offset = p.offset();
            for o in s.process_command(&cmd).unwrap() {
                lines.push(render(&o.expanded));
            }
        }
        lines
    }

    fn ident(s: &str) -> SyntaxTree {
        SyntaxTree::ident_str(s)
    }

    #[test]
    fn resolution_rules() {
        let s = session(&["x"]);
        let x1 = HierName::from_dotted("x").add_macro_scope(MacroScope(1));
        let lctx = LocalContext::from_symbols(vec![x1.clone()]);
        assert_eq!(s.resolve(&ident("x"), &lctx).unwrap(), Resolution::Global("x".into()));
        let scoped = SyntaxTree::Ident {
            info: Default::default(),
            raw: "x".into(),
            value: x1.clone(),
            preresolved: vec!["x".into()],
        };
        assert_eq!(s.resolve(&scoped, &lctx).unwrap(), Resolution::Local(x1));
        let e = s.resolve(&ident("z"), &LocalContext::default()).unwrap_err();
        assert_eq!(e.to_string(), "unknown identifier 'z'");
    }

    #[test]
    fn overloaded_reference() {
        let s = session(&["a.a", "b.a"]);
        let r = s.reference(&ident("a"), &LocalContext::default()).unwrap();
        assert_eq!(render(&r), "(choice a.a b.a)");
    }

    #[test]
    fn const_program() {
        let mut s = session(&[]);
        s.config.trace_expansion = true;
        let src = "def x := 1\ndef e := fun y => x\nsyntax \"const\" term : term\nmacro_rules\n  | `(const $e) => `(fun x => $e)\ndef y := const x";
        let lines = run(&mut s, src);
        assert_eq!(lines[1], "def e := fun y => x");
        assert_eq!(lines[3], "macro_rules | `(const $e) => `(fun x{x} => $e)");
        assert_eq!(lines[4], "def y := fun x.1 => x");
        assert_eq!(s.trace, vec!["term_const_: const x ==> fun x.1{x} => x"]);
    }

    #[test]
    fn fun_unchanged_and_unbound() {
        let mut s = session(&["x"]);
        let t = parse_str(&s.tables, "term", "fun y => x").unwrap();
        let out = s.expand_term(&t, &mut LocalContext::default()).unwrap();
        assert_eq!(render(&out), "fun y => x");
        assert!(out.child(3).is_kind(kinds::GLOBAL_REF));
        let bad = parse_str(&s.tables, "term", "fun y => z").unwrap();
        let e = s.expand_term(&bad, &mut LocalContext::default()).unwrap_err();
        assert_eq!(e.to_string(), "unknown identifier 'z'");
        assert_eq!(e.position.unwrap().column, 10);
    }

    #[test]
    fn redefinition_error() {
        let mut s = session(&[]);
        let d = parse_str(&s.tables, "command", "def x := 1").unwrap();
        s.process_command(&d).unwrap();
        let e = s.process_command(&d).unwrap_err();
        assert!(matches!(e.kind, ErrorKind::Redefinition(_)));
    }

    #[test]
    fn newest_rule_first_with_fallback() {
        let mut s = session(&["le", "mem", "xs", "y"]);
        let src = "syntax term \" ∪ \" term : term\n\
                   macro_rules | `($a ∪ $b) => `(le $a $b)\n\
                   syntax \"s[\" term \"]\" : term\n\
                   macro_rules | `(s[$a] ∪ $b) => `(mem $a $b)\n\
                   def r1 := xs ∪ y\ndef r2 := s[xs] ∪ y";
        let lines = run(&mut s, src);
        assert_eq!(lines[4], "def r1 := le xs y");
        assert_eq!(lines[5], "def r2 := mem xs y");
    }

    #[test]
    fn depth_guard() {
        let mut s = session(&[]);
        s.config.max_depth = 16;
        let src = "syntax \"loop\" : term\nmacro_rules | `(loop) => `(loop)\n";
        run(&mut s, src);
        let t = parse_str(&s.tables, "term", "loop").unwrap();
        let e = s.expand_term(&t, &mut LocalContext::default()).unwrap_err();
        assert!(matches!(e.kind, ErrorKind::DepthExceeded(16)));
        assert_eq!(e.frames.len(), 16);
    }

    #[test]
    fn unsupported_rhs() {
        let mut s = session(&[]);
        let src = "syntax \"k\" term : term\nmacro_rules | `(k $e) => foo";
        let tables = s.tables.clone();
        let mut p = crate::parser::Parser::new(src, 0, &tables);
        let c = p.parse_command().unwrap().unwrap();
        s.process_command(&c).unwrap();
        let off = p.offset();
        let tables = s.tables.clone();
        let mut p = crate::parser::Parser::new(src, off, &tables);
        let c = p.parse_command().unwrap().unwrap();
        assert!(matches!(
            s.process_command(&c).unwrap_err().kind,
            ErrorKind::UnsupportedRhs(_)
        ));
    }
}
