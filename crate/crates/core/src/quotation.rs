//! Syntax quotations: declaration-time processing, instantiation under the
//! current macro scope, pattern matching with splices, and the rule
//! transformers built from `macro_rules`.

use std::sync::Arc;

use indexmap::IndexMap;

use crate::context::GlobalContext;
use crate::error::{Error, ErrorKind, Result};
use crate::expander::{MacroEnv, Transformer};
use crate::name::{HierName, MacroScope};
use crate::parser::ParserTables;
use crate::scope::ScopeState;
use crate::syntax::{is_simple_kind, kinds, SourceInfo, SyntaxTree};

/// A processed quotation: captured identifiers carry their preresolved
/// globals; antiquotation nodes are the holes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotationTemplate {
    /// Explicit category prefix, empty when implicit.
    pub category: String,
    pub double: bool,
    pub body: SyntaxTree,
}

impl QuotationTemplate {
    /// The template as a quotation node again, for printing.
    pub fn to_syntax(&self) -> SyntaxTree {
        SyntaxTree::node(
            if self.double { kinds::DQUOT } else { kinds::QUOT },
            vec![SyntaxTree::atom(self.category.clone()), self.body.clone()],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Tree(SyntaxTree),
    SepSeq {
        elems: Vec<SyntaxTree>,
        sep: String,
    },
    Seq(Vec<SyntaxTree>),
    /// Element-wise captures of a nested splice.
    SeqOf(Vec<Payload>),
}

impl Payload {
    /// Plain elements, dropping separators.
    pub fn elems(&self) -> Option<Vec<SyntaxTree>> {
        match self {
            Payload::Tree(t) if t.is_kind(kinds::NULL) => Some(t.children().to_vec()),
            Payload::Tree(t) => Some(vec![t.clone()]),
            Payload::Seq(v) | Payload::SepSeq { elems: v, .. } => Some(v.clone()),
            Payload::SeqOf(_) => None,
        }
    }

    /// Elements interleaved with `sep` atoms (no separators when empty).
    pub fn with_separator(&self, sep: &str) -> Option<Vec<SyntaxTree>> {
        Some(interleave(self.elems()?, sep))
    }
}

fn interleave(elems: Vec<SyntaxTree>, sep: &str) -> Vec<SyntaxTree> {
    if sep.is_empty() {
        return elems;
    }
    let mut out = Vec::with_capacity(elems.len() * 2);
    for (i, e) in elems.into_iter().enumerate() {
        if i > 0 {
            out.push(SyntaxTree::atom(sep));
        }
        out.push(e);
    }
    out
}

pub type MatchEnv = IndexMap<String, Payload>;

/// Splits `a , b , c` into elements, or `None` if separators are misplaced.
fn split_sep(seq: &[SyntaxTree], sep: &str) -> Option<Vec<SyntaxTree>> {
    if seq.is_empty() {
        return Some(Vec::new());
    }
    if seq.len().is_multiple_of(2) {
        return None;
    }
    let mut out = Vec::new();
    for (i, s) in seq.iter().enumerate() {
        if i % 2 == 1 {
            if s.atom_value() != Some(sep) {
                return None;
            }
        } else {
            out.push(s.clone());
        }
    }
    Some(out)
}

fn antiquot_var(node: &SyntaxTree) -> Result<String> {
    match node.child(0) {
        SyntaxTree::Ident { value, .. } => Ok(value.to_string()),
        other => Err(ErrorKind::UnsupportedRhs(format!("antiquotation payload '{other}' is not a variable")).into()),
    }
}

fn antiquot_cat(node: &SyntaxTree) -> &str {
    node.child(1).atom_value().unwrap_or("")
}

/// Annotates captured identifiers in `q` (a `quot`/`dquot` node) with the
/// globals they may refer to in `gctx`.
pub fn process_quotation(q: &SyntaxTree, gctx: &GlobalContext, tables: &ParserTables) -> Result<QuotationTemplate> {
    let double = q.is_kind(kinds::DQUOT);
    if !double && !q.is_kind(kinds::QUOT) {
        return Err(ErrorKind::Shape(format!("expected a quotation, found '{q}'")).into());
    }
    Ok(QuotationTemplate {
        category: q.child(0).atom_value().unwrap_or("").to_string(),
        double,
        body: annotate(q.child(1), gctx, tables)?,
    })
}

fn check_cat(node: &SyntaxTree, tables: &ParserTables) -> Result<()> {
    let cat = antiquot_cat(node);
    if cat.is_empty() || cat == kinds::MATCH_ALT || tables.has_category(&HierName::from_dotted(cat)) {
        Ok(())
    } else {
        Err(ErrorKind::UnknownAntiquotCategory(cat.to_string()).into())
    }
}

fn annotate(stx: &SyntaxTree, gctx: &GlobalContext, tables: &ParserTables) -> Result<SyntaxTree> {
    Ok(match stx {
        SyntaxTree::Ident {
            info,
            raw,
            value,
            preresolved,
        } => {
            let mut pre = preresolved.clone();
            for g in gctx.matching(value) {
                if !pre.contains(&g) {
                    pre.push(g);
                }
            }
            SyntaxTree::Ident {
                info: *info,
                raw: raw.clone(),
                value: value.clone(),
                preresolved: pre,
            }
        }
        SyntaxTree::Node { kind, children } => {
            if stx.is_kind(kinds::ANTIQUOT) || stx.is_kind(kinds::SPLICE) {
                check_cat(stx, tables)?;
                return Ok(stx.clone());
            }
            SyntaxTree::Node {
                kind: kind.clone(),
                children: children
                    .iter()
                    .map(|c| annotate(c, gctx, tables))
                    .collect::<Result<_>>()?,
            }
        }
        other => other.clone(),
    })
}

/// Variables bound by a pattern, in order of first occurrence.
pub fn pattern_vars(p: &SyntaxTree) -> Vec<String> {
    fn go(p: &SyntaxTree, out: &mut Vec<String>) {
        if p.is_kind(kinds::ANTIQUOT) || p.is_kind(kinds::SPLICE) {
            if let Some(v) = p.child(0).ident_value() {
                let v = v.to_string();
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            return;
        }
        for c in p.children() {
            go(c, out);
        }
    }
    let mut out = Vec::new();
    go(p, &mut out);
    out
}

fn cat_accepts(cat: &str, s: &SyntaxTree) -> bool {
    match cat {
        _ if matches!(s, SyntaxTree::Missing) => false,
        "" | "term" => true,
        "ident" => s.is_ident(),
        "num" => s.is_kind(kinds::NUM),
        "str" => s.is_kind(kinds::STR),
        c if c == kinds::MATCH_ALT => s.is_kind(kinds::MATCH_ALT),
        _ => true,
    }
}

/// Matches a pattern body against `stx`. Identifiers compare by surface
/// spelling, atoms by value.
pub fn match_pattern(p: &SyntaxTree, stx: &SyntaxTree) -> Option<MatchEnv> {
    let mut env = MatchEnv::new();
    match_tree(p, stx, &mut env).then_some(env)
}

fn match_tree(p: &SyntaxTree, s: &SyntaxTree, env: &mut MatchEnv) -> bool {
    match p {
        SyntaxTree::Node { .. } if p.is_kind(kinds::ANTIQUOT) => {
            if !cat_accepts(antiquot_cat(p), s) {
                return false;
            }
            match antiquot_var(p) {
                Ok(v) => {
                    env.insert(v, Payload::Tree(s.clone()));
                    true
                }
                Err(_) => false,
            }
        }
        SyntaxTree::Node { kind, children } => match s {
            SyntaxTree::Node { kind: k2, children: c2 } => kind == k2 && match_seq(children, c2, env),
            _ => false,
        },
        SyntaxTree::Ident { raw, .. } => matches!(s, SyntaxTree::Ident { raw: r, .. } if r == raw),
        SyntaxTree::Atom { value, .. } => s.atom_value() == Some(value.as_str()),
        SyntaxTree::Missing => matches!(s, SyntaxTree::Missing),
    }
}

fn match_seq(ps: &[SyntaxTree], ss: &[SyntaxTree], env: &mut MatchEnv) -> bool {
    let Some(i) = ps
        .iter()
        .position(|p| p.is_kind(kinds::SPLICE) || p.is_kind(kinds::NESTED))
    else {
        return ps.len() == ss.len() && ps.iter().zip(ss).all(|(p, s)| match_tree(p, s, env));
    };
    let suffix = ps.len() - i - 1;
    if ss.len() < i + suffix {
        return false;
    }
    let mid_end = ss.len() - suffix;
    if !ps[..i].iter().zip(&ss[..i]).all(|(p, s)| match_tree(p, s, env)) {
        return false;
    }
    if !ps[i + 1..]
        .iter()
        .zip(&ss[mid_end..])
        .all(|(p, s)| match_tree(p, s, env))
    {
        return false;
    }
    let middle = &ss[i..mid_end];
    let hole = &ps[i];
    if hole.is_kind(kinds::SPLICE) {
        let sep = hole.child(2).atom_value().unwrap_or("");
        let cat = antiquot_cat(hole);
        let Ok(var) = antiquot_var(hole) else { return false };
        let payload = if sep.is_empty() {
            Payload::Seq(middle.to_vec())
        } else {
            match split_sep(middle, sep) {
                Some(elems) => Payload::SepSeq {
                    elems,
                    sep: sep.to_string(),
                },
                None => return false,
            }
        };
        if !payload.elems().unwrap_or_default().iter().all(|e| cat_accepts(cat, e)) {
            return false;
        }
        env.insert(var, payload);
        true
    } else {
        let inner = hole.child(0);
        let sep = hole.child(1).atom_value().unwrap_or("");
        let elems = if sep.is_empty() {
            middle.to_vec()
        } else {
            match split_sep(middle, sep) {
                Some(e) => e,
                None => return false,
            }
        };
        let vars = pattern_vars(inner);
        let mut per_var: Vec<Vec<Payload>> = vec![Vec::new(); vars.len()];
        for e in &elems {
            let mut sub = MatchEnv::new();
            if !match_tree(inner, e, &mut sub) {
                return false;
            }
            for (k, v) in vars.iter().enumerate() {
                per_var[k].push(sub.swap_remove(v).unwrap_or(Payload::Seq(Vec::new())));
            }
        }
        for (v, ps) in vars.into_iter().zip(per_var) {
            env.insert(v, Payload::SeqOf(ps));
        }
        true
    }
}

/// Instantiates a template: each captured identifier receives the current
/// macro scope, holes are filled from `env`.
pub fn instantiate(t: &QuotationTemplate, env: &MatchEnv, scopes: &mut ScopeState) -> Result<SyntaxTree> {
    Instantiator { env, scopes }.tree(&t.body, false)
}

struct Instantiator<'a> {
    env: &'a MatchEnv,
    scopes: &'a mut ScopeState,
}

impl Instantiator<'_> {
    fn tree(&mut self, stx: &SyntaxTree, nested_quote: bool) -> Result<SyntaxTree> {
        match stx {
            SyntaxTree::Ident {
                raw,
                value,
                preresolved,
                ..
            } => {
                let scope = self.scopes.current();
                let value = if self.scopes.keep_last_only {
                    value.replace_macro_scopes(scope)
                } else {
                    value.add_macro_scope(scope)
                };
                Ok(SyntaxTree::Ident {
                    info: SourceInfo::NONE,
                    raw: raw.clone(),
                    value,
                    preresolved: preresolved.clone(),
                })
            }
            SyntaxTree::Atom { value, .. } => Ok(SyntaxTree::atom(value.clone())),
            SyntaxTree::Missing => Ok(SyntaxTree::Missing),
            SyntaxTree::Node { .. } if stx.is_kind(kinds::ANTIQUOT) => {
                let var = antiquot_var(stx)?;
                match self.env.get(&var) {
                    Some(Payload::Tree(t)) => Ok(t.clone()),
                    Some(_) => Err(shape(format!(
                        "'${var}' holds a sequence but is used as a single syntax tree"
                    ))),
                    None if nested_quote => Ok(stx.clone()),
                    None => Err(shape(format!("unbound antiquotation '${var}'"))),
                }
            }
            SyntaxTree::Node { .. } if stx.is_kind(kinds::SPLICE) || stx.is_kind(kinds::NESTED) => {
                let items = self.seq(std::slice::from_ref(stx), nested_quote)?;
                match items.len() {
                    1 => Ok(items.into_iter().next().unwrap()),
                    _ => Err(shape("splice used outside of a sequence".into())),
                }
            }
            SyntaxTree::Node { kind, children } => {
                let nested = nested_quote || stx.is_kind(kinds::QUOT) || stx.is_kind(kinds::DQUOT);
                Ok(SyntaxTree::Node {
                    kind: kind.clone(),
                    children: self.seq(children, nested)?,
                })
            }
        }
    }

    fn seq(&mut self, children: &[SyntaxTree], nested_quote: bool) -> Result<Vec<SyntaxTree>> {
        let mut out: Vec<SyntaxTree> = Vec::with_capacity(children.len());
        let mut drop_next_sep: Option<String> = None;
        for c in children {
            if let Some(s) = drop_next_sep.take() {
                if c.atom_value() == Some(s.as_str()) {
                    continue;
                }
            }
            let (elems, sep) = if c.is_kind(kinds::SPLICE) {
                let var = antiquot_var(c)?;
                let sep = c.child(2).atom_value().unwrap_or("").to_string();
                match self.env.get(&var) {
                    None if nested_quote => {
                        out.push(c.clone());
                        continue;
                    }
                    None => return Err(shape(format!("unbound antiquotation '${var}'"))),
                    Some(p) => (
                        p.elems()
                            .ok_or_else(|| shape(format!("'${var}' holds nested sequences")))?,
                        sep,
                    ),
                }
            } else if c.is_kind(kinds::NESTED) {
                let sep = c.child(1).atom_value().unwrap_or("").to_string();
                match self.nested(c.child(0), nested_quote)? {
                    Some(elems) => (elems, sep),
                    None => {
                        out.push(c.clone());
                        continue;
                    }
                }
            } else {
                out.push(self.tree(c, nested_quote)?);
                continue;
            };
            if elems.is_empty() && !sep.is_empty() {
                if out.last().and_then(|l| l.atom_value()) == Some(sep.as_str()) {
                    out.pop();
                } else {
                    drop_next_sep = Some(sep.clone());
                }
            }
            out.extend(interleave(elems, &sep));
        }
        Ok(out)
    }

    /// Instantiates a nested splice body once per element index. `None`
    /// when no variable of the body is bound (it belongs to an inner quotation).
    fn nested(&mut self, inner: &SyntaxTree, nested_quote: bool) -> Result<Option<Vec<SyntaxTree>>> {
        let vars: Vec<String> = pattern_vars(inner)
            .into_iter()
            .filter(|v| self.env.contains_key(v))
            .collect();
        if vars.is_empty() {
            if nested_quote {
                return Ok(None);
            }
            return Err(shape("nested splice without bound variables".into()));
        }
        let mut columns: Vec<Vec<Payload>> = Vec::new();
        for v in &vars {
            let col = match &self.env[v] {
                Payload::SeqOf(ps) => ps.clone(),
                Payload::Seq(ts) | Payload::SepSeq { elems: ts, .. } => ts.iter().cloned().map(Payload::Tree).collect(),
                Payload::Tree(_) => return Err(shape(format!("'${v}' is a single syntax tree, expected a sequence"))),
            };
            columns.push(col);
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(shape(
                "nested splice variables have sequences of different lengths".into(),
            ));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut sub = self.env.clone();
            for (v, col) in vars.iter().zip(&columns) {
                sub.insert(v.clone(), col[i].clone());
            }
            let mut inst = Instantiator {
                env: &sub,
                scopes: self.scopes,
            };
            out.push(inst.tree(inner, nested_quote)?);
        }
        Ok(Some(out))
    }
}

fn shape(msg: String) -> Error {
    ErrorKind::Shape(msg).into()
}

/// A rule right-hand side implemented in Rust.
pub type ProceduralRhs = Arc<dyn Fn(&MatchEnv, &mut MacroEnv) -> Result<SyntaxTree> + Send + Sync>;

/// Right-hand side of one rule alternative.
#[derive(Clone)]
pub enum RuleRhs {
    Template(QuotationTemplate),
    /// A bare pattern variable, returned as matched.
    Var(String),
    Procedural(ProceduralRhs),
}

#[derive(Clone)]
pub struct RuleAlt {
    /// Pattern body (the quotation's contents).
    pub pattern: SyntaxTree,
    pub rhs: RuleRhs,
}

/// The node kind a pattern quotation matches and its body.
pub fn pattern_of_quotation(q: &SyntaxTree) -> Result<(HierName, SyntaxTree)> {
    if !q.is_kind(kinds::QUOT) {
        return Err(shape(format!("macro_rules pattern must be a quotation, found '{q}'")));
    }
    let body = q.child(1);
    match body.kind() {
        Some(k) if !body.is_antiquot_like() && !is_simple_kind(k, kinds::COMMAND_SEQ) => Ok((k.clone(), body.clone())),
        _ => Err(shape(format!(
            "macro_rules pattern '{q}' does not determine a syntax kind"
        ))),
    }
}

/// A transformer trying `alts` in order; the first match is instantiated
/// under the invocation's scope.
pub fn make_rule_transformer(alts: Vec<RuleAlt>) -> Transformer {
    Arc::new(move |stx: &SyntaxTree, menv: &mut MacroEnv| {
        for alt in &alts {
            let Some(env) = match_pattern(&alt.pattern, stx) else {
                continue;
            };
            let out = match &alt.rhs {
                RuleRhs::Template(t) => instantiate(t, &env, menv.scopes)?,
                RuleRhs::Var(v) => match env.get(v) {
                    Some(Payload::Tree(t)) => t.clone(),
                    _ => return Err(shape(format!("'{v}' is not bound to a single syntax tree"))),
                },
                RuleRhs::Procedural(f) => f(&env, menv)?,
            };
            return Ok(Some(out));
        }
        Ok(None)
    })
}

/// A reference to global `n` that no local binding can capture.
pub fn mk_cident(n: &HierName) -> SyntaxTree {
    SyntaxTree::Ident {
        info: SourceInfo::NONE,
        raw: n.to_string(),
        value: n.add_macro_scope(MacroScope::RESERVED),
        preresolved: vec![n.clone()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{Decl, DeclKind};
    use crate::parser::parse_str;
    use crate::syntax::render;

    fn gctx(names: &[&str]) -> GlobalContext {
        let mut g = GlobalContext::default();
        for n in names {
            g.add(
                HierName::from_dotted(n),
                Decl {
                    kind: DeclKind::Def,
                    ty: None,
                },
            )
            .unwrap();
        }
        g
    }

    fn quot(src: &str) -> SyntaxTree {
        parse_str(&ParserTables::default(), "term", src).unwrap()
    }

    fn template(src: &str, g: &GlobalContext) -> QuotationTemplate {
        process_quotation(&quot(src), g, &ParserTables::default()).unwrap()
    }

    fn term(src: &str) -> SyntaxTree {
        parse_str(&ParserTables::default(), "term", src).unwrap()
    }

    #[test]
    fn preresolves_against_globals() {
        let g = gctx(&["a.a", "b.a"]);
        let t = template("`(a + $b)", &g);
        let a = t.body.child(0);
        assert_eq!(a.ident_raw(), Some("a"));
        match a {
            SyntaxTree::Ident { preresolved, .. } => {
                let names: Vec<String> = preresolved.iter().map(|n| n.to_string()).collect();
                assert_eq!(names, vec!["a.a", "b.a"]);
            }
            _ => panic!(),
        }
        assert!(t.body.child(2).is_kind(kinds::ANTIQUOT));
        let mut s = ScopeState::default();
        let mut env = MatchEnv::new();
        env.insert("b".into(), Payload::Tree(SyntaxTree::ident_str("c")));
        let out = s.with_fresh(|s| instantiate(&t, &env, s)).0.unwrap();
        assert_eq!(render(&out), "a.1{a.a,b.a} + c");
        assert!(!out.has_info());
    }

    #[test]
    fn unmatched_capture_has_no_annotation() {
        let t = template("`(fun x => $e)", &gctx(&[]));
        assert_eq!(render(&t.to_syntax()), "`(fun x => $e)");
        let t = template("`(fun x => $e)", &gctx(&["x", "e"]));
        assert_eq!(render(&t.to_syntax()), "`(fun x{x} => $e)");
    }

    #[test]
    fn const_template_instantiates_with_scope() {
        let t = template("`(fun x => $e)", &gctx(&["x", "e"]));
        let mut env = MatchEnv::new();
        env.insert("e".into(), Payload::Tree(SyntaxTree::ident_str("x")));
        let mut s = ScopeState::default();
        let out = s.with_fresh(|s| instantiate(&t, &env, s)).0.unwrap();
        assert_eq!(render(&out), "fun x.1{x} => x");
    }

    #[test]
    fn tuple_pattern_and_sep_splice() {
        let pat = quot("`(($e, $es,*))").child(1).clone();
        let env = match_pattern(&pat, &term("(1, 2, 3)")).unwrap();
        assert_eq!(env["e"], Payload::Tree(SyntaxTree::num(1)));
        assert_eq!(
            env["es"],
            Payload::SepSeq {
                elems: vec![SyntaxTree::num(2), SyntaxTree::num(3)],
                sep: ",".into()
            }
        );
        assert!(match_pattern(&quot("`(())").child(1).clone(), &term("(1)")).is_none());

        let t = template("`(Prod.mk $e ($es,*))", &gctx(&["Prod.mk"]));
        let mut s = ScopeState::default();
        let out = s.with_fresh(|s| instantiate(&t, &env, s)).0.unwrap();
        let arg = &out.child(1).children()[1];
        assert!(arg.is_kind(kinds::PAREN));
        assert_eq!(render(arg), "(2, 3)");
        assert_eq!(arg.child(1).children().len(), 3);
    }

    #[test]
    fn nested_splice_binds_per_alternative() {
        let pat = quot("`(match $discr with $[| $patss,* => $branches]*)")
            .child(1)
            .clone();
        let input = term("match y with | a => b | c => d");
        let env = match_pattern(&pat, &input).unwrap();
        match &env["branches"] {
            Payload::SeqOf(v) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
        match &env["patss"] {
            Payload::SeqOf(v) => assert!(matches!(v[0], Payload::SepSeq { .. })),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_splice_instantiation() {
        let t = template("`(match $[$discrs:ident],* with | a => a)", &gctx(&[]));
        let x = |n| SyntaxTree::ident(HierName::from_dotted("x").add_macro_scope(MacroScope(n)));
        let mut env = MatchEnv::new();
        env.insert("discrs".into(), Payload::Seq(vec![x(1), x(2)]));
        let mut s = ScopeState::default();
        let out = instantiate(&t, &env, &mut s).unwrap();
        assert_eq!(render(out.child(1)), "x.1, x.2");
    }

    #[test]
    fn separator_coercions() {
        let elems = vec![SyntaxTree::num(1), SyntaxTree::num(2)];
        let sep = Payload::SepSeq {
            elems: elems.clone(),
            sep: ",".into(),
        };
        let mut s = ScopeState::default();
        let mut env = MatchEnv::new();
        env.insert("xs".into(), sep);
        let plain = instantiate(&template("`(f $xs*)", &gctx(&[])), &env, &mut s).unwrap();
        assert_eq!(plain.child(1).children().len(), 2);
        env.insert("xs".into(), Payload::Seq(elems));
        let seps = instantiate(&template("`(($xs,*))", &gctx(&[])), &env, &mut s).unwrap();
        assert_eq!(render(&seps), "(1, 2)");
        env.insert("xs".into(), Payload::Seq(vec![]));
        let empty = instantiate(&template("`((0, $xs,*))", &gctx(&[])), &env, &mut s).unwrap();
        assert_eq!(render(&empty), "(0)");
    }

    #[test]
    fn unequal_nested_lengths_error() {
        let t = template("`(f $[g $a $b]*)", &gctx(&[]));
        let mut env = MatchEnv::new();
        env.insert("a".into(), Payload::Seq(vec![SyntaxTree::num(1)]));
        env.insert("b".into(), Payload::Seq(vec![]));
        let e = instantiate(&t, &env, &mut ScopeState::default()).unwrap_err();
        assert!(matches!(e.kind, ErrorKind::Shape(_)));
    }

    #[test]
    fn cident_uses_reserved_scope() {
        let id = mk_cident(&HierName::from_dotted("Prod.mk"));
        assert_eq!(crate::syntax::format_scoped(&id), "Prod.mk.0{Prod.mk}");
    }

    fn arb_term() -> impl proptest::strategy::Strategy<Value = String> {
        use proptest::prelude::*;
        let leaf = prop_oneof!["v[a-w]{0,2}", (0u32..100).prop_map(|n| n.to_string())];
        leaf.prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} + {b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("f ({a}) ({b})")),
                inner.clone().prop_map(|a| format!("fun y => {a}")),
                proptest::collection::vec(inner, 0..3).prop_map(|v| format!("({})", v.join(", "))),
            ]
        })
    }

    proptest::proptest! {
        #[test]
        fn match_then_instantiate_is_identity(a in arb_term(), b in arb_term(), c in arb_term()) {
            let input = term(&format!("fun y => ({a}) + g ({b}) ({c})"));
            let pat = quot("`(fun y => $p + g $q $r)").child(1).clone();
            let env = match_pattern(&pat, &input).unwrap();
            let t = template("`(fun y => $p + g $q $r)", &gctx(&[]));
            let mut s = ScopeState::default();
            let out = instantiate(&t, &env, &mut s).unwrap();
            // only the captured identifiers `y` and `g` differ, by the new scope
            let strip = |t: &SyntaxTree| render(t).replace("y.1", "y").replace("g.1", "g");
            proptest::prop_assert_eq!(strip(&out), render(&input));
        }

        #[test]
        fn coercions_are_consistent(n in 0usize..6) {
            let elems: Vec<SyntaxTree> = (0..n as u64).map(SyntaxTree::num).collect();
            let with = Payload::Seq(elems.clone()).with_separator(",").unwrap();
            proptest::prop_assert_eq!(with.len(), if n == 0 { 0 } else { 2 * n - 1 });
            let back = split_sep(&with, ",").unwrap();
            proptest::prop_assert_eq!(back, elems);
        }
    }
}
