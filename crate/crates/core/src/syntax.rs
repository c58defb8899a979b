//! Concrete syntax trees and their renderings.

use std::fmt;

use crate::error::{Error, ErrorKind, Result};
use crate::name::HierName;

/// Source provenance of a parsed atom or identifier. Synthesized syntax
/// carries none.
///
/// Provenance never participates in equality: two trees that differ only in
/// where they came from compare equal.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct SourceInfo(pub Option<Position>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Position {
    pub line: u32,
    pub column: u32,
    pub offset: usize,
}

impl PartialEq for SourceInfo {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl SourceInfo {
    pub const NONE: SourceInfo = SourceInfo(None);

    pub fn at(pos: Position) -> Self {
        SourceInfo(Some(pos))
    }

    pub fn position(&self) -> Option<Position> {
        self.0
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntaxTree {
    Node {
        kind: HierName,
        children: Vec<SyntaxTree>,
    },
    Atom {
        info: SourceInfo,
        value: String,
    },
    Ident {
        info: SourceInfo,
        raw: String,
        value: HierName,
        preresolved: Vec<HierName>,
    },
    Missing,
}

/// Node kinds with built-in meaning.
pub mod kinds {
    pub const NULL: &str = "null";
    pub const APP: &str = "app";
    pub const FUN: &str = "fun";
    pub const FUN_MATCH: &str = "funMatch";
    pub const TYPED_BINDER: &str = "typedBinder";
    pub const MATCH: &str = "match";
    pub const MATCH_ALT: &str = "matchAlt";
    pub const PAREN: &str = "paren";
    pub const ANON_CTOR: &str = "anonCtor";
    pub const NUM: &str = "num";
    pub const STR: &str = "str";
    pub const PLUS: &str = "plus";
    pub const ARROW: &str = "arrow";
    pub const HOLE: &str = "hole";
    pub const BY: &str = "by";
    pub const QUOT: &str = "quot";
    pub const DQUOT: &str = "dquot";
    pub const ANTIQUOT: &str = "antiquot";
    pub const SPLICE: &str = "antiquotSplice";
    pub const NESTED: &str = "antiquotNested";
    pub const GLOBAL_REF: &str = "globalRef";
    pub const CHOICE: &str = "choice";

    pub const DEF: &str = "def";
    pub const THEOREM: &str = "theorem";
    pub const AXIOM: &str = "axiom";
    pub const SYNTAX: &str = "syntax";
    pub const SYNTAX_SLOT: &str = "syntaxSlot";
    pub const MACRO_RULES: &str = "macroRules";
    pub const MACRO_RULES_ALT: &str = "macroRulesAlt";
    pub const DECLARE_CAT: &str = "declareSyntaxCat";
    pub const COMMAND_SEQ: &str = "commandSeq";

    pub const INTRO: &str = "intro";
    pub const EXACT: &str = "exact";
    pub const ASSUMPTION: &str = "assumption";
    pub const SKIP: &str = "skip";
    pub const FAIL: &str = "fail";
    pub const TRY: &str = "try";
    pub const TACTIC_SEQ: &str = "tacticSeq";
    pub const TACTIC_PAREN: &str = "tacticParen";
}

impl SyntaxTree {
    pub fn node(kind: impl Into<KindName>, children: Vec<SyntaxTree>) -> Self {
        SyntaxTree::Node {
            kind: kind.into().0,
            children,
        }
    }

    pub fn null(children: Vec<SyntaxTree>) -> Self {
        Self::node(kinds::NULL, children)
    }

    pub fn atom(value: impl Into<String>) -> Self {
        SyntaxTree::Atom {
            info: SourceInfo::NONE,
            value: value.into(),
        }
    }

    /// Synthesized identifier whose surface spelling is the string part of
    /// `value`.
    pub fn ident(value: HierName) -> Self {
        let raw = value.base().to_string();
        SyntaxTree::Ident {
            info: SourceInfo::NONE,
            raw,
            value,
            preresolved: Vec::new(),
        }
    }

    pub fn ident_str(s: &str) -> Self {
        Self::ident(HierName::from_dotted(s))
    }

    pub fn num(n: u64) -> Self {
        Self::node(kinds::NUM, vec![Self::atom(n.to_string())])
    }

    pub fn kind(&self) -> Option<&HierName> {
        match self {
            SyntaxTree::Node { kind, .. } => Some(kind),
            _ => None,
        }
    }

    pub fn is_kind(&self, k: &str) -> bool {
        match self {
            SyntaxTree::Node { kind, .. } => is_simple_kind(kind, k),
            _ => false,
        }
    }

    pub fn children(&self) -> &[SyntaxTree] {
        match self {
            SyntaxTree::Node { children, .. } => children,
            _ => &[],
        }
    }

    pub fn child(&self, i: usize) -> &SyntaxTree {
        static MISSING: SyntaxTree = SyntaxTree::Missing;
        self.children().get(i).unwrap_or(&MISSING)
    }

    pub fn is_ident(&self) -> bool {
        matches!(self, SyntaxTree::Ident { .. })
    }

    pub fn atom_value(&self) -> Option<&str> {
        match self {
            SyntaxTree::Atom { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn ident_value(&self) -> Option<&HierName> {
        match self {
            SyntaxTree::Ident { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn ident_raw(&self) -> Option<&str> {
        match self {
            SyntaxTree::Ident { raw, .. } => Some(raw),
            _ => None,
        }
    }

    pub fn is_antiquot_like(&self) -> bool {
        self.is_kind(kinds::ANTIQUOT) || self.is_kind(kinds::SPLICE) || self.is_kind(kinds::NESTED)
    }

    /// First source position found in the tree, left to right.
    pub fn position(&self) -> Option<Position> {
        match self {
            SyntaxTree::Atom { info, .. } | SyntaxTree::Ident { info, .. } => info.position(),
            SyntaxTree::Node { children, .. } => children.iter().find_map(|c| c.position()),
            SyntaxTree::Missing => None,
        }
    }

    /// Removes all provenance, as quotation instantiation does.
    pub fn without_info(&self) -> SyntaxTree {
        match self {
            SyntaxTree::Node { kind, children } => SyntaxTree::Node {
                kind: kind.clone(),
                children: children.iter().map(|c| c.without_info()).collect(),
            },
            SyntaxTree::Atom { value, .. } => SyntaxTree::Atom {
                info: SourceInfo::NONE,
                value: value.clone(),
            },
            SyntaxTree::Ident {
                raw,
                value,
                preresolved,
                ..
            } => SyntaxTree::Ident {
                info: SourceInfo::NONE,
                raw: raw.clone(),
                value: value.clone(),
                preresolved: preresolved.clone(),
            },
            SyntaxTree::Missing => SyntaxTree::Missing,
        }
    }

    /// Whether the tree still contains a source position anywhere.
    pub fn has_info(&self) -> bool {
        self.position().is_some()
    }
}

/// Wrapper so constructors accept both `&str` kinds and full names.
pub struct KindName(pub HierName);

impl From<&str> for KindName {
    fn from(s: &str) -> Self {
        KindName(HierName::atomic(s))
    }
}

impl From<HierName> for KindName {
    fn from(n: HierName) -> Self {
        KindName(n)
    }
}

impl From<&HierName> for KindName {
    fn from(n: &HierName) -> Self {
        KindName(n.clone())
    }
}

pub fn is_simple_kind(kind: &HierName, k: &str) -> bool {
    matches!(kind.components(), [crate::name::NameComponent::Str(s)] if s == k)
}

/// Strips top-level scopes from an identifier: its value, macro scopes kept.
pub fn strip_top_level_scopes(id: &SyntaxTree) -> Result<HierName> {
    match id {
        SyntaxTree::Ident { value, .. } => Ok(value.clone()),
        _ => Err(Error::new(ErrorKind::NotAnIdentifier(render(id)))),
    }
}

fn is_word_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '!' || c == '?'
}

fn is_plain_word(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_word_start(c)) && chars.all(is_word_char) && s != "_"
}

/// Renders a name, escaping components that would not lex back as written.
pub fn render_name(n: &HierName, is_keyword: &dyn Fn(&str) -> bool) -> String {
    use crate::name::NameComponent;
    if n.is_anonymous() {
        return "[anonymous]".into();
    }
    let mut out = String::new();
    for (i, c) in n.components().iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        match c {
            NameComponent::Str(s) if is_plain_word(s) && !(i == 0 && n.components().len() == 1 && is_keyword(s)) => {
                out.push_str(s)
            }
            NameComponent::Str(s) => {
                out.push('«');
                out.push_str(s);
                out.push('»');
            }
            NameComponent::Num(v) => out.push_str(&v.to_string()),
        }
    }
    out
}

/// Debug rendering `n.msc1.….mscn{tsc1,…,tscn}`; braces are elided when
/// there are no top-level scopes.
pub fn format_scoped(id: &SyntaxTree) -> String {
    format_scoped_with(id, &|_| false)
}

fn format_scoped_with(id: &SyntaxTree, is_keyword: &dyn Fn(&str) -> bool) -> String {
    match id {
        SyntaxTree::Ident { value, preresolved, .. } => {
            let mut s = render_name(value, is_keyword);
            if !preresolved.is_empty() {
                s.push('{');
                let parts: Vec<String> = preresolved.iter().map(|p| render_name(p, &|_| false)).collect();
                s.push_str(&parts.join(","));
                s.push('}');
            }
            s
        }
        other => render(other),
    }
}

/// Renders a tree as source text using the debug identifier notation.
pub fn render(stx: &SyntaxTree) -> String {
    Printer { is_keyword: &|_| false }.print(stx)
}

/// Renders with keyword-aware identifier escaping, suitable for re-parsing.
pub fn render_with_keywords(stx: &SyntaxTree, is_keyword: &dyn Fn(&str) -> bool) -> String {
    Printer { is_keyword }.print(stx)
}

struct Printer<'a> {
    is_keyword: &'a dyn Fn(&str) -> bool,
}

const NO_SPACE_AFTER: &[&str] = &["(", "[", "⟨", "`(", "``(", "$["];
const NO_SPACE_BEFORE: &[&str] = &[")", "]", "⟩", ",", ";", "]*", "],*"];

impl Printer<'_> {
    fn print(&self, stx: &SyntaxTree) -> String {
        let mut toks = Vec::new();
        self.emit(stx, &mut toks);
        join_tokens(&toks)
    }

    fn emit(&self, stx: &SyntaxTree, out: &mut Vec<String>) {
        match stx {
            SyntaxTree::Atom { value, .. } => out.push(value.clone()),
            SyntaxTree::Ident { .. } => out.push(format_scoped_with(stx, self.is_keyword)),
            SyntaxTree::Missing => out.push("<missing>".into()),
            SyntaxTree::Node { kind, children } => self.emit_node(kind, children, out),
        }
    }

    fn emit_node(&self, kind: &HierName, children: &[SyntaxTree], out: &mut Vec<String>) {
        let k = |s: &str| is_simple_kind(kind, s);
        if k(kinds::ANTIQUOT) {
            let mut s = String::from("$");
            s.push_str(&self.antiquot_payload(&children[0]));
            if let Some(cat) = children.get(1).and_then(|c| c.atom_value()).filter(|c| !c.is_empty()) {
                s.push(':');
                s.push_str(cat);
            }
            out.push(s);
        } else if k(kinds::SPLICE) {
            let mut s = String::from("$");
            s.push_str(&self.antiquot_payload(&children[0]));
            if let Some(cat) = children.get(1).and_then(|c| c.atom_value()).filter(|c| !c.is_empty()) {
                s.push(':');
                s.push_str(cat);
            }
            s.push_str(children.get(2).and_then(|c| c.atom_value()).unwrap_or(""));
            s.push('*');
            out.push(s);
        } else if k(kinds::NESTED) {
            out.push("$[".into());
            self.emit(&children[0], out);
            let sep = children.get(1).and_then(|c| c.atom_value()).unwrap_or("");
            out.push(format!("]{sep}*"));
        } else if k(kinds::QUOT) || k(kinds::DQUOT) {
            out.push(if k(kinds::QUOT) { "`(".into() } else { "``(".into() });
            if let Some(cat) = children.first().and_then(|c| c.atom_value()).filter(|c| !c.is_empty()) {
                out.push(format!("{cat}|"));
            }
            if let Some(body) = children.get(1) {
                self.emit(body, out);
            }
            out.push(")".into());
        } else if k(kinds::GLOBAL_REF) {
            self.emit(&children[0], out);
        } else if k(kinds::CHOICE) {
            out.push("(".into());
            out.push("choice".into());
            for c in children {
                self.emit(c, out);
            }
            out.push(")".into());
        } else if k(kinds::APP) {
            self.emit_operand(&children[0], false, out);
            for a in children[1].children() {
                self.emit_operand(a, true, out);
            }
        } else if k(kinds::PLUS) {
            self.emit_binop_side(&children[0], &[kinds::PLUS], out);
            self.emit(&children[1], out);
            self.emit_binop_side(&children[2], &[], out);
        } else if k(kinds::ARROW) {
            self.emit_binop_side(&children[0], &[kinds::PLUS], out);
            self.emit(&children[1], out);
            self.emit_binop_side(&children[2], &[kinds::PLUS, kinds::ARROW], out);
        } else {
            for c in children {
                self.emit(c, out);
            }
        }
    }

    fn antiquot_payload(&self, p: &SyntaxTree) -> String {
        match p {
            SyntaxTree::Ident { .. } => format_scoped_with(p, self.is_keyword),
            other => format!("({})", self.print(other)),
        }
    }

    fn emit_operand(&self, c: &SyntaxTree, is_arg: bool, out: &mut Vec<String>) {
        let atomic = match c {
            SyntaxTree::Node { .. } => is_atomic_node(c) || (!is_arg && c.is_kind(kinds::APP)),
            _ => true,
        };
        self.wrap(c, !atomic, out);
    }

    fn emit_binop_side(&self, c: &SyntaxTree, allowed: &[&str], out: &mut Vec<String>) {
        let needs = matches!(c, SyntaxTree::Node { .. })
            && !is_atomic_node(c)
            && !c.is_kind(kinds::APP)
            && !allowed.iter().any(|k| c.is_kind(k));
        self.wrap(c, needs, out);
    }

    fn wrap(&self, c: &SyntaxTree, parens: bool, out: &mut Vec<String>) {
        if parens {
            out.push("(".into());
            self.emit(c, out);
            out.push(")".into());
        } else {
            self.emit(c, out);
        }
    }
}

fn is_atomic_node(c: &SyntaxTree) -> bool {
    [
        kinds::PAREN,
        kinds::ANON_CTOR,
        kinds::NUM,
        kinds::STR,
        kinds::QUOT,
        kinds::DQUOT,
        kinds::ANTIQUOT,
        kinds::SPLICE,
        kinds::NESTED,
        kinds::GLOBAL_REF,
        kinds::CHOICE,
        kinds::HOLE,
    ]
    .iter()
    .any(|k| c.is_kind(k))
}

fn join_tokens(toks: &[String]) -> String {
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for t in toks {
        if t.is_empty() {
            continue;
        }
        if let Some(p) = prev {
            let glue = NO_SPACE_AFTER.contains(&p) || NO_SPACE_BEFORE.contains(&t.as_str());
            if !glue {
                out.push(' ');
            }
        }
        out.push_str(t);
        prev = Some(t.as_str());
    }
    out
}

impl fmt::Display for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}
