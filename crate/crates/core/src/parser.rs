//! Extensible Pratt parser over syntax categories.
//!
//! Every category holds user rules newest first. Rules starting with a
//! literal token are dispatched on that token; rules starting with a slot of
//! their own category extend an already parsed left operand; rules starting
//! with a slot of another category are tried by backtracking. Built-in forms
//! of `term`, `command` and `tactic` are tried after all user rules.

use std::collections::HashSet;

use indexmap::IndexMap;

use crate::error::{Error, ErrorKind, Result};
use crate::lexer::{unescape_string, KeywordSet, Lexer, Token, TokenKind};
use crate::name::HierName;
use crate::syntax::{kinds, SourceInfo, SyntaxTree};

pub const MAX_PREC: u32 = 1024;
pub const ARG_PREC: u32 = 1023;
const PLUS_PREC: u32 = 65;
const ARROW_PREC: u32 = 25;

/// Tokens allowed between an antiquotation and `*` to form a separated splice.
const SPLICE_SEPARATORS: &[&str] = &[",", ";", "|"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternItem {
    Literal(String),
    Slot {
        cat: HierName,
        prec: Option<u32>,
    },
    /// `cat*` or `cat,*`; produces a single `null` child holding the elements.
    Many {
        cat: HierName,
        sep: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRule {
    pub kind: HierName,
    pub pattern: Vec<PatternItem>,
    pub prec: Option<u32>,
}

impl ParseRule {
    pub fn leading(&self) -> bool {
        matches!(self.pattern.first(), Some(PatternItem::Literal(_)))
    }

    fn first_slot_cat(&self) -> Option<&HierName> {
        match self.pattern.first() {
            Some(PatternItem::Slot { cat, .. }) | Some(PatternItem::Many { cat, .. }) => Some(cat),
            _ => None,
        }
    }

    /// Generated kind name: category, then literals with `_` for slots.
    pub fn generated_kind(cat: &HierName, pattern: &[PatternItem]) -> String {
        let mut s = format!("{cat}_");
        for item in pattern {
            match item {
                PatternItem::Literal(l) => s.push_str(l),
                _ => s.push('_'),
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SyntaxCategory {
    pub name: HierName,
    /// Newest first.
    pub rules: Vec<ParseRule>,
}

/// Names usable as slot categories without being declared.
pub const PSEUDO_CATEGORIES: &[&str] = &["ident", "num", "str"];

const BUILTIN_KINDS: &[&str] = &[
    kinds::NULL,
    kinds::APP,
    kinds::FUN,
    kinds::FUN_MATCH,
    kinds::TYPED_BINDER,
    kinds::MATCH,
    kinds::MATCH_ALT,
    kinds::PAREN,
    kinds::ANON_CTOR,
    kinds::NUM,
    kinds::STR,
    kinds::PLUS,
    kinds::ARROW,
    kinds::HOLE,
    kinds::BY,
    kinds::QUOT,
    kinds::DQUOT,
    kinds::ANTIQUOT,
    kinds::SPLICE,
    kinds::NESTED,
    kinds::GLOBAL_REF,
    kinds::CHOICE,
    kinds::DEF,
    kinds::THEOREM,
    kinds::AXIOM,
    kinds::SYNTAX,
    kinds::SYNTAX_SLOT,
    kinds::MACRO_RULES,
    kinds::MACRO_RULES_ALT,
    kinds::DECLARE_CAT,
    kinds::COMMAND_SEQ,
    kinds::INTRO,
    kinds::EXACT,
    kinds::ASSUMPTION,
    kinds::SKIP,
    kinds::FAIL,
    kinds::TRY,
    kinds::TACTIC_SEQ,
    kinds::TACTIC_PAREN,
];

#[derive(Debug, Clone)]
pub struct ParserTables {
    categories: IndexMap<HierName, SyntaxCategory>,
    keywords: KeywordSet,
    kinds: HashSet<HierName>,
}

impl Default for ParserTables {
    fn default() -> Self {
        let mut t = ParserTables {
            categories: IndexMap::new(),
            keywords: KeywordSet::default(),
            kinds: BUILTIN_KINDS.iter().map(|k| HierName::atomic(*k)).collect(),
        };
        for c in ["term", "command", "tactic"] {
            t.categories.insert(
                HierName::atomic(c),
                SyntaxCategory {
                    name: HierName::atomic(c),
                    rules: Vec::new(),
                },
            );
        }
        t
    }
}

impl ParserTables {
    pub fn keywords(&self) -> &KeywordSet {
        &self.keywords
    }

    pub fn is_keyword(&self, s: &str) -> bool {
        self.keywords.contains(s)
    }

    pub fn category(&self, name: &HierName) -> Option<&SyntaxCategory> {
        self.categories.get(name)
    }

    pub fn has_category(&self, name: &HierName) -> bool {
        self.categories.contains_key(name) || is_pseudo(name)
    }

    pub fn declare_category(&mut self, name: HierName) -> Result<()> {
        if self.has_category(&name) {
            return Err(ErrorKind::DuplicateCategory(name).into());
        }
        self.categories.insert(
            name.clone(),
            SyntaxCategory {
                name,
                rules: Vec::new(),
            },
        );
        Ok(())
    }

    pub fn has_kind(&self, kind: &HierName) -> bool {
        self.kinds.contains(kind)
    }

    /// Registers `rule` in `cat` with newest-first priority. An anonymous
    /// kind is replaced by a generated one; returns the kind used.
    /// The generated kind name for an unnamed rule, suffixed `_2`, `_3`, …
    /// when already taken.
    pub fn fresh_kind(&self, cat: &HierName, pattern: &[PatternItem]) -> HierName {
        let base = ParseRule::generated_kind(cat, pattern);
        let mut candidate = HierName::atomic(base.clone());
        let mut n = 2;
        while self.kinds.contains(&candidate) {
            candidate = HierName::atomic(format!("{base}_{n}"));
            n += 1;
        }
        candidate
    }

    pub fn register_rule(&mut self, cat: &HierName, mut rule: ParseRule) -> Result<HierName> {
        if !self.categories.contains_key(cat) {
            return Err(ErrorKind::UnknownCategory(cat.clone()).into());
        }
        for item in &rule.pattern {
            if let PatternItem::Slot { cat: c, .. } | PatternItem::Many { cat: c, .. } = item {
                if !self.has_category(c) {
                    return Err(ErrorKind::UnknownCategory(c.clone()).into());
                }
            }
        }
        if rule.pattern.is_empty() {
            return Err(ErrorKind::Parse("syntax rule needs at least one item".into()).into());
        }
        if rule.kind.is_anonymous() {
            rule.kind = self.fresh_kind(cat, &rule.pattern);
        } else if self.kinds.contains(&rule.kind) {
            return Err(ErrorKind::DuplicateKind(rule.kind.clone()).into());
        }
        for item in &rule.pattern {
            match item {
                PatternItem::Literal(l) => self.keywords.insert(l),
                PatternItem::Many { sep: Some(s), .. } => self.keywords.insert(s),
                _ => {}
            }
        }
        self.kinds.insert(rule.kind.clone());
        let kind = rule.kind.clone();
        self.categories[cat].rules.insert(0, rule);
        Ok(kind)
    }

    /// Reads a `syntax` command node into its target category and rule.
    pub fn rule_from_syntax_command(stx: &SyntaxTree) -> Result<(HierName, ParseRule)> {
        let prec = stx.child(1).children().get(1).map(parse_num_node).transpose()?;
        let kind = match stx.child(2).children().get(3) {
            Some(id) => id.ident_value().cloned().unwrap_or_default(),
            None => HierName::anonymous(),
        };
        let mut pattern = Vec::new();
        for item in stx.child(3).children() {
            if item.is_kind(kinds::STR) {
                let lit = unescape_string(item.child(0).atom_value().unwrap_or("\"\""));
                let lit = lit.trim().to_string();
                if lit.is_empty() {
                    return Err(ErrorKind::Parse("empty literal in syntax rule".into()).into());
                }
                pattern.push(PatternItem::Literal(lit));
            } else if item.is_kind(kinds::SYNTAX_SLOT) {
                let cat = item.child(0).ident_value().map(HierName::base).unwrap_or_default();
                let prec_txt = item.child(1).atom_value().unwrap_or("");
                let rep = item.child(2).atom_value().unwrap_or("");
                if rep.is_empty() {
                    let prec = if prec_txt.is_empty() {
                        None
                    } else {
                        Some(
                            prec_txt
                                .parse()
                                .map_err(|_| ErrorKind::Parse(format!("bad precedence {prec_txt}")))?,
                        )
                    };
                    pattern.push(PatternItem::Slot { cat, prec });
                } else {
                    let sep = rep.strip_suffix('*').filter(|s| !s.is_empty()).map(str::to_string);
                    pattern.push(PatternItem::Many { cat, sep });
                }
            } else {
                return Err(ErrorKind::Parse(format!("unexpected syntax item {item}")).into());
            }
        }
        // category names are never hygienic
        let cat = stx.child(5).ident_value().map(HierName::base).unwrap_or_default();
        Ok((cat, ParseRule { kind, pattern, prec }))
    }
}

fn parse_num_node(n: &SyntaxTree) -> Result<u32> {
    let txt = n.child(0).atom_value().or(n.atom_value()).unwrap_or("");
    txt.parse()
        .map_err(|_| Error::new(ErrorKind::Parse(format!("expected precedence, found {n}"))))
}

pub fn is_pseudo(name: &HierName) -> bool {
    PSEUDO_CATEGORIES.iter().any(|p| crate::syntax::is_simple_kind(name, p))
}

fn cat_is(cat: &HierName, s: &str) -> bool {
    crate::syntax::is_simple_kind(cat, s)
}

/// A cursor over the token stream of one source text, tokenized lazily with
/// the keyword set of a table snapshot.
pub struct Parser<'a> {
    src: &'a str,
    tables: &'a ParserTables,
    toks: Vec<Token>,
    idx: usize,
    lex_pos: usize,
    eof: bool,
    lex_error: Option<Error>,
    furthest: Option<(usize, Error)>,
    /// Set while the element parser runs for the body of `$[...]`, whose
    /// contents are a full term even where elements are arguments.
    splice_inner: bool,
    /// Column of the current top-level command; arguments on later lines
    /// must be indented past it.
    cmd_col: u32,
}

type Parsed = (SyntaxTree, u32);

impl<'a> Parser<'a> {
    pub fn new(src: &'a str, offset: usize, tables: &'a ParserTables) -> Self {
        Parser {
            src,
            tables,
            toks: Vec::new(),
            idx: 0,
            lex_pos: offset,
            eof: false,
            lex_error: None,
            furthest: None,
            splice_inner: false,
            cmd_col: 0,
        }
    }

    /// Byte offset just past the last consumed token.
    pub fn offset(&self) -> usize {
        if self.idx == 0 {
            self.lex_start()
        } else {
            self.toks[self.idx - 1].end
        }
    }

    fn lex_start(&self) -> usize {
        self.toks.first().map_or(self.lex_pos, |t| t.pos.offset)
    }

    fn fill(&mut self, i: usize) {
        while self.toks.len() <= i && !self.eof && self.lex_error.is_none() {
            let lexer = Lexer::new(self.src, self.tables.keywords());
            match lexer.next_token(self.lex_pos) {
                Ok(Some(t)) => {
                    self.lex_pos = t.end;
                    self.toks.push(t);
                }
                Ok(None) => self.eof = true,
                Err(e) => self.lex_error = Some(e),
            }
        }
    }

    fn peek_at(&mut self, k: usize) -> Option<&Token> {
        let i = self.idx + k;
        self.fill(i);
        self.toks.get(i)
    }

    fn peek(&mut self) -> Option<&Token> {
        self.peek_at(0)
    }

    fn peek_is(&mut self, text: &str) -> bool {
        matches!(self.peek(), Some(t) if t.text == text
            && !matches!(t.kind, TokenKind::Identifier | TokenKind::StringLiteral | TokenKind::Numeral))
    }

    pub fn at_end(&mut self) -> bool {
        self.peek().is_none() && self.lex_error.is_none()
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().cloned().expect("bump past end");
        self.idx += 1;
        t
    }

    fn fail<T>(&mut self, msg: impl Into<String>) -> Result<T> {
        if let Some(e) = &self.lex_error {
            if self.idx >= self.toks.len() {
                return Err(e.clone());
            }
        }
        let pos = self.peek().map(|t| t.pos);
        let err = Error::at(ErrorKind::Parse(msg.into()), pos);
        match &self.furthest {
            Some((i, _)) if *i > self.idx => {}
            _ => self.furthest = Some((self.idx, err.clone())),
        }
        Err(err)
    }

    fn expected<T>(&mut self, what: &str) -> Result<T> {
        let found = self
            .peek()
            .map_or("end of input".to_string(), |t| format!("'{}'", t.text));
        self.fail(format!("expected {what}, found {found}"))
    }

    fn expect(&mut self, text: &str) -> Result<SyntaxTree> {
        if self.peek_is(text) {
            let t = self.bump();
            Ok(atom_of(&t))
        } else {
            self.expected(&format!("'{text}'"))
        }
    }

    /// Runs `f`, restoring the cursor if it fails.
    fn attempt<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let save = self.idx;
        let r = f(self);
        if r.is_err() {
            self.idx = save;
        }
        r
    }

    fn best_error(&self, fallback: Error) -> Error {
        if let Some(e) = &self.lex_error {
            return e.clone();
        }
        match &self.furthest {
            Some((_, e)) => e.clone(),
            None => fallback,
        }
    }

    /// Parses one command; `Ok(None)` at end of input.
    pub fn parse_command(&mut self) -> Result<Option<SyntaxTree>> {
        self.furthest = None;
        if self.at_end() {
            return Ok(None);
        }
        if let Some(e) = self.lex_error.clone() {
            if self.peek().is_none() {
                return Err(e);
            }
        }
        self.cmd_col = self.peek().map_or(0, |t| t.pos.column);
        let command = HierName::atomic("command");
        match self.parse_category(&command, 0) {
            Ok(t) => Ok(Some(t)),
            Err(e) => Err(self.best_error(e)),
        }
    }

    /// Skips tokens after a parse error up to the next plausible command start.
    pub fn recover_to_next_command(&mut self) {
        self.lex_error = None;
        if self.peek().is_some() {
            self.idx += 1;
        }
        let starts = command_start_tokens(self.tables);
        while let Some(t) = self.peek() {
            if t.kind != TokenKind::Identifier && starts.contains(&t.text) && t.pos.column == 1 {
                break;
            }
            self.idx += 1;
        }
        if self.lex_error.is_some() {
            // Skip past the offending character and keep going.
            self.lex_pos = self.src[self.lex_pos..]
                .char_indices()
                .nth(1)
                .map_or(self.src.len(), |(i, _)| self.lex_pos + i);
            self.lex_error = None;
            self.recover_to_next_command_tail();
        }
    }

    fn recover_to_next_command_tail(&mut self) {
        let starts = command_start_tokens(self.tables);
        while let Some(t) = self.peek() {
            if t.kind != TokenKind::Identifier && starts.contains(&t.text) && t.pos.column == 1 {
                break;
            }
            self.idx += 1;
            if self.lex_error.is_some() {
                self.lex_error = None;
                self.lex_pos = (self.lex_pos + 1).min(self.src.len());
                while !self.src.is_char_boundary(self.lex_pos) {
                    self.lex_pos += 1;
                }
            }
        }
    }

    /// Parses a complete input in one category, requiring all input consumed.
    pub fn parse_all(&mut self, cat: &HierName) -> Result<SyntaxTree> {
        let t = self.parse_category(cat, 0).map_err(|e| self.best_error(e))?;
        if !self.at_end() {
            let e = self.expected::<()>("end of input").unwrap_err();
            return Err(e);
        }
        Ok(t)
    }

    pub fn parse_category(&mut self, cat: &HierName, min_prec: u32) -> Result<SyntaxTree> {
        Ok(self.parse_category_prec(cat, min_prec)?.0)
    }

    fn parse_category_prec(&mut self, cat: &HierName, min_prec: u32) -> Result<Parsed> {
        self.splice_inner = false;
        if cat_is(cat, "ident") {
            return Ok((self.parse_ident_slot()?, MAX_PREC));
        }
        if cat_is(cat, "num") {
            return Ok((self.parse_num_slot()?, MAX_PREC));
        }
        if cat_is(cat, "str") {
            return Ok((self.parse_str_slot()?, MAX_PREC));
        }
        if self.tables.category(cat).is_none() {
            return Err(ErrorKind::UnknownCategory(cat.clone()).into());
        }
        let (mut lhs, mut lhs_prec) = self.parse_leading(cat, min_prec)?;
        loop {
            match self.parse_trailing(cat, min_prec, &lhs, lhs_prec)? {
                Some((t, p)) => {
                    lhs = t;
                    lhs_prec = p;
                }
                None => return Ok((lhs, lhs_prec)),
            }
        }
    }

    fn parse_leading(&mut self, cat: &HierName, min_prec: u32) -> Result<Parsed> {
        let tables = self.tables;
        let category = tables.category(cat).expect("checked by caller");
        let next = self.peek().cloned();
        for rule in &category.rules {
            if rule.first_slot_cat() == Some(cat) {
                continue;
            }
            let prec = rule.prec.unwrap_or(MAX_PREC);
            if prec < min_prec {
                continue;
            }
            if let Some(PatternItem::Literal(l)) = rule.pattern.first() {
                if next.as_ref().map(|t| &t.text) != Some(l)
                    || next.as_ref().map(|t| t.kind) == Some(TokenKind::StringLiteral)
                {
                    continue;
                }
            }
            if let Ok(t) = self.attempt(|p| p.parse_rule_body(rule, None)) {
                return Ok((t, prec));
            }
        }
        if next.as_ref().map(|t| t.text.as_str()) == Some("$") {
            if let Ok(t) = self.attempt(|p| p.parse_antiquote(Some(cat), false)) {
                return Ok((t, MAX_PREC));
            }
        }
        match cat.to_string().as_str() {
            "term" => self.parse_term_builtin(),
            "command" => self.parse_command_builtin(),
            "tactic" => self.parse_tactic_builtin(),
            other => self.expected(other),
        }
    }

    fn parse_trailing(
        &mut self,
        cat: &HierName,
        min_prec: u32,
        lhs: &SyntaxTree,
        lhs_prec: u32,
    ) -> Result<Option<Parsed>> {
        let tables = self.tables;
        let category = tables.category(cat).expect("checked by caller");
        for rule in &category.rules {
            if rule.first_slot_cat() != Some(cat) {
                continue;
            }
            let prec = rule.prec.unwrap_or(0);
            let lhs_req = match rule.pattern.first() {
                Some(PatternItem::Slot { prec, .. }) => prec.unwrap_or(0),
                _ => 0,
            };
            if prec < min_prec || lhs_prec < lhs_req {
                continue;
            }
            if let Some(PatternItem::Literal(l)) = rule.pattern.get(1) {
                if !self.peek_is(l) {
                    continue;
                }
            }
            if let Ok(t) = self.attempt(|p| p.parse_rule_body(rule, Some(lhs.clone()))) {
                return Ok(Some((t, prec)));
            }
        }
        if cat_is(cat, "term") {
            if self.peek_is("+") && PLUS_PREC >= min_prec && lhs_prec >= PLUS_PREC {
                let op = self.bump();
                let rhs = self.parse_category(cat, PLUS_PREC + 1)?;
                return Ok(Some((
                    SyntaxTree::node(kinds::PLUS, vec![lhs.clone(), atom_of(&op), rhs]),
                    PLUS_PREC,
                )));
            }
            if self.peek_is("→") && ARROW_PREC >= min_prec && lhs_prec > ARROW_PREC {
                let op = self.bump();
                let rhs = self.parse_category(cat, ARROW_PREC)?;
                return Ok(Some((
                    SyntaxTree::node(kinds::ARROW, vec![lhs.clone(), atom_of(&op), rhs]),
                    ARROW_PREC,
                )));
            }
            if min_prec < ARG_PREC && lhs_prec >= MAX_PREC && self.at_arg_start() {
                let term = HierName::atomic("term");
                let args = self.parse_seq(
                    None,
                    |p| p.at_arg_start(),
                    |p| {
                        let prec = if std::mem::take(&mut p.splice_inner) {
                            0
                        } else {
                            ARG_PREC
                        };
                        p.parse_category(&term, prec)
                    },
                )?;
                if args.is_empty() {
                    return Ok(None);
                }
                return Ok(Some((
                    SyntaxTree::node(kinds::APP, vec![lhs.clone(), SyntaxTree::null(args)]),
                    MAX_PREC,
                )));
            }
        }
        if cat_is(cat, "tactic") && self.peek_is(";") && min_prec == 0 {
            let op = self.bump();
            let rhs = self.parse_category(cat, 0)?;
            return Ok(Some((
                SyntaxTree::node(kinds::TACTIC_SEQ, vec![lhs.clone(), atom_of(&op), rhs]),
                0,
            )));
        }
        Ok(None)
    }

    fn parse_rule_body(&mut self, rule: &ParseRule, lhs: Option<SyntaxTree>) -> Result<SyntaxTree> {
        let mut children = Vec::with_capacity(rule.pattern.len());
        let mut items = rule.pattern.iter();
        if let Some(l) = lhs {
            items.next();
            children.push(l);
        }
        for item in items {
            match item {
                PatternItem::Literal(l) => children.push(self.expect(l)?),
                PatternItem::Slot { cat, prec } => children.push(self.parse_category(cat, prec.unwrap_or(0))?),
                PatternItem::Many { cat, sep } => {
                    let cat = cat.clone();
                    let elems = self.parse_seq(sep.as_deref(), |_| true, |p| p.parse_category(&cat, 0))?;
                    children.push(SyntaxTree::null(elems));
                }
            }
        }
        Ok(SyntaxTree::node(rule.kind.clone(), children))
    }

    fn at_arg_start(&mut self) -> bool {
        let Some(t) = self.peek().cloned() else { return false };
        if t.pos.column <= self.cmd_col {
            return false;
        }
        match t.kind {
            TokenKind::Identifier | TokenKind::Numeral | TokenKind::StringLiteral => true,
            TokenKind::QuoteHead | TokenKind::DoubleQuoteHead => true,
            TokenKind::AntiquoteHead if t.text == "$[" => true,
            TokenKind::AntiquoteHead => self
                .antiquote_category_ahead()
                .is_none_or(|c| compatible(&HierName::atomic("term"), Some(&c))),
            TokenKind::Special => matches!(t.text.as_str(), "(" | "⟨" | "_"),
            TokenKind::Keyword => self.tables.category(&HierName::atomic("term")).is_some_and(|c| {
                c.rules.iter().any(|r| {
                    matches!(r.pattern.first(), Some(PatternItem::Literal(l)) if *l == t.text)
                        && r.prec.unwrap_or(MAX_PREC) >= ARG_PREC
                })
            }),
        }
    }

    /// Category suffix of the antiquotation at the cursor, if written.
    fn antiquote_category_ahead(&mut self) -> Option<HierName> {
        let t1 = self.peek_at(1)?.clone();
        let mut k = 2;
        if t1.text == "(" {
            return None;
        }
        let colon = self.peek_at(k)?.clone();
        if colon.text == ":" && !colon.space_before {
            let cat = self.peek_at(k + 1)?.clone();
            if cat.kind == TokenKind::Identifier && !cat.space_before {
                k += 1;
                let _ = k;
                return cat.name;
            }
        }
        None
    }

    /// Parses `$x`, `$(t)`, optionally `:cat`, and when `allow_splice` the
    /// `*` / `sep*` suffix.
    fn parse_antiquote(&mut self, slot: Option<&HierName>, allow_splice: bool) -> Result<SyntaxTree> {
        self.expect("$")?;
        let payload = match self.peek().cloned() {
            Some(t) if t.kind == TokenKind::Identifier && !t.space_before => {
                self.bump();
                ident_of(&t)
            }
            Some(t) if t.text == "(" && !t.space_before => {
                self.bump();
                let term = HierName::atomic("term");
                let inner = self.parse_category(&term, 0)?;
                self.expect(")")?;
                inner
            }
            _ => return self.expected("antiquotation name"),
        };
        let mut cat = String::new();
        if let (Some(c), Some(n)) = (self.peek().cloned(), self.peek_at(1).cloned()) {
            if c.text == ":" && !c.space_before && n.kind == TokenKind::Identifier && !n.space_before {
                self.bump();
                self.bump();
                cat = n.text.clone();
            }
        }
        let cat_name = (!cat.is_empty()).then(|| HierName::from_dotted(&cat));
        if let Some(slot) = slot {
            if !compatible(slot, cat_name.as_ref()) {
                return self.fail(format!(
                    "antiquotation of category '{cat}' cannot fill a {slot} position"
                ));
            }
        }
        // splice suffix
        let mut sep = None;
        if let Some(t) = self.peek().cloned() {
            if t.text == "*" && !t.space_before {
                sep = Some(String::new());
            } else if SPLICE_SEPARATORS.contains(&t.text.as_str()) && !t.space_before {
                if let Some(star) = self.peek_at(1) {
                    if star.text == "*" && !star.space_before {
                        sep = Some(t.text.clone());
                    }
                }
            }
        }
        match sep {
            Some(s) => {
                if !allow_splice {
                    return self.fail("splice antiquotation is only allowed in a sequence");
                }
                if !s.is_empty() {
                    self.bump();
                }
                self.bump();
                Ok(SyntaxTree::node(
                    kinds::SPLICE,
                    vec![payload, SyntaxTree::atom(cat), SyntaxTree::atom(s)],
                ))
            }
            None => Ok(SyntaxTree::node(kinds::ANTIQUOT, vec![payload, SyntaxTree::atom(cat)])),
        }
    }

    /// Parses a (possibly separated) sequence. Elements may be splices or
    /// nested splices `$[...]*`; at most one splice per sequence.
    fn parse_seq(
        &mut self,
        sep: Option<&str>,
        mut can_start: impl FnMut(&mut Self) -> bool,
        mut elem: impl FnMut(&mut Self) -> Result<SyntaxTree>,
    ) -> Result<Vec<SyntaxTree>> {
        let mut out = Vec::new();
        let mut splices = 0;
        loop {
            if !out.is_empty() {
                if let Some(s) = sep {
                    if !self.peek_is(s) {
                        break;
                    }
                    let save = self.idx;
                    let sep_tok = self.bump();
                    if !can_start(self) {
                        self.idx = save;
                        break;
                    }
                    out.push(atom_of(&sep_tok));
                }
            }
            if !can_start(self) {
                break;
            }
            let item = if self.peek().is_some_and(|t| t.text == "$[") {
                self.attempt(|p| p.parse_nested_splice(&mut elem))
            } else if self.peek().is_some_and(|t| t.text == "$") {
                let save = self.idx;
                match self.attempt(|p| p.parse_antiquote(None, true)) {
                    Ok(t) if t.is_kind(kinds::SPLICE) => Ok(t),
                    _ => {
                        self.idx = save;
                        self.attempt(&mut elem)
                    }
                }
            } else {
                self.attempt(&mut elem)
            };
            match item {
                Ok(t) => {
                    if t.is_kind(kinds::SPLICE) || t.is_kind(kinds::NESTED) {
                        splices += 1;
                        if splices > 1 {
                            return self.fail("at most one splice can be used per sequence");
                        }
                    }
                    out.push(t)
                }
                Err(e) => {
                    if sep.is_some() && !out.is_empty() {
                        return Err(e);
                    }
                    break;
                }
            }
        }
        Ok(out)
    }

    fn parse_nested_splice(&mut self, elem: &mut impl FnMut(&mut Self) -> Result<SyntaxTree>) -> Result<SyntaxTree> {
        self.expect("$[")?;
        self.splice_inner = true;
        let inner = elem(self);
        self.splice_inner = false;
        let inner = inner?;
        self.expect("]")?;
        let mut sep = String::new();
        if let Some(t) = self.peek().cloned() {
            if SPLICE_SEPARATORS.contains(&t.text.as_str()) && !t.space_before {
                self.bump();
                sep = t.text.clone();
            }
        }
        match self.peek() {
            Some(t) if t.text == "*" && !t.space_before => {
                self.bump();
            }
            _ => return self.expected("'*' after nested splice"),
        }
        Ok(SyntaxTree::node(kinds::NESTED, vec![inner, SyntaxTree::atom(sep)]))
    }

    fn parse_ident_slot(&mut self) -> Result<SyntaxTree> {
        match self.peek().cloned() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.bump();
                Ok(ident_of(&t))
            }
            Some(t) if t.text == "$" => self.parse_antiquote(Some(&HierName::atomic("ident")), false),
            _ => self.expected("identifier"),
        }
    }

    fn parse_num_slot(&mut self) -> Result<SyntaxTree> {
        match self.peek().cloned() {
            Some(t) if t.kind == TokenKind::Numeral => {
                self.bump();
                Ok(SyntaxTree::node(kinds::NUM, vec![atom_of(&t)]))
            }
            Some(t) if t.text == "$" => self.parse_antiquote(Some(&HierName::atomic("num")), false),
            _ => self.expected("numeral"),
        }
    }

    fn parse_str_slot(&mut self) -> Result<SyntaxTree> {
        match self.peek().cloned() {
            Some(t) if t.kind == TokenKind::StringLiteral => {
                self.bump();
                Ok(SyntaxTree::node(kinds::STR, vec![atom_of(&t)]))
            }
            Some(t) if t.text == "$" => self.parse_antiquote(Some(&HierName::atomic("str")), false),
            _ => self.expected("string literal"),
        }
    }

    fn term(&mut self, prec: u32) -> Result<SyntaxTree> {
        self.parse_category(&HierName::atomic("term"), prec)
    }

    fn parse_term_builtin(&mut self) -> Result<Parsed> {
        let Some(t) = self.peek().cloned() else {
            return self.expected("term");
        };
        let tree = match (t.kind, t.text.as_str()) {
            (TokenKind::Identifier, _) => {
                self.bump();
                ident_of(&t)
            }
            (TokenKind::Numeral, _) => self.parse_num_slot()?,
            (TokenKind::StringLiteral, _) => self.parse_str_slot()?,
            (TokenKind::QuoteHead | TokenKind::DoubleQuoteHead, _) => self.parse_quotation()?,
            (_, "_") => {
                self.bump();
                SyntaxTree::node(kinds::HOLE, vec![atom_of(&t)])
            }
            (_, "(") => {
                let open = self.expect("(")?;
                let items = self.parse_seq(Some(","), |p| !p.peek_is(")"), |p| p.term(0))?;
                let close = self.expect(")")?;
                SyntaxTree::node(kinds::PAREN, vec![open, SyntaxTree::null(items), close])
            }
            (_, "⟨") => {
                let open = self.expect("⟨")?;
                let items = self.parse_seq(Some(","), |p| !p.peek_is("⟩"), |p| p.term(0))?;
                let close = self.expect("⟩")?;
                SyntaxTree::node(kinds::ANON_CTOR, vec![open, SyntaxTree::null(items), close])
            }
            (TokenKind::Keyword, "fun") => self.parse_fun()?,
            (TokenKind::Keyword, "match") => {
                let kw = self.expect("match")?;
                let discrs = self.parse_seq(Some(","), |p| !p.peek_is("with"), |p| p.term(0))?;
                if discrs.is_empty() {
                    return self.expected("match discriminant");
                }
                let with = self.expect("with")?;
                let alts = self.parse_match_alts()?;
                SyntaxTree::node(
                    kinds::MATCH,
                    vec![kw, SyntaxTree::null(discrs), with, SyntaxTree::null(alts)],
                )
            }
            (TokenKind::Keyword, "by") => {
                let kw = self.expect("by")?;
                let tac = self.parse_category(&HierName::atomic("tactic"), 0)?;
                SyntaxTree::node(kinds::BY, vec![kw, tac])
            }
            _ => return self.expected("term"),
        };
        Ok((tree, MAX_PREC))
    }

    fn parse_fun(&mut self) -> Result<SyntaxTree> {
        let kw = self.expect("fun")?;
        if self.peek_is("|") {
            let alts = self.parse_match_alts()?;
            return Ok(SyntaxTree::node(kinds::FUN_MATCH, vec![kw, SyntaxTree::null(alts)]));
        }
        let binders = self.parse_seq(None, |p| !p.peek_is("=>"), |p| p.parse_binder())?;
        if binders.is_empty() {
            return self.expected("binder");
        }
        let arrow = self.expect("=>")?;
        let body = self.term(0)?;
        Ok(SyntaxTree::node(
            kinds::FUN,
            vec![kw, SyntaxTree::null(binders), arrow, body],
        ))
    }

    fn parse_binder(&mut self) -> Result<SyntaxTree> {
        if self.peek_is("(") {
            return self.parse_typed_binder();
        }
        if self.peek_is("_") {
            let t = self.bump();
            return Ok(SyntaxTree::node(kinds::HOLE, vec![atom_of(&t)]));
        }
        self.parse_ident_slot()
    }

    fn parse_typed_binder(&mut self) -> Result<SyntaxTree> {
        let open = self.expect("(")?;
        let id = self.parse_ident_slot()?;
        let colon = self.expect(":")?;
        let ty = self.term(0)?;
        let close = self.expect(")")?;
        Ok(SyntaxTree::node(kinds::TYPED_BINDER, vec![open, id, colon, ty, close]))
    }

    fn parse_match_alts(&mut self) -> Result<Vec<SyntaxTree>> {
        let alts = self.parse_seq(
            None,
            |p| p.peek_is("|") || p.peek().is_some_and(|t| t.kind == TokenKind::AntiquoteHead),
            |p| p.parse_match_alt(),
        )?;
        if alts.is_empty() {
            return self.expected("'|'");
        }
        Ok(alts)
    }

    fn parse_match_alt(&mut self) -> Result<SyntaxTree> {
        if self.peek().is_some_and(|t| t.text == "$") {
            return self.parse_antiquote(Some(&HierName::atomic("matchAlt")), false);
        }
        let bar = self.expect("|")?;
        let pats = self.parse_seq(Some(","), |p| !p.peek_is("=>"), |p| p.term(0))?;
        let arrow = self.expect("=>")?;
        let rhs = self.term(0)?;
        Ok(SyntaxTree::node(
            kinds::MATCH_ALT,
            vec![bar, SyntaxTree::null(pats), arrow, rhs],
        ))
    }

    /// Parses `` `(…) `` or ``` ``(…) ```, with an optional `cat|` prefix.
    pub fn parse_quotation(&mut self) -> Result<SyntaxTree> {
        let head = self.bump();
        let kind = match head.kind {
            TokenKind::QuoteHead => kinds::QUOT,
            TokenKind::DoubleQuoteHead => kinds::DQUOT,
            _ => return self.expected("quotation"),
        };
        let mut explicit = None;
        if let (Some(a), Some(b)) = (self.peek().cloned(), self.peek_at(1).cloned()) {
            if a.kind == TokenKind::Identifier && b.text == "|" && !b.space_before {
                let name = a.name.clone().unwrap_or_default();
                if self.tables.has_category(&name) {
                    self.bump();
                    self.bump();
                    explicit = Some(name);
                }
            }
        }
        let body = match &explicit {
            Some(cat) if cat_is(cat, "command") => self.parse_commands_until_close()?,
            Some(cat) => {
                let b = self.parse_category(cat, 0)?;
                self.expect(")")?;
                b
            }
            None => {
                let start = self.idx;
                let as_term = self.attempt(|p| {
                    let b = p.term(0)?;
                    p.expect(")")?;
                    Ok((b, p.idx))
                });
                self.idx = start;
                let as_cmd = self.attempt(|p| {
                    let b = p.parse_commands_until_close()?;
                    Ok((b, p.idx))
                });
                match (as_term, as_cmd) {
                    (Ok((t, ti)), Ok((c, _))) => {
                        if t != c {
                            return Err(Error::at(ErrorKind::AmbiguousQuotation, Some(head.pos)));
                        }
                        self.idx = ti;
                        t
                    }
                    (Ok((t, ti)), Err(_)) => {
                        self.idx = ti;
                        t
                    }
                    (Err(_), Ok((c, ci))) => {
                        self.idx = ci;
                        c
                    }
                    (Err(e), Err(_)) => return Err(e),
                }
            }
        };
        let cat_atom = SyntaxTree::atom(explicit.map(|c| c.to_string()).unwrap_or_default());
        Ok(SyntaxTree::node(kind, vec![cat_atom, body]))
    }

    fn parse_commands_until_close(&mut self) -> Result<SyntaxTree> {
        let command = HierName::atomic("command");
        let mut cmds = Vec::new();
        while !self.peek_is(")") {
            cmds.push(self.parse_category(&command, 0)?);
        }
        self.expect(")")?;
        match cmds.len() {
            0 => self.expected("command"),
            1 => Ok(cmds.pop().unwrap()),
            _ => Ok(SyntaxTree::node(kinds::COMMAND_SEQ, cmds)),
        }
    }

    fn parse_command_builtin(&mut self) -> Result<Parsed> {
        let Some(t) = self.peek().cloned() else {
            return self.expected("command");
        };
        if t.kind != TokenKind::Keyword {
            return self.expected("command");
        }
        let tree = match t.text.as_str() {
            "def" => {
                let kw = self.expect("def")?;
                let name = self.parse_ident_slot()?;
                let ty = if self.peek_is(":") {
                    let c = self.expect(":")?;
                    vec![c, self.term(0)?]
                } else {
                    vec![]
                };
                let assign = self.expect(":=")?;
                let body = self.term(0)?;
                SyntaxTree::node(kinds::DEF, vec![kw, name, SyntaxTree::null(ty), assign, body])
            }
            "theorem" => {
                let kw = self.expect("theorem")?;
                let name = self.parse_ident_slot()?;
                let binders = self.parse_seq(None, |p| p.peek_is("("), |p| p.parse_typed_binder())?;
                let colon = self.expect(":")?;
                let ty = self.term(0)?;
                let assign = self.expect(":=")?;
                let body = self.term(0)?;
                SyntaxTree::node(
                    kinds::THEOREM,
                    vec![kw, name, SyntaxTree::null(binders), colon, ty, assign, body],
                )
            }
            "axiom" => {
                let kw = self.expect("axiom")?;
                let name = self.parse_ident_slot()?;
                let colon = self.expect(":")?;
                let ty = self.term(0)?;
                SyntaxTree::node(kinds::AXIOM, vec![kw, name, colon, ty])
            }
            "declare_syntax_cat" => {
                let kw = self.expect("declare_syntax_cat")?;
                let name = self.parse_ident_slot()?;
                SyntaxTree::node(kinds::DECLARE_CAT, vec![kw, name])
            }
            "syntax" => self.parse_syntax_command()?,
            "macro_rules" => {
                let kw = self.expect("macro_rules")?;
                let alts = self.parse_seq(
                    None,
                    |p| p.peek_is("|"),
                    |p| {
                        let bar = p.expect("|")?;
                        let pat = match p.peek().map(|t| t.kind) {
                            Some(TokenKind::QuoteHead) => p.parse_quotation()?,
                            _ => return p.expected("quotation pattern"),
                        };
                        let arrow = p.expect("=>")?;
                        let rhs = p.term(0)?;
                        Ok(SyntaxTree::node(kinds::MACRO_RULES_ALT, vec![bar, pat, arrow, rhs]))
                    },
                )?;
                if alts.is_empty() {
                    return self.expected("'|'");
                }
                SyntaxTree::node(kinds::MACRO_RULES, vec![kw, SyntaxTree::null(alts)])
            }
            _ => return self.expected("command"),
        };
        Ok((tree, MAX_PREC))
    }

    fn parse_syntax_command(&mut self) -> Result<SyntaxTree> {
        let kw = self.expect("syntax")?;
        let mut prec = vec![];
        if let (Some(c), Some(n)) = (self.peek().cloned(), self.peek_at(1).cloned()) {
            if c.text == ":" && !c.space_before && n.kind == TokenKind::Numeral {
                self.bump();
                self.bump();
                prec = vec![atom_of(&c), SyntaxTree::node(kinds::NUM, vec![atom_of(&n)])];
            }
        }
        let mut name = vec![];
        if self.peek_is("(") && self.peek_at(1).is_some_and(|t| t.text == "name") {
            let open = self.expect("(")?;
            let key = self.parse_ident_slot()?;
            let assign = self.expect(":=")?;
            let k = self.parse_ident_slot()?;
            let close = self.expect(")")?;
            name = vec![open, key, assign, k, close];
        }
        let mut items = Vec::new();
        while let Some(t) = self.peek().cloned() {
            match t.kind {
                TokenKind::StringLiteral => {
                    self.bump();
                    items.push(SyntaxTree::node(kinds::STR, vec![atom_of(&t)]));
                }
                TokenKind::Identifier => {
                    self.bump();
                    let mut prec_txt = String::new();
                    let mut rep = String::new();
                    if let (Some(c), Some(n)) = (self.peek().cloned(), self.peek_at(1).cloned()) {
                        if c.text == ":" && !c.space_before && n.kind == TokenKind::Numeral && !n.space_before {
                            self.bump();
                            self.bump();
                            prec_txt = n.text.clone();
                        }
                    }
                    if let Some(n) = self.peek().cloned() {
                        if n.text == "*" && !n.space_before {
                            self.bump();
                            rep = "*".into();
                        } else if SPLICE_SEPARATORS.contains(&n.text.as_str())
                            && !n.space_before
                            && self.peek_at(1).is_some_and(|s| s.text == "*" && !s.space_before)
                        {
                            self.bump();
                            self.bump();
                            rep = format!("{}*", n.text);
                        }
                    }
                    items.push(SyntaxTree::node(
                        kinds::SYNTAX_SLOT,
                        vec![ident_of(&t), SyntaxTree::atom(prec_txt), SyntaxTree::atom(rep)],
                    ));
                }
                _ => break,
            }
        }
        if items.is_empty() {
            return self.expected("syntax item");
        }
        let colon = self.expect(":")?;
        let cat = self.parse_ident_slot()?;
        Ok(SyntaxTree::node(
            kinds::SYNTAX,
            vec![
                kw,
                SyntaxTree::null(prec),
                SyntaxTree::null(name),
                SyntaxTree::null(items),
                colon,
                cat,
            ],
        ))
    }

    fn parse_tactic_builtin(&mut self) -> Result<Parsed> {
        let Some(t) = self.peek().cloned() else {
            return self.expected("tactic");
        };
        let tactic = HierName::atomic("tactic");
        let tree = match t.text.as_str() {
            "intro" if t.kind == TokenKind::Keyword => {
                let kw = self.bump();
                let id = self.parse_ident_slot()?;
                SyntaxTree::node(kinds::INTRO, vec![atom_of(&kw), id])
            }
            "exact" if t.kind == TokenKind::Keyword => {
                let kw = self.bump();
                let e = self.term(0)?;
                SyntaxTree::node(kinds::EXACT, vec![atom_of(&kw), e])
            }
            "assumption" | "skip" | "fail" if t.kind == TokenKind::Keyword => {
                let kw = self.bump();
                SyntaxTree::node(t.text.as_str(), vec![atom_of(&kw)])
            }
            "try" if t.kind == TokenKind::Keyword => {
                let kw = self.bump();
                let body = self.parse_category(&tactic, 1)?;
                SyntaxTree::node(kinds::TRY, vec![atom_of(&kw), body])
            }
            "(" => {
                let open = self.expect("(")?;
                let body = self.parse_category(&tactic, 0)?;
                let close = self.expect(")")?;
                SyntaxTree::node(kinds::TACTIC_PAREN, vec![open, body, close])
            }
            _ => return self.expected("tactic"),
        };
        Ok((tree, MAX_PREC))
    }
}

fn compatible(slot: &HierName, annotated: Option<&HierName>) -> bool {
    match annotated {
        None => true,
        Some(a) if a == slot => true,
        Some(a) => {
            cat_is(slot, "term") && (cat_is(a, "ident") || cat_is(a, "num") || cat_is(a, "str") || cat_is(a, "term"))
        }
    }
}

fn command_start_tokens(tables: &ParserTables) -> HashSet<String> {
    let mut s: HashSet<String> = ["def", "theorem", "axiom", "syntax", "macro_rules", "declare_syntax_cat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some(c) = tables.category(&HierName::atomic("command")) {
        for r in &c.rules {
            if let Some(PatternItem::Literal(l)) = r.pattern.first() {
                s.insert(l.clone());
            }
        }
    }
    s
}

fn atom_of(t: &Token) -> SyntaxTree {
    SyntaxTree::Atom {
        info: SourceInfo::at(t.pos),
        value: t.text.clone(),
    }
}

fn ident_of(t: &Token) -> SyntaxTree {
    let value = t.name.clone().unwrap_or_else(|| HierName::from_dotted(&t.text));
    SyntaxTree::Ident {
        info: SourceInfo::at(t.pos),
        raw: value.to_string(),
        value,
        preresolved: Vec::new(),
    }
}

/// Parses `src` entirely as one `cat` tree against `tables`.
pub fn parse_str(tables: &ParserTables, cat: &str, src: &str) -> Result<SyntaxTree> {
    Parser::new(src, 0, tables).parse_all(&HierName::from_dotted(cat))
}
