//! Maximal-munch tokenizer driven by the active keyword set.

use std::collections::BTreeSet;

use crate::error::{Error, ErrorKind, Result};
use crate::name::{HierName, NameComponent};
use crate::syntax::{is_word_char, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Numeral,
    StringLiteral,
    /// `$` or `$[`.
    AntiquoteHead,
    /// `` `( ``
    QuoteHead,
    /// ``` ``( ```
    DoubleQuoteHead,
    /// Fixed punctuation such as `(` `)` `,`.
    Special,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Parsed name for identifiers.
    pub name: Option<HierName>,
    pub pos: Position,
    pub end: usize,
    /// Whether whitespace or a comment separates this token from the previous one.
    pub space_before: bool,
}

/// Punctuation that is always a token, independent of registered rules.
pub const SPECIALS: &[&str] = &["(", ")", "[", "]", ",", ":", ":=", "=>", "|", "⟨", "⟩", ";", "*", "_"];

/// Core words and symbols reserved without any rule registration.
pub const CORE_KEYWORDS: &[&str] = &[
    "fun",
    "match",
    "with",
    "by",
    "def",
    "theorem",
    "axiom",
    "syntax",
    "macro_rules",
    "declare_syntax_cat",
    "intro",
    "exact",
    "assumption",
    "skip",
    "fail",
    "try",
    "+",
    "→",
];

#[derive(Debug, Clone)]
pub struct KeywordSet {
    words: BTreeSet<String>,
}

impl Default for KeywordSet {
    fn default() -> Self {
        let mut words = BTreeSet::new();
        for k in SPECIALS.iter().chain(CORE_KEYWORDS) {
            words.insert((*k).to_string());
        }
        KeywordSet { words }
    }
}

impl KeywordSet {
    pub fn insert(&mut self, kw: &str) {
        self.words.insert(kw.to_string());
    }

    pub fn contains(&self, kw: &str) -> bool {
        self.words.contains(kw)
    }

    fn longest_symbolic_at(&self, rest: &str) -> Option<&str> {
        self.words
            .iter()
            .filter(|k| rest.starts_with(k.as_str()))
            .max_by_key(|k| k.len())
            .map(|k| k.as_str())
    }
}

pub struct Lexer<'a> {
    src: &'a str,
    keywords: &'a KeywordSet,
}

fn is_word_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str, keywords: &'a KeywordSet) -> Self {
        Lexer { src, keywords }
    }

    fn position(&self, offset: usize) -> Position {
        let before = &self.src[..offset];
        let line = before.matches('\n').count() as u32 + 1;
        let col_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = before[col_start..].chars().count() as u32 + 1;
        Position { line, column, offset }
    }

    fn err(&self, offset: usize, msg: String) -> Error {
        Error::at(ErrorKind::Lex(msg), Some(self.position(offset)))
    }

    /// Skips whitespace and `--` comments; returns the new offset.
    fn skip_trivia(&self, mut pos: usize) -> usize {
        loop {
            let rest = &self.src[pos..];
            let trimmed = rest.trim_start();
            pos += rest.len() - trimmed.len();
            if trimmed.starts_with("--") {
                pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                return pos;
            }
        }
    }

    /// Reads the token starting at or after `pos`, or `None` at end of input.
    pub fn next_token(&self, pos: usize) -> Result<Option<Token>> {
        let start = self.skip_trivia(pos);
        let space_before = start > pos || pos == 0;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok(None);
        };
        let mk = |kind, text: &str, end, name| Token {
            kind,
            text: text.to_string(),
            name,
            pos: self.position(start),
            end,
            space_before,
        };
        if is_word_start(c) || c == '«' {
            let (name, end) = self.scan_ident(start)?;
            let text = &self.src[start..end];
            if !text.contains('«') && self.keywords.contains(text) {
                let kind = if SPECIALS.contains(&text) {
                    TokenKind::Special
                } else {
                    TokenKind::Keyword
                };
                return Ok(Some(mk(kind, text, end, None)));
            }
            // A symbolic keyword strictly longer than the word wins.
            if let Some(kw) = self.keywords.longest_symbolic_at(rest) {
                if kw.len() > end - start {
                    return Ok(Some(mk(TokenKind::Keyword, kw, start + kw.len(), None)));
                }
            }
            return Ok(Some(mk(TokenKind::Identifier, text, end, Some(name))));
        }
        if c.is_ascii_digit() {
            let len = rest.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(rest.len());
            return Ok(Some(mk(TokenKind::Numeral, &rest[..len], start + len, None)));
        }
        if c == '"' {
            let end = self.scan_string(start)?;
            return Ok(Some(mk(TokenKind::StringLiteral, &self.src[start..end], end, None)));
        }
        if rest.starts_with("``(") {
            return Ok(Some(mk(TokenKind::DoubleQuoteHead, "``(", start + 3, None)));
        }
        if rest.starts_with("`(") {
            return Ok(Some(mk(TokenKind::QuoteHead, "`(", start + 2, None)));
        }
        if rest.starts_with("$[") {
            return Ok(Some(mk(TokenKind::AntiquoteHead, "$[", start + 2, None)));
        }
        if c == '$' {
            return Ok(Some(mk(TokenKind::AntiquoteHead, "$", start + 1, None)));
        }
        if let Some(kw) = self.keywords.longest_symbolic_at(rest) {
            let kind = if SPECIALS.contains(&kw) {
                TokenKind::Special
            } else {
                TokenKind::Keyword
            };
            return Ok(Some(mk(kind, kw, start + kw.len(), None)));
        }
        Err(self.err(start, format!("illegal character '{c}'")))
    }

    fn scan_ident(&self, start: usize) -> Result<(HierName, usize)> {
        let mut comps = Vec::new();
        let mut pos = start;
        loop {
            let rest = &self.src[pos..];
            if let Some(inner) = rest.strip_prefix('«') {
                let close = inner
                    .find('»')
                    .ok_or_else(|| self.err(pos, "unterminated «» identifier escape".into()))?;
                comps.push(NameComponent::Str(inner[..close].to_string()));
                pos += '«'.len_utf8() + close + '»'.len_utf8();
            } else {
                let len = rest
                    .char_indices()
                    .find(|&(i, ch)| !(is_word_char(ch) && (i > 0 || is_word_start(ch))))
                    .map_or(rest.len(), |(i, _)| i);
                if len == 0 {
                    return Err(self.err(pos, "expected identifier component".into()));
                }
                comps.push(NameComponent::Str(rest[..len].to_string()));
                pos += len;
            }
            let rest = &self.src[pos..];
            let mut chars = rest.chars();
            if chars.next() == Some('.') {
                match chars.next() {
                    Some(ch) if ch.is_ascii_digit() => {
                        return Err(self.err(
                            pos + 1,
                            "numeric name components are reserved for internal names".into(),
                        ))
                    }
                    Some(ch) if is_word_start(ch) || ch == '«' => {
                        pos += 1;
                        continue;
                    }
                    _ => {}
                }
            }
            return Ok((HierName::from_components(comps), pos));
        }
    }

    fn scan_string(&self, start: usize) -> Result<usize> {
        let mut escaped = false;
        for (i, ch) in self.src[start + 1..].char_indices() {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => return Ok(start + 1 + i + 1),
                _ => {}
            }
        }
        Err(self.err(start, "unterminated string literal".into()))
    }
}

/// Tokenizes the whole input against `keywords`.
pub fn tokenize(input: &str, keywords: &KeywordSet) -> Result<Vec<Token>> {
    let lexer = Lexer::new(input, keywords);
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(tok) = lexer.next_token(pos)? {
        pos = tok.end;
        out.push(tok);
    }
    Ok(out)
}

/// Decodes a string literal token's contents.
pub fn unescape_string(lit: &str) -> String {
    let inner = &lit[1..lit.len() - 1];
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}
