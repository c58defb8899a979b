//! The initial environment: built-in signatures, the procedural `macro`,
//! `notation` and fun-match transformers, and `prelude.lean`.

use std::sync::Arc;

use crate::context::DeclKind;
use crate::elab::CoreType;
use crate::error::{Error, ErrorKind, Result};
use crate::expander::{MacroEnv, Session};
use crate::name::HierName;
use crate::parser::{parse_str, PatternItem};
use crate::quotation::{
    instantiate, make_rule_transformer, pattern_of_quotation, process_quotation, MatchEnv, Payload, RuleAlt, RuleRhs,
};
use crate::syntax::{kinds, SyntaxTree};

pub const PRELUDE_SOURCE: &str = include_str!("prelude.lean");

pub const MACRO_CMD: &str = "macroCmd";
pub const NOTATION_CMD: &str = "notationCmd";

fn builtin_signatures(s: &mut Session) -> Result<()> {
    use CoreType::*;
    let nat2 = CoreType::arrow(Nat, CoreType::arrow(Nat, Nat));
    for (name, kind, ty) in [
        ("Nat", DeclKind::Type, None),
        ("Unit", DeclKind::Type, None),
        ("Prod", DeclKind::Type, None),
        ("Prop", DeclKind::Type, None),
        ("Prod.mk", DeclKind::Builtin, None),
        ("Unit.unit", DeclKind::Builtin, Some(Unit)),
        ("Nat.add", DeclKind::Builtin, Some(nat2)),
    ] {
        s.declare_builtin(name, kind, ty)?;
    }
    Ok(())
}

/// Installs everything into `session`; the prelude must load cleanly.
pub fn load_prelude(session: &mut Session) -> Result<()> {
    builtin_signatures(session)?;
    session.register_transformer(
        HierName::atomic(MACRO_CMD),
        Arc::new(|stx, env| macro_command(stx, env).map(Some)),
    );
    session.register_transformer(
        HierName::atomic(NOTATION_CMD),
        Arc::new(|stx, env| notation_command(stx, env).map(Some)),
    );
    let fun_match = fun_match_rule(session)?;
    session.register_transformer(HierName::atomic(kinds::FUN_MATCH), fun_match);
    let out = crate::driver::process_source(session, PRELUDE_SOURCE, "<prelude>");
    match out.diagnostics.into_iter().next() {
        Some(d) => Err(d.error),
        None => Ok(()),
    }
}

fn atom(s: &str) -> SyntaxTree {
    SyntaxTree::atom(s)
}

fn shape(msg: String) -> Error {
    ErrorKind::Shape(msg).into()
}

/// `macro items : cat => rhs` becomes a `syntax` rule with a generated kind
/// plus one `macro_rules` alternative matching exactly that kind.
fn macro_command(stx: &SyntaxTree, env: &mut MacroEnv) -> Result<SyntaxTree> {
    let cat = stx.child(3).clone();
    let cat_name = cat.ident_value().map(HierName::base).unwrap_or_default();
    let mut items = Vec::new();
    let mut pattern_items = Vec::new();
    let mut pattern_children = Vec::new();
    for arg in stx.child(1).children() {
        if arg.is_kind("macroArgStr") {
            let lit = arg.child(0);
            let text = crate::lexer::unescape_string(lit.child(0).atom_value().unwrap_or("\"\""));
            let text = text.trim().to_string();
            items.push(lit.clone());
            pattern_items.push(PatternItem::Literal(text.clone()));
            pattern_children.push(atom(&text));
        } else if arg.is_kind("macroArgIdent") {
            let var = arg.child(0).clone();
            let slot_cat = arg.child(2).clone();
            let slot_name = slot_cat.ident_value().map(HierName::base).unwrap_or_default();
            items.push(SyntaxTree::node(kinds::SYNTAX_SLOT, vec![slot_cat, atom(""), atom("")]));
            pattern_items.push(PatternItem::Slot {
                cat: slot_name.clone(),
                prec: None,
            });
            pattern_children.push(SyntaxTree::node(
                kinds::ANTIQUOT,
                vec![var, atom(&slot_name.to_string())],
            ));
        } else {
            return Err(shape(format!("unexpected macro argument '{arg}'")));
        }
    }
    let kind = env.tables.fresh_kind(&cat_name, &pattern_items);
    let syntax = SyntaxTree::node(
        kinds::SYNTAX,
        vec![
            atom("syntax"),
            SyntaxTree::null(vec![]),
            SyntaxTree::null(vec![
                atom("("),
                SyntaxTree::ident_str("name"),
                atom(":="),
                SyntaxTree::ident(kind.clone()),
                atom(")"),
            ]),
            SyntaxTree::null(items),
            atom(":"),
            cat,
        ],
    );
    let prefix = if crate::syntax::is_simple_kind(&cat_name, "term") {
        String::new()
    } else {
        cat_name.to_string()
    };
    let pattern = SyntaxTree::node(
        kinds::QUOT,
        vec![atom(&prefix), SyntaxTree::node(kind, pattern_children)],
    );
    let rules = SyntaxTree::node(
        kinds::MACRO_RULES,
        vec![
            atom("macro_rules"),
            SyntaxTree::null(vec![SyntaxTree::node(
                kinds::MACRO_RULES_ALT,
                vec![atom("|"), pattern, atom("=>"), stx.child(5).clone()],
            )]),
        ],
    );
    Ok(SyntaxTree::node(kinds::COMMAND_SEQ, vec![syntax, rules]))
}

/// Replaces identifiers spelled like a notation argument by antiquotations.
fn antiquote_args(stx: &SyntaxTree, args: &[String]) -> SyntaxTree {
    match stx {
        SyntaxTree::Ident { raw, .. } if args.contains(raw) => {
            SyntaxTree::node(kinds::ANTIQUOT, vec![stx.clone(), atom("")])
        }
        SyntaxTree::Node { kind, children } => SyntaxTree::Node {
            kind: kind.clone(),
            children: children.iter().map(|c| antiquote_args(c, args)).collect(),
        },
        other => other.clone(),
    }
}

/// `notation items => rhs` becomes a term-level `macro` whose right-hand
/// side quotes `rhs`, double-backticked when the declaration check is on.
fn notation_command(stx: &SyntaxTree, env: &mut MacroEnv) -> Result<SyntaxTree> {
    let mut args = Vec::new();
    let mut names = Vec::new();
    for item in stx.child(1).children() {
        if item.is_kind("notationItemStr") {
            args.push(SyntaxTree::node("macroArgStr", vec![item.child(0).clone()]));
        } else if item.is_kind("notationItemIdent") {
            let id = item.child(0).clone();
            names.push(id.ident_raw().unwrap_or_default().to_string());
            args.push(SyntaxTree::node(
                "macroArgIdent",
                vec![id, atom(":"), SyntaxTree::ident_str("term")],
            ));
        } else {
            return Err(shape(format!("unexpected notation item '{item}'")));
        }
    }
    let quote = if env.notation_precheck {
        kinds::DQUOT
    } else {
        kinds::QUOT
    };
    let rhs = SyntaxTree::node(quote, vec![atom(""), antiquote_args(stx.child(3), &names)]);
    Ok(SyntaxTree::node(
        MACRO_CMD,
        vec![
            atom("macro"),
            SyntaxTree::null(args),
            atom(":"),
            SyntaxTree::ident_str("term"),
            atom("=>"),
            rhs,
        ],
    ))
}

/// The combined `fun | pats => rhs | …` form: one fresh discriminant per
/// pattern of the first alternative, each from its own macro scope.
fn fun_match_rule(session: &Session) -> Result<crate::expander::Transformer> {
    let quote = |src: &str| parse_str(&session.tables, "term", src);
    let (_, pattern) = pattern_of_quotation(&quote("`(fun | $ps1,* => $rhs1 $alts:matchAlt*)")?)?;
    let var = process_quotation(&quote("`(x)")?, &session.gctx, &session.tables)?;
    let body = process_quotation(
        &quote("`(fun $discrs* => match $[$discrs:ident],* with | $ps1,* => $rhs1 $alts:matchAlt*)")?,
        &session.gctx,
        &session.tables,
    )?;
    let rhs = RuleRhs::Procedural(Arc::new(move |env: &MatchEnv, menv: &mut MacroEnv| {
        let n = env.get("ps1").and_then(Payload::elems).map_or(0, |v| v.len());
        let mut discrs = Vec::with_capacity(n);
        for _ in 0..n {
            let (d, _) = menv.scopes.with_fresh(|s| instantiate(&var, &MatchEnv::new(), s));
            discrs.push(d?);
        }
        let mut env = env.clone();
        env.insert("discrs".into(), Payload::Seq(discrs));
        instantiate(&body, &env, menv.scopes)
    }));
    Ok(make_rule_transformer(vec![RuleAlt { pattern, rhs }]))
}
