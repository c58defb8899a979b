//! End-to-end acceptance suite. Runs without the libtest harness so that each
//! criterion reports exactly one PASS/FAIL line.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use hygex::context::{DeclKind, LocalContext};
use hygex::driver::{new_session, process_source, run_source, with_big_stack, RunConfig, RunOutput};
use hygex::elab::{elab_term, CoreExpr, CoreType, ElabCtx};
use hygex::expander::{ExpanderConfig, Session, Stage};
use hygex::name::HierName;
use hygex::parser::{parse_str, Parser};
use hygex::prelude::PRELUDE_SOURCE;
use hygex::quotation::{instantiate, process_quotation, MatchEnv, Payload};
use hygex::syntax::{format_scoped, kinds, render, render_with_keywords, SyntaxTree};
use hygex::tactic::{run_tactic, ProofGoal, Prop, TacticState};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn corpus() -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("examples directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "lean"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect()
}

fn example(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn config(stage: Stage, trace_expansion: bool, trace_tactics: bool, precheck: bool) -> RunConfig {
    RunConfig {
        expander: ExpanderConfig {
            stage,
            trace_expansion,
            trace_tactics,
            notation_precheck: precheck,
            ..ExpanderConfig::default()
        },
        no_prelude: false,
    }
}

fn expand_traced(src: &str) -> RunOutput {
    run_source(src, "t.lean", &config(Stage::Expand, true, false, true))
}

fn lines(out: &str) -> Vec<&str> {
    out.lines().collect()
}

fn messages(out: &RunOutput) -> Vec<String> {
    out.diagnostics.iter().map(|d| d.error.to_string()).collect()
}

fn session() -> Session {
    new_session(&RunConfig::default()).expect("prelude loads")
}

/// First node of `kind` in pre-order.
fn find<'a>(t: &'a SyntaxTree, kind: &str) -> Option<&'a SyntaxTree> {
    if t.is_kind(kind) {
        return Some(t);
    }
    t.children().iter().find_map(|c| find(c, kind))
}

/// Replaces every identifier by its unscoped base name, without top-level
/// scopes, so that trees can be compared with hand-written ones.
fn erase(t: &SyntaxTree) -> SyntaxTree {
    match t {
        SyntaxTree::Ident { value, .. } => SyntaxTree::ident(value.base()),
        SyntaxTree::Node { kind, children } => SyntaxTree::Node {
            kind: kind.clone(),
            children: children.iter().map(erase).collect(),
        },
        other => other.without_info(),
    }
}

/// Parses `src` command by command, handing each command and the parser
/// tables it was parsed with to `f` before processing it in `s`.
fn for_each_command(s: &mut Session, src: &str, mut f: impl FnMut(&mut Session, &SyntaxTree) -> Outcome) -> Outcome {
    let mut offset = 0;
    loop {
        let tables = s.tables.clone();
        let mut p = Parser::new(src, offset, &tables);
        let cmd = match p.parse_command() {
            Ok(Some(c)) => c,
            Ok(None) => return Ok(()),
            Err(e) => return Err(format!("parse error at offset {offset}: {e}")),
        };
        offset = p.offset();
        f(s, &cmd)?;
        let _ = s.process_command(&cmd);
        s.trace.clear();
    }
}

// ---------------------------------------------------------------------------

fn const_example() -> Outcome {
    let out = expand_traced(&example("const.lean"));
    ensure!(out.diagnostics.is_empty(), "diagnostics: {:?}", messages(&out));
    let ls = lines(&out.stdout);
    ensure!(
        ls.contains(&"macro_rules | `(const $e) => `(fun x{x} => $e)"),
        "processed macro_rules missing:\n{}",
        out.stdout
    );
    ensure!(
        ls.contains(&"term_const_: const x ==> fun x.1{x} => x"),
        "expansion step missing:\n{}",
        out.stdout
    );
    ensure!(
        ls.last() == Some(&"def y := fun x.1 => x"),
        "final line: {:?}",
        ls.last()
    );

    // the body must be a global reference to `x`, not the binder `x.1`
    let mut s = session();
    let src = example("const.lean");
    let mut body = None;
    for_each_command(&mut s, &src, |s, cmd| {
        if cmd.is_kind(kinds::DEF) && cmd.child(1).ident_raw() == Some("y") {
            let outs = s.process_command(cmd).map_err(|e| e.to_string())?;
            body = Some(outs[0].expanded.child(4).clone());
        }
        Ok(())
    })?;
    let body = body.ok_or("no def y")?;
    let binder = &body.child(1).children()[0];
    ensure!(
        binder.ident_value() == Some(&HierName::atomic("x").add_macro_scope(hygex::name::MacroScope(1))),
        "binder {binder}"
    );
    let r = body.child(3);
    ensure!(r.is_kind(kinds::GLOBAL_REF), "body {r} is not a global reference");
    ensure!(
        r.child(0).ident_value() == Some(&HierName::atomic("x")),
        "body refers to {}",
        r.child(0)
    );
    Ok(())
}

fn globals(s: &Session) -> BTreeSet<String> {
    s.gctx
        .symbols()
        .map(|g| render(&SyntaxTree::ident(g.clone())))
        .collect()
}

fn macro_tower() -> Outcome {
    let src = example("macro-macro.lean");
    let mut s = new_session(&config(Stage::Expand, true, false, true)).map_err(|e| e.to_string())?;
    let before = globals(&s);
    let out = process_source(&mut s, &src, "macro-macro.lean");
    ensure!(out.diagnostics.is_empty(), "diagnostics: {:?}", messages(&out));
    let new: BTreeSet<String> = globals(&s).difference(&before).cloned().collect();
    let want: BTreeSet<String> = ["f.1", "f.2", "f.1.2"].into_iter().map(String::from).collect();
    ensure!(new == want, "new globals {new:?}");
    let ls = lines(&out.stdout);
    for l in [
        "def f.1 := 1",
        "command_mm: mm ==> def f.2 := f.1.2{f.1} + 1 def f.1.2{f.1} := f.2 + 1",
        "def f.2 := f.1 + 1",
        "def f.1.2 := f.2 + 1",
    ] {
        ensure!(ls.contains(&l), "missing line {l:?} in\n{}", out.stdout);
    }

    // keeping only the latest scope collapses f.1.2 onto f.2
    let mut k = new_session(&RunConfig::default()).map_err(|e| e.to_string())?;
    k.scopes.keep_last_only = true;
    let before = globals(&k);
    let out = process_source(&mut k, &src, "macro-macro.lean");
    let new: BTreeSet<String> = globals(&k).difference(&before).cloned().collect();
    let redefined = out
        .diagnostics
        .iter()
        .any(|d| d.error.to_string() == "'f.2' has already been declared");
    ensure!(
        redefined && !new.contains("f.1.2"),
        "keep-last mode did not collide: globals {new:?}"
    );
    Ok(())
}

fn quotation_preresolution() -> Outcome {
    let mut s = Session::default();
    for g in ["a.a", "b.a"] {
        s.declare_builtin(g, DeclKind::Axiom, Some(CoreType::Nat))
            .map_err(|e| e.to_string())?;
    }
    let q = parse_str(&s.tables, "term", "`(a + $b)").map_err(|e| e.to_string())?;
    let t = process_quotation(&q, &s.gctx, &s.tables).map_err(|e| e.to_string())?;
    ensure!(t.body.is_kind(kinds::PLUS), "template {}", t.body);
    let SyntaxTree::Ident {
        value,
        preresolved,
        raw,
        ..
    } = t.body.child(0)
    else {
        return Err(format!("lhs {} is not an identifier", t.body.child(0)));
    };
    let want = vec![HierName::from_dotted("a.a"), HierName::from_dotted("b.a")];
    ensure!(*preresolved == want, "preresolved {preresolved:?}");
    ensure!(raw == "a" && !value.has_macro_scopes(), "template identifier {value}");
    ensure!(
        t.body.child(1).atom_value() == Some("+"),
        "operator {}",
        t.body.child(1)
    );
    ensure!(t.body.child(2).is_kind(kinds::ANTIQUOT), "hole {}", t.body.child(2));

    let mut env = MatchEnv::new();
    env.insert("b".into(), Payload::Tree(SyntaxTree::num(7)));
    let (out, sc) = s.scopes.with_fresh(|sc| instantiate(&t, &env, sc));
    let out = out.map_err(|e| e.to_string())?;
    ensure!(sc.is_some(), "no macro scope allocated");
    ensure!(
        format_scoped(out.child(0)) == "a.1{a.a,b.a}",
        "instantiated {}",
        format_scoped(out.child(0))
    );
    ensure!(out.child(2) == &SyntaxTree::num(7), "spliced {}", out.child(2));
    Ok(())
}

fn fun_match() -> Outcome {
    let out = expand_traced(&example("funmatch.lean"));
    ensure!(out.diagnostics.is_empty(), "diagnostics: {:?}", messages(&out));
    let want = "funMatch: fun | some a, some b => some (a + b) | _, _ => none ==> \
                fun x.1 x.2 => match x.1, x.2 with | some a, some b => some (a + b) | _, _ => none";
    ensure!(lines(&out.stdout).contains(&want), "trace:\n{}", out.stdout);

    let mut s = session();
    let src = example("funmatch.lean");
    let mut step = None;
    for_each_command(&mut s, &src, |s, cmd| {
        if cmd.is_kind(kinds::DEF) {
            step = s.expand_macro_step(cmd.child(4)).map_err(|e| e.to_string())?;
        }
        Ok(())
    })?;
    let (t, _) = step.ok_or("fun-match did not expand")?;
    let binders = t.child(1).children();
    let discrs: Vec<_> = find(&t, kinds::MATCH)
        .ok_or("no match")?
        .child(1)
        .children()
        .iter()
        .filter(|c| c.is_ident())
        .collect();
    ensure!(binders.len() == 2 && discrs.len() == 2, "binders {binders:?}");
    let scopes: Vec<_> = binders
        .iter()
        .map(|b| b.ident_value().unwrap().macro_scopes())
        .collect();
    ensure!(
        scopes[0] != scopes[1] && scopes.iter().all(|s| s.len() == 1),
        "scopes {scopes:?}"
    );
    for (b, d) in binders.iter().zip(&discrs) {
        ensure!(b.ident_value() == d.ident_value(), "binder {b} vs discriminant {d}");
    }
    Ok(())
}

/// Hand-derived tuple rule, one step: `()` is the unit, `(e)` is `e`, and
/// `(e, es,*)` is `Prod.mk e (es,*)`.
fn tuple_oracle(elems: &[&str]) -> String {
    match elems {
        [] => "Unit.unit".into(),
        [e] => e.to_string(),
        [e, rest @ ..] => {
            let inner = tuple_oracle(rest);
            let inner = if rest.len() > 1 { format!("({inner})") } else { inner };
            format!("Prod.mk {e} {inner}")
        }
    }
}

fn tuples() -> Outcome {
    let mut s = session();
    s.declare_builtin("e", DeclKind::Axiom, Some(CoreType::Nat))
        .map_err(|e| e.to_string())?;
    // single steps, by hand
    for (src, want) in [
        ("()", "Unit.unit"),
        ("(e)", "e"),
        ("(1, 2, 3)", "Prod.mk 1 (2, 3)"),
        ("(2, 3)", "Prod.mk 2 (3)"),
        ("(3)", "3"),
    ] {
        let t = parse_str(&s.tables, "term", src).map_err(|e| e.to_string())?;
        let (out, _) = s
            .expand_macro_step(&t)
            .map_err(|e| e.to_string())?
            .ok_or(format!("{src} did not step"))?;
        ensure!(
            render(&erase(&out)) == want,
            "{src} stepped to {}",
            render(&erase(&out))
        );
    }
    // full expansion equals the composed steps
    for (src, elems) in [("()", vec![]), ("(e)", vec!["e"]), ("(1, 2, 3)", vec!["1", "2", "3"])] {
        let t = parse_str(&s.tables, "term", src).map_err(|e| e.to_string())?;
        let out = s
            .expand_term(&t, &mut LocalContext::default())
            .map_err(|e| e.to_string())?;
        let got = render(&out);
        ensure!(
            got == tuple_oracle(&elems),
            "{src} expanded to {got}, expected {}",
            tuple_oracle(&elems)
        );
    }
    ensure!(tuple_oracle(&["1", "2", "3"]) == "Prod.mk 1 (Prod.mk 2 3)", "oracle");
    let out = expand_traced(&example("tuples.lean"));
    ensure!(out.diagnostics.is_empty(), "diagnostics: {:?}", messages(&out));
    for l in [
        "def t0 := Unit.unit",
        "def t1 := e",
        "def t3 := Prod.mk 1 (Prod.mk 2 3)",
    ] {
        ensure!(lines(&out.stdout).contains(&l), "missing {l:?}");
    }
    Ok(())
}

fn precheck() -> Outcome {
    let src = example("precheck.lean");
    let out = run_source(&src, "precheck.lean", &config(Stage::Expand, false, false, true));
    let ds: Vec<String> = out.diagnostics.iter().map(|d| d.render()).collect();
    ensure!(ds.len() == 2, "diagnostics {ds:?}");
    ensure!(
        ds[0].starts_with("precheck.lean:4:") && ds[0].contains("unknown identifier 'z'"),
        "{}",
        ds[0]
    );
    ensure!(
        ds[1].starts_with("precheck.lean:7:") && ds[1].contains("unknown identifier 'Exits.intro'"),
        "{}",
        ds[1]
    );

    let use_site = format!("{src}def u := ∃∃ a, a\n");
    let out = run_source(&use_site, "precheck.lean", &config(Stage::Expand, false, false, false));
    let ds: Vec<String> = out.diagnostics.iter().map(|d| d.render()).collect();
    ensure!(
        !ds.iter().any(|d| d.starts_with("precheck.lean:7:")),
        "declaration still rejected: {ds:?}"
    );
    ensure!(
        ds.iter()
            .any(|d| d.starts_with("precheck.lean:10:") && d.contains("unknown identifier 'Exits.intro'")),
        "use site not rejected: {ds:?}"
    );
    // `bad` is a double-backtick macro_rules, checked regardless of the flag
    ensure!(ds.iter().any(|d| d.contains("unknown identifier 'z'")), "{ds:?}");

    // every prelude notation passes the check
    let notations = PRELUDE_SOURCE.lines().filter(|l| l.starts_with("notation ")).count();
    ensure!(notations >= 3, "prelude has only {notations} notations");
    new_session(&config(Stage::Expand, false, false, true)).map_err(|e| format!("prelude rejected: {e}"))?;
    Ok(())
}

fn tactic_hygiene() -> Outcome {
    let out = run_source(
        &example("tactics.lean"),
        "tactics.lean",
        &config(Stage::Elaborate, false, false, true),
    );
    let ds: Vec<String> = out.diagnostics.iter().map(|d| d.render()).collect();
    ensure!(
        ds.iter()
            .any(|d| d.starts_with("tactics.lean:3:") && d.contains("unknown identifier 'h'")),
        "triv not rejected: {ds:?}"
    );
    ensure!(
        lines(&out.stdout).contains(&"theorem triv2 : p → p proved"),
        "triv2:\n{}",
        out.stdout
    );
    ensure!(!out.stdout.contains("theorem triv :"), "triv proved:\n{}", out.stdout);
    Ok(())
}

fn lazy_repeat() -> Outcome {
    let out = run_source(
        &example("tactics.lean"),
        "tactics.lean",
        &config(Stage::Elaborate, true, false, true),
    );
    let ls = lines(&out.stdout);
    let unfoldings = |target: &str| {
        let end = ls.iter().position(|l| l.starts_with(target)).unwrap_or(ls.len());
        let start = ls[..end]
            .iter()
            .rposition(|l| l.starts_with("theorem "))
            .map_or(0, |i| i + 1);
        ls[start..end]
            .iter()
            .filter(|l| l.starts_with("tactic_repeat_:"))
            .count()
    };
    ensure!(ls.contains(&"theorem rep0 : p proved"), "rep0:\n{}", out.stdout);
    ensure!(
        unfoldings("theorem rep0") == 1,
        "rep0 unfolded {} times",
        unfoldings("theorem rep0")
    );
    ensure!(ls.contains(&"theorem rep2 : p → q → p proved"), "rep2:\n{}", out.stdout);
    ensure!(
        unfoldings("theorem rep2") == 3,
        "rep2 unfolded {} times",
        unfoldings("theorem rep2")
    );

    // hypotheses introduced by the repetition stay distinct
    let mut s = session();
    let tac = parse_str(&s.tables, "tactic", "repeat intro h").map_err(|e| e.to_string())?;
    let atom = |n: &str| Prop::Atom(HierName::atomic(n));
    let imp = |a: Prop, b: Prop| Prop::Implies(Box::new(a), Box::new(b));
    let goal = imp(atom("p"), imp(atom("q"), imp(atom("r"), atom("p"))));
    let state = TacticState {
        goals: vec![ProofGoal {
            hyps: Default::default(),
            target: goal,
        }],
    };
    let state = run_tactic(&mut s, &tac, state).map_err(|e| e.to_string())?;
    let [g] = state.goals.as_slice() else {
        return Err(format!("goals {:?}", state.goals));
    };
    ensure!(g.target == atom("p") && g.hyps.len() == 3, "goal {g}");
    let props: Vec<&Prop> = g.hyps.values().collect();
    ensure!(props == [&atom("p"), &atom("q"), &atom("r")], "goal {g}");
    Ok(())
}

fn route_equivalence() -> Outcome {
    let mut compared = 0;
    let mut agreed_errors = 0;
    for (name, src) in corpus() {
        let mut s = new_session(&config(Stage::Elaborate, false, false, true)).map_err(|e| e.to_string())?;
        for_each_command(&mut s, &src, |s, cmd| {
            if !cmd.is_kind(kinds::DEF) {
                return Ok(());
            }
            let body = cmd.child(4);
            let ty_stx = match cmd.child(2).children() {
                [_, t] => Some(t.clone()),
                _ => None,
            };
            let ty = |s: &mut Session| ty_stx.as_ref().map(|t| ElabCtx::new(s).elab_type(t)).transpose();
            let mut a = s.clone();
            let ta = ty(&mut a).map_err(|e| e.to_string())?;
            let via_expansion = a
                .expand_term(body, &mut LocalContext::default())
                .and_then(|x| elab_term(&mut a, &x, ta.as_ref()));
            let mut b = s.clone();
            let tb = ty(&mut b).map_err(|e| e.to_string())?;
            let via_adapter = elab_term(&mut b, body, tb.as_ref());
            match (via_expansion, via_adapter) {
                (Ok((ea, ta)), Ok((eb, tb))) => {
                    ensure!(ea == eb && ta == tb, "{name}: {body}: {ea} : {ta} vs {eb} : {tb}");
                    compared += 1;
                }
                (Err(_), Err(_)) => agreed_errors += 1,
                (x, y) => return Err(format!("{name}: {body}: routes disagree: {x:?} / {y:?}")),
            }
            Ok(())
        })?;
    }
    ensure!(
        compared >= 10,
        "only {compared} terms elaborated ({agreed_errors} failed on both routes)"
    );

    let mut s = session();
    let pair = parse_str(&s.tables, "term", "⟨1, 2⟩").map_err(|e| e.to_string())?;
    let ty = CoreType::prod(CoreType::Nat, CoreType::Nat);
    let (e, t) = elab_term(&mut s, &pair, Some(&ty)).map_err(|e| e.to_string())?;
    let want = CoreExpr::Pair(Box::new(CoreExpr::NatLit(1)), Box::new(CoreExpr::NatLit(2)));
    ensure!(e == want && t == ty, "⟨1, 2⟩ elaborated to {e} : {t}");
    let err = elab_term(&mut s, &pair, None)
        .err()
        .ok_or("⟨1, 2⟩ without expected type elaborated")?;
    ensure!(err.to_string() == "expected type required", "error {err}");
    Ok(())
}

// ---------------------------------------------------------------------------

const POOL: [&str; 4] = ["x", "y", "z", "w"];

#[derive(Debug, Clone)]
struct Scenario {
    /// Macro binders; `None` is a hole.
    binders: Vec<Option<usize>>,
    /// Identifier the template refers to.
    reference: usize,
    /// Optional use-site binder around the invocation.
    outer: Option<usize>,
    /// Identifier passed as the macro argument.
    arg: usize,
}

impl Scenario {
    fn program(&self) -> (String, String) {
        let bs: Vec<&str> = self.binders.iter().map(|b| b.map_or("_", |i| POOL[i])).collect();
        let rules = format!(
            "syntax \"mk\" term : term\nmacro_rules | `(mk $e) => `(fun {} => $e + {})\n",
            bs.join(" "),
            POOL[self.reference]
        );
        let call = format!("mk {}", POOL[self.arg]);
        let def = match self.outer {
            Some(u) => format!("def t := fun {} => {call}", POOL[u]),
            None => format!("def t := {call}"),
        };
        (rules, def)
    }

    /// Expected binding of the argument and of the template reference: `true`
    /// for a local binder, `false` for the global.
    fn oracle(&self) -> (bool, bool) {
        (
            self.outer == Some(self.arg),
            self.binders.contains(&Some(self.reference)),
        )
    }
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        prop::collection::vec(prop::option::weighted(0.8, 0..POOL.len()), 1..5),
        0..POOL.len(),
        prop::option::of(0..POOL.len()),
        0..POOL.len(),
    )
        .prop_map(|(binders, reference, outer, arg)| Scenario {
            binders,
            reference,
            outer,
            arg,
        })
}

/// Checks an expanded reference against the oracle; a local must carry
/// macro scopes exactly when it was introduced by the macro.
fn check_ref(t: &SyntaxTree, name: &str, local: bool, from_macro: bool) -> Outcome {
    if local {
        let v = t.ident_value().ok_or(format!("{t} is not a local"))?;
        ensure!(v.base() == HierName::atomic(name), "{t} is not {name}");
        ensure!(v.has_macro_scopes() == from_macro, "{} captured", format_scoped(t));
    } else {
        ensure!(
            t.is_kind(kinds::GLOBAL_REF),
            "{} captured by a binder",
            format_scoped(t)
        );
        ensure!(
            t.child(0).ident_value() == Some(&HierName::atomic(name)),
            "{t} is not global {name}"
        );
    }
    Ok(())
}

fn run_scenario(base: &Session, sc: &Scenario) -> Outcome {
    let mut s = base.clone();
    let (rules, def) = sc.program();
    let out = process_source(&mut s, &rules, "rules.lean");
    ensure!(out.diagnostics.is_empty(), "{rules}: {:?}", messages(&out));
    let cmd = Parser::new(&def, 0, &s.tables)
        .parse_command()
        .map_err(|e| e.to_string())?
        .ok_or("empty")?;
    let outs = s.process_command(&cmd).map_err(|e| format!("{def}: {e}"))?;
    let expanded = &outs[0].expanded;
    let plus = find(expanded, kinds::PLUS).ok_or(format!("no sum in {}", render(expanded)))?;
    let (arg_local, ref_local) = sc.oracle();
    check_ref(plus.child(0), POOL[sc.arg], arg_local, false).map_err(|e| format!("{rules}{def}: {e}"))?;
    check_ref(plus.child(2), POOL[sc.reference], ref_local, true).map_err(|e| format!("{rules}{def}: {e}"))?;
    Ok(())
}

fn properties() -> Outcome {
    // capture scenarios
    let mut base = session();
    for n in POOL {
        base.declare_builtin(n, DeclKind::Axiom, Some(CoreType::Nat))
            .map_err(|e| e.to_string())?;
    }
    let cfg = Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let cases = std::cell::Cell::new(0);
    runner
        .run(&scenario(), |sc| {
            cases.set(cases.get() + 1);
            run_scenario(&base, &sc).map_err(TestCaseError::fail)
        })
        .map_err(|e| format!("capture: {e}"))?;
    ensure!(cases.get() >= 500, "only {} capture scenarios ran", cases.get());

    // parser round-trip
    for (name, src) in corpus() {
        let mut s = session();
        for_each_command(&mut s, &src, |s, cmd| {
            let text = render_with_keywords(cmd, &|k| s.tables.is_keyword(k));
            let again = Parser::new(&text, 0, &s.tables)
                .parse_command()
                .map_err(|e| format!("{name}: reparsing {text:?}: {e}"))?
                .ok_or(format!("{name}: {text:?} parsed to nothing"))?;
            ensure!(
                again.without_info() == cmd.without_info(),
                "{name}: {text:?} does not round-trip"
            );
            Ok(())
        })?;
    }

    // determinism
    for (name, src) in corpus() {
        for stage in [Stage::Expand, Stage::Elaborate] {
            let cfg = config(stage, true, true, true);
            let a = run_source(&src, &name, &cfg).combined();
            let b = run_source(&src, &name, &cfg).combined();
            ensure!(a == b, "{name}: two runs differ");
        }
    }
    Ok(())
}

fn bigops() -> Outcome {
    let src = example("bigop.lean");
    let out = expand_traced(&src);
    ensure!(out.diagnostics.is_empty(), "diagnostics: {:?}", messages(&out));
    let ls = lines(&out.stdout);
    for (op, def) in [("Σ", "sum"), ("Π", "prod"), ("⨆", "sup")] {
        let step = ls
            .iter()
            .position(|l| l.starts_with(&format!("term_{op}(_)_:")))
            .ok_or(format!("{op} never expanded"))?;
        ensure!(
            ls.get(step + 1).is_some_and(|l| l.starts_with("term_big_[_,_](_)_:")),
            "{op} does not go through the fold node"
        );
        ensure!(
            ls.iter().any(|l| l.starts_with(&format!("def {def} := List.foldr "))),
            "{def} is not a fold"
        );
    }

    // one index category, declared once; each operator adds exactly one rule
    let mut s = session();
    let mut index_rules = 0;
    let mut index_cats = 0;
    let mut rules_per_op = std::collections::BTreeMap::<String, usize>::new();
    for_each_command(&mut s, &src, |_, cmd| {
        let text = render(cmd);
        if cmd.is_kind(kinds::DECLARE_CAT) {
            index_cats += 1;
        }
        if cmd.is_kind(kinds::SYNTAX) && text.ends_with(": index") {
            index_rules += 1;
        }
        if cmd.is_kind(kinds::MACRO_RULES) {
            for alt in cmd.child(1).children() {
                let head = alt
                    .child(1)
                    .child(1)
                    .children()
                    .first()
                    .and_then(|a| a.atom_value())
                    .unwrap_or("")
                    .to_string();
                *rules_per_op.entry(head).or_default() += 1;
            }
        }
        Ok(())
    })?;
    ensure!(
        index_cats == 1 && index_rules == 2,
        "index declared {index_cats} times with {index_rules} rules"
    );
    for op in ["Σ", "Π", "⨆"] {
        ensure!(
            rules_per_op.get(op) == Some(&1),
            "{op} has {:?} rules",
            rules_per_op.get(op)
        );
    }
    ensure!(rules_per_op.get("big_") == Some(&2), "fold rules {:?}", rules_per_op);
    Ok(())
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("const example", const_example),
        ("macro-macro tower", macro_tower),
        ("quotation preresolution", quotation_preresolution),
        ("fun-match", fun_match),
        ("tuple macros", tuples),
        ("precheck", precheck),
        ("tactic hygiene", tactic_hygiene),
        ("lazy repeat", lazy_repeat),
        ("route equivalence", route_equivalence),
        ("property suites", properties),
        ("bigop factoring", bigops),
    ];
    let failures = with_big_stack(move || {
        let mut failures = 0;
        for (i, (name, f)) in criteria.into_iter().enumerate() {
            let started = std::time::Instant::now();
            let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
                Err(p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into()))
            });
            let ms = started.elapsed().as_millis();
            match result {
                Ok(()) => println!("PASS {:>2} {name} ({ms} ms)", i + 1),
                Err(e) => {
                    failures += 1;
                    println!("FAIL {:>2} {name}: {e}", i + 1);
                }
            }
        }
        failures
    });
    if failures > 0 {
        std::process::exit(1);
    }
}
