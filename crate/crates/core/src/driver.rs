//! Batch processing of command files.

use std::path::Path;

use crate::error::{Error, ErrorKind};
use crate::expander::{ExpanderConfig, Session, Stage};
use crate::parser::Parser;
use crate::syntax::render;

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub expander: ExpanderConfig,
    pub no_prelude: bool,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub file: String,
    pub error: Error,
}

impl Diagnostic {
    /// `file:line:col: error: message`, then one line per enclosing macro
    /// invocation, outermost first.
    pub fn render(&self) -> String {
        let mut s = match self.error.position {
            Some(p) => format!("{}:{}:{}: error: {}", self.file, p.line, p.column, self.error),
            None => format!("{}: error: {}", self.file, self.error),
        };
        for f in &self.error.frames {
            match f.scope {
                Some(sc) => s.push_str(&format!("\n  in macro {} (scope {})", f.kind, sc.0)),
                None => s.push_str(&format!("\n  in macro {}", f.kind)),
            }
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    /// Trace lines and results, one per line.
    pub stdout: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl RunOutput {
    /// Output followed by rendered diagnostics.
    pub fn combined(&self) -> String {
        let mut s = self.stdout.clone();
        for d in &self.diagnostics {
            s.push_str(&d.render());
            s.push('\n');
        }
        s
    }
}

/// A session with the prelude loaded unless disabled.
pub fn new_session(cfg: &RunConfig) -> Result<Session, Error> {
    let mut s = Session::new(cfg.expander.clone());
    if !cfg.no_prelude {
        // prelude commands are neither traced nor elaborated
        let saved = s.config.clone();
        s.config.trace_expansion = false;
        s.config.trace_tactics = false;
        s.config.stage = Stage::Expand;
        crate::prelude::load_prelude(&mut s)?;
        s.config = saved;
    }
    Ok(s)
}

/// Parses and processes `src` one command at a time, continuing after
/// errors.
pub fn process_source(session: &mut Session, src: &str, file: &str) -> RunOutput {
    let mut out = RunOutput::default();
    let mut offset = 0;
    let diag = |error| Diagnostic {
        file: file.to_string(),
        error,
    };
    loop {
        let tables = session.tables.clone();
        let mut p = Parser::new(src, offset, &tables);
        let cmd = match p.parse_command() {
            Ok(Some(cmd)) => cmd,
            Ok(None) => break,
            Err(e) => {
                out.diagnostics.push(diag(e));
                p.recover_to_next_command();
                if p.offset() <= offset {
                    break;
                }
                offset = p.offset();
                continue;
            }
        };
        offset = p.offset();
        let result = session.process_command(&cmd);
        for line in session.trace.drain(..) {
            out.stdout.push_str(&line);
            out.stdout.push('\n');
        }
        match result {
            Ok(outputs) => {
                for o in outputs {
                    let line = match session.config.stage {
                        Stage::Expand => Some(render(&o.expanded)),
                        Stage::Elaborate => o.elaborated,
                    };
                    if let Some(l) = line {
                        out.stdout.push_str(&l);
                        out.stdout.push('\n');
                    }
                }
            }
            Err(e) => out.diagnostics.push(diag(e)),
        }
    }
    out
}

pub fn run_source(src: &str, file: &str, cfg: &RunConfig) -> RunOutput {
    match new_session(cfg) {
        Ok(mut s) => process_source(&mut s, src, file),
        Err(e) => RunOutput {
            stdout: String::new(),
            diagnostics: vec![Diagnostic {
                file: "<prelude>".into(),
                error: e,
            }],
        },
    }
}

pub fn run_file(path: &Path, cfg: &RunConfig) -> RunOutput {
    let file = path.display().to_string();
    match std::fs::read_to_string(path) {
        Ok(src) => run_source(&src, &file, cfg),
        Err(e) => RunOutput {
            stdout: String::new(),
            diagnostics: vec![Diagnostic {
                file,
                error: Error::new(ErrorKind::Io(e.to_string())),
            }],
        },
    }
}

/// Deeply nested expansions recurse deeply; run them on a large stack.
pub fn with_big_stack<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> R {
    std::thread::Builder::new()
        .stack_size(256 * 1024 * 1024)
        .spawn(f)
        .expect("spawn worker thread")
        .join()
        .unwrap_or_else(|p| std::panic::resume_unwind(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> RunOutput {
        run_source(src, "t.lean", &RunConfig::default())
    }

    #[test]
    fn continues_after_errors() {
        let out = run("def a := b\ndef c := 1\n");
        assert_eq!(out.stdout, "def c := 1\n");
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(
            out.diagnostics[0].render(),
            "t.lean:1:10: error: unknown identifier 'b'"
        );
    }

    #[test]
    fn recovers_from_parse_errors() {
        let out = run("def := 1\ndef c := 1\n");
        assert_eq!(out.stdout, "def c := 1\n");
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn backtrace_lines() {
        let src = "syntax \"k\" term : term\nmacro_rules | `(k $e) => `(fun x => $e + zz)\ndef d := k 1\n";
        let out = run(src);
        let d = out.diagnostics[0].render();
        assert!(d.starts_with("t.lean:3:10: error: unknown identifier 'zz'"), "{d}");
        assert!(d.ends_with("\n  in macro term_k_ (scope 1)"), "{d}");
    }
}
