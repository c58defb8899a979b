use std::fmt;

use crate::name::{HierName, MacroScope};
use crate::syntax::Position;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ErrorKind {
    #[error("lexical error: {0}")]
    Lex(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("ambiguous quotation: parses differently as term and as command")]
    AmbiguousQuotation,
    #[error("unknown syntax category '{0}'")]
    UnknownCategory(HierName),
    #[error("syntax category '{0}' already exists")]
    DuplicateCategory(HierName),
    #[error("duplicate syntax node kind '{0}'")]
    DuplicateKind(HierName),
    #[error("expected an identifier, found '{0}'")]
    NotAnIdentifier(String),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("no macro or core form for syntax kind '{0}'")]
    NoTransformer(HierName),
    #[error("no macro_rules alternative of '{0}' matched the input")]
    NoMatch(HierName),
    #[error("macro expansion depth limit ({0}) exceeded")]
    DepthExceeded(usize),
    #[error("'{0}' has already been declared")]
    Redefinition(HierName),
    #[error("antiquotation shape mismatch: {0}")]
    Shape(String),
    #[error("unknown antiquotation category '{0}'")]
    UnknownAntiquotCategory(String),
    #[error("unsupported macro_rules right-hand side: {0}")]
    UnsupportedRhs(String),
    #[error(
        "precheck cannot analyze syntax of kind '{0}'; register a precheck hook or use a single-backtick quotation"
    )]
    NotAnalyzable(HierName),
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("ambiguous reference, candidates: {0}")]
    Ambiguous(String),
    #[error("expected type required")]
    ExpectedTypeRequired,
    #[error("cannot elaborate: {0}")]
    Elab(String),
    #[error("tactic '{tactic}' failed: {reason}")]
    TacticFailed { tactic: String, reason: String },
    #[error("no goals remaining")]
    NoGoals,
    #[error("unsolved goals: {0}")]
    UnsolvedGoals(String),
    #[error("unknown tactic '{0}'")]
    UnknownTactic(HierName),
    #[error("tactic macro unfolding limit ({0}) exceeded")]
    RepeatCapExceeded(usize),
    #[error("{0}")]
    Io(String),
}

/// One macro invocation on the expansion stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: HierName,
    pub scope: Option<MacroScope>,
}

/// An error with optional position and the macro backtrace active when it
/// was raised, outermost invocation first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Error {
    pub kind: ErrorKind,
    pub position: Option<Position>,
    pub frames: Vec<Frame>,
}

impl Error {
    pub fn new(kind: ErrorKind) -> Self {
        Error {
            kind,
            position: None,
            frames: Vec::new(),
        }
    }

    pub fn at(kind: ErrorKind, position: Option<Position>) -> Self {
        Error {
            kind,
            position,
            frames: Vec::new(),
        }
    }

    pub fn with_position(mut self, pos: Option<Position>) -> Self {
        if self.position.is_none() {
            self.position = pos;
        }
        self
    }

    /// Records that the error surfaced inside `frame`. Called while unwinding,
    /// so the new frame is the outermost one so far.
    pub fn in_frame(mut self, frame: Frame) -> Self {
        self.frames.insert(0, frame);
        self
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

impl std::error::Error for Error {}

impl From<ErrorKind> for Error {
    fn from(kind: ErrorKind) -> Self {
        Error::new(kind)
    }
}
