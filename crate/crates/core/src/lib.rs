//! A hygienic macro expander for a small theorem-prover-style command language.

pub mod context;
pub mod driver;
pub mod elab;
pub mod error;
pub mod expander;
pub mod lexer;
pub mod name;
pub mod parser;
pub mod precheck;
pub mod prelude;
pub mod quotation;
pub mod scope;
pub mod syntax;
pub mod tactic;
