//! Frontend for the supported Fortran subset: lexer, recursive-descent
//! parser, symbol table and canonical pretty-printer.
//!
//! The subset is frozen to what the solver corpus needs: `SUBROUTINE`,
//! `INTEGER`/`REAL(KIND=8)` declarations with `DIMENSION`/`INTENT`/
//! `PARAMETER`, `DO`/`ENDDO`, block `IF`/`ELSE`/`ENDIF`, assignment,
//! `CALL`, `RETURN`, `&` continuations and `!` comments. Anything else
//! errs loudly instead of mistranslating. Implicit typing is always off:
//! every referenced name must be declared.

mod ast;
mod lexer;
mod parser;
mod pretty;

pub use ast::{
    structural_eq, BinOp, Decl, DeclItem, DimRange, Entity, ElemTy, Expr, ExprKind, ExprTy,
    Intent, Name, Stmt, StmtKind, Subroutine, SymKind, Symbol, SymbolTable, UnOp, VarRef,
};
pub use lexer::{detokenize, tokenize, Kw, OpTok, PunctTok, Token, TokenKind};
pub use parser::parse_unit;
pub use pretty::{pretty_print, print_expr};

use thiserror::Error;

/// Errors raised while lexing or parsing a source unit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("lex error at {line}:{column}: {message}")]
    Lex {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("parse error at line {line}: expected {expected}, found {found}")]
    Parse {
        line: u32,
        expected: String,
        found: String,
    },
    #[error("line {line}: '{name}' is used but never declared")]
    UndeclaredSymbol { name: String, line: u32 },
    #[error("line {line}: unsupported construct: {construct}")]
    UnsupportedConstruct { line: u32, construct: String },
    #[error("line {line}: '{name}' has rank {declared} but is referenced with {used} indices")]
    RankMismatch {
        name: String,
        line: u32,
        declared: usize,
        used: usize,
    },
    #[error("line {line}: '{name}' declared more than once")]
    DuplicateDecl { name: String, line: u32 },
    #[error("line {line}: type error: {message}")]
    Type { line: u32, message: String },
}

pub type Result<T> = std::result::Result<T, FrontendError>;
