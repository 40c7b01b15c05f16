//! Lexing, parsing and scope resolution of Dinolite source.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod resolve;

use std::fmt;

pub use ast::Program;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_program, parse_program_with_warnings};
pub use resolve::{resolve_scopes, DeclKind, FuncInfo, Resolved, ScopeInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("{pos}: lex error: {message}")]
    Lex { pos: Pos, message: String },
    #[error("{pos}: parse error: {message}")]
    Parse { pos: Pos, message: String },
    #[error("{pos}: resolve error: {message}")]
    Resolve { pos: Pos, message: String },
}

impl CompileError {
    pub fn pos(&self) -> Pos {
        match self {
            CompileError::Lex { pos, .. }
            | CompileError::Parse { pos, .. }
            | CompileError::Resolve { pos, .. } => *pos,
        }
    }
}

/// Output of [`check_source`]: the resolved program plus non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Checked {
    pub resolved: Resolved,
    pub warnings: Vec<String>,
}

/// Runs the whole frontend: tokenize, parse, resolve.
pub fn check_source(source: &str) -> Result<Checked, CompileError> {
    let tokens = tokenize(source)?;
    let (program, warnings) = parse_program_with_warnings(&tokens)?;
    Ok(Checked {
        resolved: resolve_scopes(program)?,
        warnings,
    })
}

/// Calls `f` on every identifier reference in the program, in source order.
pub fn visit_idents(p: &Program, f: &mut dyn FnMut(&ast::Ident)) {
    use ast::*;
    fn expr(e: &Expr, f: &mut dyn FnMut(&Ident)) {
        match e {
            Expr::Int(..) | Expr::Float(..) | Expr::Str(..) | Expr::Nil(_) => {}
            Expr::Ident(id) => f(id),
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, f);
                expr(rhs, f);
            }
            Expr::Unary { operand, .. } => expr(operand, f),
            Expr::Ternary {
                cond, then, els, ..
            } => {
                expr(cond, f);
                expr(then, f);
                expr(els, f);
            }
            Expr::Call { callee, args, .. } => {
                expr(callee, f);
                args.iter().for_each(|a| expr(a, f));
            }
            Expr::Index { base, index, .. } => {
                expr(base, f);
                expr(index, f);
            }
            Expr::Array(es, _) => es.iter().for_each(|a| expr(a, f)),
            Expr::Fill { size, init, .. } => {
                expr(size, f);
                expr(init, f);
            }
            Expr::Table(pairs, _) => pairs.iter().for_each(|(k, v)| {
                expr(k, f);
                expr(v, f);
            }),
        }
    }
    fn stmt(s: &Stmt, f: &mut dyn FnMut(&Ident)) {
        match s {
            Stmt::Var { decls, .. } => decls
                .iter()
                .filter_map(|d| d.init.as_ref())
                .for_each(|e| expr(e, f)),
            Stmt::Fun(d) => d.body.iter().flatten().for_each(|s| stmt(s, f)),
            Stmt::Assign { target, value, .. } | Stmt::OpAssign { target, value, .. } => {
                expr(value, f);
                expr(target, f);
            }
            Stmt::If {
                cond, then, els, ..
            } => {
                expr(cond, f);
                stmt(then, f);
                if let Some(e) = els {
                    stmt(e, f);
                }
            }
            Stmt::For {
                init,
                cond,
                update,
                body,
                ..
            } => {
                if let Some(i) = init {
                    stmt(i, f);
                }
                if let Some(c) = cond {
                    expr(c, f);
                }
                if let Some(u) = update {
                    stmt(u, f);
                }
                stmt(body, f);
            }
            Stmt::While { cond, body, .. } => {
                expr(cond, f);
                stmt(body, f);
            }
            Stmt::Break(_) | Stmt::Continue(_) => {}
            Stmt::Return(v, _) => {
                if let Some(v) = v {
                    expr(v, f);
                }
            }
            Stmt::Expr(e) => expr(e, f),
            Stmt::Block(body, _) => body.iter().for_each(|s| stmt(s, f)),
        }
    }
    p.body.iter().for_each(|s| stmt(s, f));
}
