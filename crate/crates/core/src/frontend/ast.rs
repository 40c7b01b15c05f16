use std::fmt;

use super::Pos;
use crate::bytecode::Builtin;

/// Source position carried by AST nodes. Two `At` values always compare
/// equal, so derived `PartialEq` on the tree is structural equality.
#[derive(Debug, Clone, Copy, Default)]
pub struct At(pub Pos);

impl PartialEq for At {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl From<Pos> for At {
    fn from(p: Pos) -> Self {
        At(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeclId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub u32);

impl FuncId {
    pub const MAIN: FuncId = FuncId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hint {
    Inline,
    Pure,
    Jit,
}

impl Hint {
    pub fn name(self) -> &'static str {
        match self {
            Hint::Inline => "inline",
            Hint::Pure => "pure",
            Hint::Jit => "jit",
        }
    }

    pub fn from_name(s: &str) -> Option<Hint> {
        match s {
            "inline" => Some(Hint::Inline),
            "pure" => Some(Hint::Pure),
            "jit" => Some(Hint::Jit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

/// What an identifier reference was bound to by scope resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Decl(DeclId),
    Builtin(Builtin),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub pos: At,
    pub binding: Option<Binding>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64, At),
    Float(f64, At),
    Str(String, At),
    Nil(At),
    Ident(Ident),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        pos: At,
    },
    Unary {
        op: UnOp,
        operand: Box<Expr>,
        pos: At,
    },
    Ternary {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
        pos: At,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
        pos: At,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
        pos: At,
    },
    Array(Vec<Expr>, At),
    /// `[size : init]`
    Fill {
        size: Box<Expr>,
        init: Box<Expr>,
        pos: At,
    },
    Table(Vec<(Expr, Expr)>, At),
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::Int(_, p) | Expr::Float(_, p) | Expr::Str(_, p) | Expr::Nil(p) => p.0,
            Expr::Array(_, p) | Expr::Table(_, p) => p.0,
            Expr::Ident(id) => id.pos.0,
            Expr::Binary { pos, .. }
            | Expr::Unary { pos, .. }
            | Expr::Ternary { pos, .. }
            | Expr::Call { pos, .. }
            | Expr::Index { pos, .. }
            | Expr::Fill { pos, .. } => pos.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub init: Option<Expr>,
    pub pos: At,
    pub decl: Option<DeclId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub pos: At,
    pub decl: Option<DeclId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunDecl {
    pub name: String,
    pub params: Vec<Param>,
    /// `None` for a forward declaration `fun name;`.
    pub body: Option<Vec<Stmt>>,
    pub hints: Vec<Hint>,
    pub pos: At,
    pub decl: Option<DeclId>,
    pub func: Option<FuncId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Var {
        is_val: bool,
        decls: Vec<VarDecl>,
        pos: At,
    },
    Fun(FunDecl),
    Assign {
        target: Expr,
        value: Expr,
        pos: At,
    },
    /// `x op= e`; `x++` and `x--` parse to `x += 1` and `x -= 1`.
    OpAssign {
        target: Expr,
        op: BinOp,
        value: Expr,
        pos: At,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
        pos: At,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Box<Stmt>>,
        body: Box<Stmt>,
        pos: At,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
        pos: At,
    },
    Break(At),
    Continue(At),
    Return(Option<Expr>, At),
    Expr(Expr),
    Block(Vec<Stmt>, At),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub body: Vec<Stmt>,
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::pretty::print_program(self))
    }
}
