//! Lowering of resolved programs to stack and register-transfer bytecode.

pub mod rtl;
pub mod stack;

pub use rtl::{gen_rtl, TempAllocator};
pub use stack::gen_stack;

use crate::bytecode::Const;
use crate::frontend::ast::{Expr, Stmt};
use crate::frontend::resolve::Resolved;
use crate::frontend::Pos;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{pos}: codegen error: {message}")]
pub struct CodegenError {
    pub pos: Pos,
    pub message: String,
}

/// Forward-referenced jump targets, patched once the unit is complete.
#[derive(Default)]
pub(crate) struct Labels {
    at: Vec<Option<u32>>,
    refs: Vec<(usize, usize)>,
}

impl Labels {
    pub fn new_label(&mut self) -> usize {
        self.at.push(None);
        self.at.len() - 1
    }

    pub fn place(&mut self, label: usize, pc: u32) {
        debug_assert!(self.at[label].is_none(), "label placed twice");
        self.at[label] = Some(pc);
    }

    pub fn refer(&mut self, instr: usize, label: usize) {
        self.refs.push((instr, label));
    }

    pub fn patch<I>(&self, code: &mut [I], mut set: impl FnMut(&mut I, u32)) {
        for &(instr, label) in &self.refs {
            set(
                &mut code[instr],
                self.at[label].expect("label never placed"),
            );
        }
    }
}

/// Per-unit constant pool with de-duplication.
#[derive(Default)]
pub(crate) struct ConstPool {
    items: Vec<Const>,
}

impl ConstPool {
    pub fn add(&mut self, c: Const) -> u32 {
        match self.items.iter().position(|x| *x == c) {
            Some(i) => i as u32,
            None => {
                self.items.push(c);
                self.items.len() as u32 - 1
            }
        }
    }

    pub fn str(&mut self, s: &str) -> u32 {
        self.add(Const::Str(s.to_string()))
    }

    pub fn into_vec(self) -> Vec<Const> {
        self.items
    }
}

/// Whether evaluating `e` may run guest code (and so reassign globals).
pub(crate) fn has_call(e: &Expr) -> bool {
    match e {
        Expr::Int(..) | Expr::Float(..) | Expr::Str(..) | Expr::Nil(_) | Expr::Ident(_) => false,
        Expr::Call { .. } => true,
        Expr::Binary { lhs, rhs, .. } => has_call(lhs) || has_call(rhs),
        Expr::Unary { operand, .. } => has_call(operand),
        Expr::Ternary {
            cond, then, els, ..
        } => has_call(cond) || has_call(then) || has_call(els),
        Expr::Index { base, index, .. } => has_call(base) || has_call(index),
        Expr::Array(es, _) => es.iter().any(has_call),
        Expr::Fill { size, init, .. } => has_call(size) || has_call(init),
        Expr::Table(pairs, _) => pairs.iter().any(|(k, v)| has_call(k) || has_call(v)),
    }
}

/// Statement lists indexed by function id; entry 0 is the program body.
pub(crate) fn function_bodies(r: &Resolved) -> Result<Vec<&[Stmt]>, CodegenError> {
    fn walk<'a>(stmts: &'a [Stmt], out: &mut Vec<Option<&'a [Stmt]>>) {
        for s in stmts {
            match s {
                Stmt::Fun(f) => {
                    if let (Some(body), Some(id)) = (&f.body, f.func) {
                        out[id.index()] = Some(body);
                        walk(body, out);
                    }
                }
                Stmt::If { then, els, .. } => {
                    walk(std::slice::from_ref(then), out);
                    if let Some(e) = els {
                        walk(std::slice::from_ref(e), out);
                    }
                }
                Stmt::For {
                    init, update, body, ..
                } => {
                    if let Some(i) = init {
                        walk(std::slice::from_ref(i), out);
                    }
                    if let Some(u) = update {
                        walk(std::slice::from_ref(u), out);
                    }
                    walk(std::slice::from_ref(body), out);
                }
                Stmt::While { body, .. } => walk(std::slice::from_ref(body), out),
                Stmt::Block(b, _) => walk(b, out),
                _ => {}
            }
        }
    }
    let mut out = vec![None; r.functions.len()];
    out[0] = Some(&r.program.body[..]);
    walk(&r.program.body, &mut out);
    out.into_iter()
        .enumerate()
        .map(|(i, b)| {
            b.ok_or_else(|| CodegenError {
                pos: Pos::default(),
                message: format!("function `{}` has no body", r.functions[i].name),
            })
        })
        .collect()
}
