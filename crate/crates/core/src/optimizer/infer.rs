//! Type inference: a forward fixed point over the def-use graph on the
//! lattice bottom < {one tag} < top.

use std::collections::VecDeque;
use std::fmt;

use super::cfg::{Callee, Cfg};
use super::defuse::{DefUseGraph, Node, NodeId};
use crate::bytecode::{Arith, Builtin as B, Opcode, RtlProgram};
use crate::vm::Tag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeElem {
    /// No value reaches here: the code never runs.
    Bottom,
    Tag(Tag),
    Top,
}

impl TypeElem {
    pub fn join(self, other: TypeElem) -> TypeElem {
        match (self, other) {
            (TypeElem::Bottom, x) | (x, TypeElem::Bottom) => x,
            (TypeElem::Tag(a), TypeElem::Tag(b)) if a == b => self,
            _ => TypeElem::Top,
        }
    }

    /// Whether a runtime value with tag `t` is described by this element.
    pub fn admits(self, t: Tag) -> bool {
        match self {
            TypeElem::Bottom => false,
            TypeElem::Tag(x) => x == t,
            TypeElem::Top => true,
        }
    }

    pub fn leq(self, other: TypeElem) -> bool {
        self.join(other) == other
    }

    fn height(self) -> u8 {
        match self {
            TypeElem::Bottom => 0,
            TypeElem::Tag(_) => 1,
            TypeElem::Top => 2,
        }
    }
}

impl fmt::Display for TypeElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeElem::Bottom => f.write_str("bot"),
            TypeElem::Tag(t) => f.write_str(t.name()),
            TypeElem::Top => f.write_str("top"),
        }
    }
}

const INT: TypeElem = TypeElem::Tag(Tag::Int);
const FLOAT: TypeElem = TypeElem::Tag(Tag::Float);

#[derive(Debug, Clone)]
pub struct TypeInfo {
    pub node_types: Vec<TypeElem>,
    /// `use_types[f][pc][pos]`: join of the types of the reaching nodes.
    pub use_types: Vec<Vec<Vec<TypeElem>>>,
    pub iterations: usize,
}

impl TypeInfo {
    pub fn use_type(&self, f: usize, pc: usize, pos: usize) -> TypeElem {
        self.use_types[f][pc][pos]
    }
}

/// Result type of `a (kind) b`, following the runtime promotion rules.
pub fn arith_type(kind: Arith, a: TypeElem, b: TypeElem) -> TypeElem {
    use TypeElem as T;
    match (a, b) {
        (T::Bottom, _) | (_, T::Bottom) => T::Bottom,
        (T::Tag(Tag::Int), T::Tag(Tag::Int)) => INT,
        (T::Tag(Tag::Int | Tag::Float), T::Tag(Tag::Int | Tag::Float)) => FLOAT,
        (T::Tag(Tag::Str), T::Tag(Tag::Str)) if kind == Arith::Add => T::Tag(Tag::Str),
        _ => T::Top,
    }
}

struct Solver<'a> {
    p: &'a RtlProgram,
    cfg: &'a Cfg,
    g: &'a DefUseGraph,
    types: Vec<TypeElem>,
}

impl Solver<'_> {
    fn use_type(&self, f: usize, pc: usize, pos: usize) -> TypeElem {
        self.g.uses[f][pc][pos]
            .iter()
            .fold(TypeElem::Bottom, |t, &d| t.join(self.types[d]))
    }

    fn ret_type(&self, callee: usize) -> TypeElem {
        let code = &self.p.units[callee].code;
        (0..code.len())
            .filter(|&pc| code[pc].op == Opcode::Ret)
            .fold(TypeElem::Bottom, |t, pc| {
                t.join(self.use_type(callee, pc, 0))
            })
    }

    fn eval(&self, n: NodeId) -> TypeElem {
        match self.g.nodes[n] {
            Node::Uninit { .. } => TypeElem::Tag(Tag::Nil),
            Node::GlobalInit(0) => TypeElem::Tag(Tag::Arr),
            Node::GlobalInit(_) => TypeElem::Tag(Tag::Nil),
            Node::GlobalSummary(gl) => {
                if self.cfg.const_funs.contains_key(&gl) {
                    return TypeElem::Tag(Tag::Fun);
                }
                let init = self.types[self
                    .g
                    .node_id(&Node::GlobalInit(gl))
                    .expect("global nodes exist")];
                self.g.global_defs[gl as usize]
                    .iter()
                    .fold(init, |t, &d| t.join(self.types[d]))
            }
            Node::Param { func, index } => {
                if self.cfg.escaped[func.index()] {
                    return TypeElem::Top;
                }
                self.cfg.calls_to(func).fold(TypeElem::Bottom, |t, c| {
                    let site = &self.p.units[c.caller.index()].code[c.pc];
                    if index < site.n {
                        t.join(self.use_type(c.caller.index(), c.pc, index as usize + 1))
                    } else {
                        t
                    }
                })
            }
            Node::Instr {
                func, pc, which, ..
            } => self.eval_instr(func.index(), pc, which),
        }
    }

    fn eval_instr(&self, f: usize, pc: usize, which: u8) -> TypeElem {
        use Opcode::*;
        let ins = &self.p.units[f].code[pc];
        let nuses = self.g.uses[f][pc].len();
        let u: Vec<TypeElem> = (0..nuses).map(|k| self.use_type(f, pc, k)).collect();
        // An instruction with an operand no value reaches never runs.
        if u.contains(&TypeElem::Bottom) {
            return TypeElem::Bottom;
        }
        let tag = TypeElem::Tag;
        match ins.op {
            Ld => u[0],
            Ldi => INT,
            Ldf => FLOAT,
            Lds => tag(Tag::Str),
            Ldnil => tag(Tag::Nil),
            Ldfun => tag(Tag::Fun),
            Addi | IAddi => arith_type(Arith::Add, u[0], INT),
            BtLtInc | IBtLtInc if which == 0 => arith_type(Arith::Add, u[0], INT),
            Neg => match u[0] {
                TypeElem::Tag(Tag::Int | Tag::Float) => u[0],
                _ => TypeElem::Top,
            },
            Not | ALen => INT,
            MkArr | MkFill => tag(Tag::Arr),
            MkTab => tag(Tag::Tab),
            AGet => TypeElem::Top,
            Call => match self
                .cfg
                .callee_at(crate::frontend::ast::FuncId(f as u32), pc)
            {
                Some(Callee::Known(c)) => self.ret_type(c.index()),
                _ => TypeElem::Top,
            },
            Builtin => match B::from_id(ins.op2) {
                Some(B::Int | B::Len) => INT,
                Some(B::Float) => FLOAT,
                Some(B::Str | B::Type) => tag(Tag::Str),
                Some(B::Put | B::Putln | B::Del | B::Push) => tag(Tag::Nil),
                None => TypeElem::Top,
            },
            op if op.as_arith().is_some() => arith_type(op.as_arith().unwrap().0, u[0], u[1]),
            // Comparisons and the result slot of fused branches.
            op if op.is_typed() => INT,
            op => unreachable!("{op} defines no slot"),
        }
    }
}

/// Node ids whose value depends on each node.
fn dependents(p: &RtlProgram, cfg: &Cfg, g: &DefUseGraph) -> Vec<Vec<NodeId>> {
    let mut deps = vec![Vec::new(); g.nodes.len()];
    let consumers_of_site = |f: usize, pc: usize, pos: usize, out: &mut Vec<NodeId>| {
        out.extend(&g.instr_nodes[f][pc]);
        let ins = &p.units[f].code[pc];
        let func = crate::frontend::ast::FuncId(f as u32);
        if ins.op == Opcode::Call && pos >= 1 {
            if let Some(Callee::Known(c)) = cfg.callee_at(func, pc) {
                if let Some(id) = g.node_id(&Node::Param {
                    func: c,
                    index: pos as u32 - 1,
                }) {
                    out.push(id);
                }
            }
        }
        if ins.op == Opcode::Ret {
            for c in cfg.calls_to(func) {
                out.extend(&g.instr_nodes[c.caller.index()][c.pc]);
            }
        }
    };
    for (d, (f, pc, pos)) in g.edges() {
        let mut out = Vec::new();
        consumers_of_site(f, pc, pos, &mut out);
        deps[d].extend(out);
    }
    for (gl, defs) in g.global_defs.iter().enumerate() {
        let summary = g
            .node_id(&Node::GlobalSummary(gl as u32))
            .expect("global nodes exist");
        for &d in defs {
            deps[d].push(summary);
        }
        let init = g
            .node_id(&Node::GlobalInit(gl as u32))
            .expect("global nodes exist");
        deps[init].push(summary);
    }
    for ds in &mut deps {
        ds.sort_unstable();
        ds.dedup();
    }
    deps
}

pub fn infer_types(p: &RtlProgram, cfg: &Cfg, g: &DefUseGraph) -> TypeInfo {
    let deps = dependents(p, cfg, g);
    let mut s = Solver {
        p,
        cfg,
        g,
        types: vec![TypeElem::Bottom; g.nodes.len()],
    };
    let mut queue: VecDeque<NodeId> = (0..g.nodes.len()).collect();
    let mut queued = vec![true; g.nodes.len()];
    // A node's type rises at most twice and each rise requeues its
    // dependents once.
    let bound = g.nodes.len() + 2 * deps.iter().map(Vec::len).sum::<usize>();
    let mut iterations = 0;
    while let Some(n) = queue.pop_front() {
        queued[n] = false;
        iterations += 1;
        assert!(
            iterations <= bound,
            "type inference exceeded {bound} iterations"
        );
        let t = s.eval(n).join(s.types[n]);
        if t != s.types[n] {
            debug_assert!(t.height() > s.types[n].height());
            s.types[n] = t;
            for &d in &deps[n] {
                if !queued[d] {
                    queued[d] = true;
                    queue.push_back(d);
                }
            }
        }
    }
    let use_types = g
        .uses
        .iter()
        .enumerate()
        .map(|(f, pcs)| {
            (0..pcs.len())
                .map(|pc| (0..pcs[pc].len()).map(|k| s.use_type(f, pc, k)).collect())
                .collect()
        })
        .collect();
    TypeInfo {
        node_types: s.types,
        use_types,
        iterations,
    }
}
