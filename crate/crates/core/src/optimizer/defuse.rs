//! Def-use graph over the whole program. Every operand use gets edges from
//! the definitions that may reach it; parameters, globals and call results
//! get nodes of their own so values flow across calls.

use std::collections::HashMap;

use super::avail::{Availability, DefKind};
use super::cfg::Cfg;
use crate::bytecode::{global_index, RtlProgram, Slot};
use crate::frontend::ast::FuncId;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    /// Slot written by the instruction at `pc`; `which` indexes `defs()`.
    Instr {
        func: FuncId,
        pc: usize,
        slot: Slot,
        which: u8,
    },
    /// A non-parameter local on function entry: nil.
    Uninit { func: FuncId, slot: Slot },
    /// Parameter `index` on entry: whatever the call sites pass.
    Param { func: FuncId, index: u32 },
    /// A global's value when the program starts.
    GlobalInit(u32),
    /// Every value a global may hold at any time: its initial value and
    /// all of its definitions anywhere.
    GlobalSummary(u32),
}

/// Use site: (function, pc, operand position).
pub type UseSite = (usize, usize, usize);

#[derive(Debug, Clone)]
pub struct DefUseGraph {
    pub nodes: Vec<Node>,
    /// `uses[f][pc][pos]`: nodes whose value may be read there.
    pub uses: Vec<Vec<Vec<Vec<NodeId>>>>,
    /// `instr_nodes[f][pc]`: node of each slot the instruction writes.
    pub instr_nodes: Vec<Vec<Vec<NodeId>>>,
    /// Instruction nodes writing each global, anywhere in the program.
    pub global_defs: Vec<Vec<NodeId>>,
    index: HashMap<Node, NodeId>,
}

impl DefUseGraph {
    pub fn node_id(&self, n: &Node) -> Option<NodeId> {
        self.index.get(n).copied()
    }

    fn intern(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        self.nodes.push(n);
        self.index.insert(n, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// All def-to-use edges.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, UseSite)> + '_ {
        self.uses.iter().enumerate().flat_map(|(f, pcs)| {
            pcs.iter().enumerate().flat_map(move |(pc, poss)| {
                poss.iter()
                    .enumerate()
                    .flat_map(move |(pos, ds)| ds.iter().map(move |&d| (d, (f, pc, pos))))
            })
        })
    }

    pub fn edge_count(&self) -> usize {
        self.uses.iter().flatten().flatten().map(Vec::len).sum()
    }
}

pub fn build_def_use(p: &RtlProgram, cfg: &Cfg, avail: &Availability) -> DefUseGraph {
    let mut g = DefUseGraph {
        nodes: Vec::new(),
        uses: Vec::new(),
        instr_nodes: Vec::new(),
        global_defs: vec![Vec::new(); p.globals.len()],
        index: HashMap::new(),
    };
    for gl in 0..p.globals.len() as u32 {
        g.intern(Node::GlobalInit(gl));
        g.intern(Node::GlobalSummary(gl));
    }
    for (f, u) in p.units.iter().enumerate() {
        let func = FuncId(f as u32);
        let fa = &avail.funcs[f];
        let to_node: Vec<NodeId> = fa
            .defs
            .iter()
            .map(|site| {
                let node = match (site.kind, global_index(site.slot)) {
                    (DefKind::Entry, Some(gl)) if f == 0 => Node::GlobalInit(gl),
                    (DefKind::Entry | DefKind::Clobber { .. }, Some(gl)) => Node::GlobalSummary(gl),
                    (DefKind::Entry, None) if (site.slot as u32) < u.arity => Node::Param {
                        func,
                        index: site.slot as u32,
                    },
                    (DefKind::Entry, None) => Node::Uninit {
                        func,
                        slot: site.slot,
                    },
                    (DefKind::Instr { pc }, _) => {
                        let which = u.code[pc]
                            .defs()
                            .iter()
                            .flatten()
                            .position(|&s| s == site.slot)
                            .unwrap_or(0);
                        Node::Instr {
                            func,
                            pc,
                            slot: site.slot,
                            which: which as u8,
                        }
                    }
                    (DefKind::Clobber { .. }, None) => unreachable!("clobbers are global"),
                };
                g.intern(node)
            })
            .collect();
        let mut instr_nodes = vec![Vec::new(); u.code.len()];
        for (pc, ins) in u.code.iter().enumerate() {
            for (which, s) in ins.defs().into_iter().flatten().enumerate() {
                let id = g.intern(Node::Instr {
                    func,
                    pc,
                    slot: s,
                    which: which as u8,
                });
                instr_nodes[pc].push(id);
                if let Some(gl) = global_index(s) {
                    g.global_defs[gl as usize].push(id);
                }
            }
        }
        let mut uses = vec![Vec::new(); u.code.len()];
        fa.walk(&cfg.funcs[f], |pc, set| {
            let mut per_pos = Vec::new();
            u.code[pc].for_each_use(|_, s| {
                let mut ds: Vec<NodeId> = fa.reaching(set, s).map(|d| to_node[d]).collect();
                ds.sort_unstable();
                ds.dedup();
                per_pos.push(ds);
            });
            uses[pc] = per_pos;
        });
        g.uses.push(uses);
        g.instr_nodes.push(instr_nodes);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::Opcode;
    use crate::codegen::gen_rtl;
    use crate::frontend::check_source;
    use crate::optimizer::avail::compute_availability;
    use crate::optimizer::cfg::build_cfg;

    fn graph(src: &str) -> (RtlProgram, DefUseGraph) {
        let p = gen_rtl(&check_source(src).unwrap().resolved).unwrap();
        let cfg = build_cfg(&p);
        let g = build_def_use(&p, &cfg, &compute_availability(&p, &cfg));
        (p, g)
    }

    #[test]
    fn one_def_two_uses() {
        let (p, g) = graph("fun f() { var a = 0, b; b = a + a; return b; }");
        let code = &p.units[1].code;
        let add = code.iter().position(|i| i.op == Opcode::Add).unwrap();
        let ldi = code.iter().position(|i| i.op == Opcode::Ldi).unwrap();
        let def = g.instr_nodes[1][ldi][0];
        assert_eq!(g.uses[1][add], vec![vec![def], vec![def]]);
    }

    #[test]
    fn every_reachable_use_has_a_def() {
        let (p, g) = graph(crate::frontend::parser::tests::SIEVE);
        let cfg = build_cfg(&p);
        for (f, u) in p.units.iter().enumerate() {
            for (pc, poss) in g.uses[f].iter().enumerate() {
                let reachable = pc == 0
                    || !cfg.funcs[f].blocks[cfg.funcs[f].block_of[pc]]
                        .preds
                        .is_empty();
                if reachable {
                    for ds in poss {
                        assert!(!ds.is_empty(), "{}:{pc}", u.name);
                    }
                }
            }
        }
        assert!(g.edge_count() > 0);
    }

    #[test]
    fn entry_values_become_params_and_summaries() {
        let (p, g) = graph("var h = 1; fun f(x) { return x + h; } putln(f(2));");
        let add = p.units[1]
            .code
            .iter()
            .position(|i| i.op == Opcode::Add)
            .unwrap();
        let u = &g.uses[1][add];
        assert_eq!(
            g.nodes[u[0][0]],
            Node::Param {
                func: FuncId(1),
                index: 0
            }
        );
        assert!(matches!(g.nodes[u[1][0]], Node::GlobalSummary(_)));
    }
}
