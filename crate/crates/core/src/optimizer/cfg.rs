use std::collections::HashMap;

use crate::bytecode::{global_index, Opcode, RtlInstr, RtlProgram, RtlUnit, Slot};
use crate::frontend::ast::FuncId;

/// Instructions `start..end` of one function; no branch enters past
/// `start` and only the last instruction may branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub start: usize,
    pub end: usize,
    pub succs: Vec<usize>,
    pub preds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncCfg {
    pub blocks: Vec<BasicBlock>,
    /// Block index of every instruction.
    pub block_of: Vec<usize>,
}

impl FuncCfg {
    pub fn is_leader(&self, pc: usize) -> bool {
        self.blocks[self.block_of[pc]].start == pc
    }

    pub fn edge_count(&self) -> usize {
        self.blocks.iter().map(|b| b.succs.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Callee {
    Known(FuncId),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallEdge {
    pub caller: FuncId,
    pub pc: usize,
    pub callee: Callee,
}

/// All-program control-flow graph: per-function blocks plus call edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub funcs: Vec<FuncCfg>,
    pub calls: Vec<CallEdge>,
    /// Globals that only ever hold one function: their sole definition in
    /// the whole program is an `ldfun` in the entry function's first block.
    pub const_funs: HashMap<u32, FuncId>,
    /// Functions that an unresolved call might reach, so their callers
    /// are not all known.
    pub escaped: Vec<bool>,
}

impl Cfg {
    pub fn calls_to(&self, f: FuncId) -> impl Iterator<Item = &CallEdge> {
        self.calls
            .iter()
            .filter(move |c| c.callee == Callee::Known(f))
    }

    pub fn callee_at(&self, caller: FuncId, pc: usize) -> Option<Callee> {
        self.calls
            .iter()
            .find(|c| c.caller == caller && c.pc == pc)
            .map(|c| c.callee)
    }
}

/// Block structure of one function. Leaders are the entry, every branch
/// target and every instruction after a branch or terminator.
pub fn build_func_cfg(code: &[RtlInstr]) -> FuncCfg {
    let n = code.len();
    let mut leader = vec![false; n];
    if n > 0 {
        leader[0] = true;
    }
    for (pc, ins) in code.iter().enumerate() {
        if let Some(t) = ins.target() {
            leader[t as usize] = true;
        }
        if (ins.target().is_some() || ins.op.is_terminator()) && pc + 1 < n {
            leader[pc + 1] = true;
        }
    }
    let mut blocks = Vec::new();
    let mut block_of = vec![0; n];
    for pc in 0..n {
        if leader[pc] {
            blocks.push(BasicBlock {
                start: pc,
                end: pc + 1,
                succs: Vec::new(),
                preds: Vec::new(),
            });
        } else {
            blocks.last_mut().expect("entry is a leader").end = pc + 1;
        }
        block_of[pc] = blocks.len() - 1;
    }
    for b in 0..blocks.len() {
        let last = &code[blocks[b].end - 1];
        let mut succs = Vec::new();
        if let Some(t) = last.target() {
            succs.push(block_of[t as usize]);
        }
        if !last.op.is_terminator() && blocks[b].end < n {
            let next = block_of[blocks[b].end];
            if !succs.contains(&next) {
                succs.push(next);
            }
        }
        for &s in &succs {
            blocks[s].preds.push(b);
        }
        blocks[b].succs = succs;
    }
    FuncCfg { blocks, block_of }
}

/// Globals whose only definition anywhere is an `ldfun` in the entry
/// block of `main`.
pub fn const_fun_globals(p: &RtlProgram) -> HashMap<u32, FuncId> {
    let mut defs: HashMap<u32, Vec<(usize, usize)>> = HashMap::new();
    for (f, u) in p.units.iter().enumerate() {
        for (pc, ins) in u.code.iter().enumerate() {
            for s in ins.defs().into_iter().flatten() {
                if let Some(g) = global_index(s) {
                    defs.entry(g).or_default().push((f, pc));
                }
            }
        }
    }
    let main = &p.units[0].code;
    let entry_end = build_func_cfg(main).blocks.first().map_or(0, |b| b.end);
    defs.into_iter()
        .filter_map(|(g, sites)| match sites[..] {
            [(0, pc)] if pc < entry_end && main[pc].op == Opcode::Ldfun => {
                Some((g, FuncId(main[pc].imm as u32)))
            }
            _ => None,
        })
        .collect()
}

/// The function a `call` at `pc` invokes, when it can be read off the
/// code: the callee slot is a constant function global, or it was loaded
/// from one earlier in the same block with no intervening redefinition.
/// Also returns the `ld`/`ldfun` that produced the callee, if any.
pub fn resolve_callee(
    code: &[RtlInstr],
    cfg: &FuncCfg,
    pc: usize,
    const_funs: &HashMap<u32, FuncId>,
) -> (Callee, Option<usize>) {
    let slot = code[pc].op2;
    if let Some(g) = global_index(slot) {
        return (
            const_funs
                .get(&g)
                .map_or(Callee::Unknown, |&f| Callee::Known(f)),
            None,
        );
    }
    let start = cfg.blocks[cfg.block_of[pc]].start;
    for q in (start..pc).rev() {
        let ins = &code[q];
        if ins.defs().into_iter().flatten().any(|d| d == slot) {
            let known = match ins.op {
                Opcode::Ldfun => Some(FuncId(ins.imm as u32)),
                Opcode::Ld => global_index(ins.op2).and_then(|g| const_funs.get(&g).copied()),
                _ => None,
            };
            return match known {
                Some(f) => (Callee::Known(f), Some(q)),
                None => (Callee::Unknown, None),
            };
        }
    }
    (Callee::Unknown, None)
}

fn named_slots(u: &RtlUnit) -> Vec<Slot> {
    u.vdecls.iter().map(|(_, s)| *s).collect()
}

pub fn build_cfg(p: &RtlProgram) -> Cfg {
    let funcs: Vec<FuncCfg> = p.units.iter().map(|u| build_func_cfg(&u.code)).collect();
    let const_funs = const_fun_globals(p);
    let mut calls = Vec::new();
    // Reads of a constant function global that only feed a resolved call.
    let mut callee_loads: Vec<(usize, usize)> = Vec::new();
    for (f, u) in p.units.iter().enumerate() {
        let named = named_slots(u);
        for (pc, ins) in u.code.iter().enumerate() {
            if ins.op == Opcode::Call {
                let (callee, load) = resolve_callee(&u.code, &funcs[f], pc, &const_funs);
                if let Some(q) = load.filter(|&q| !named.contains(&u.code[q].op1)) {
                    callee_loads.push((f, q));
                }
                calls.push(CallEdge {
                    caller: FuncId(f as u32),
                    pc,
                    callee,
                });
            }
        }
    }
    let mut escaped = vec![false; p.units.len()];
    if calls.iter().any(|c| c.callee == Callee::Unknown) {
        for (f, u) in p.units.iter().enumerate() {
            let named = named_slots(u);
            for (pc, ins) in u.code.iter().enumerate() {
                if ins.op == Opcode::Ldfun {
                    // Loading into a named variable or anywhere but the
                    // callee slot of a resolved call lets the value travel.
                    if named.contains(&ins.op1)
                        || global_index(ins.op1).is_some_and(|g| !const_funs.contains_key(&g))
                        || (ins.op1 >= 0 && !callee_loads.contains(&(f, pc)))
                    {
                        escaped[ins.imm as usize] = true;
                    }
                }
                ins.for_each_use(|pos, s| {
                    let Some(&target) = global_index(s).and_then(|g| const_funs.get(&g)) else {
                        return;
                    };
                    let direct_callee = ins.op == Opcode::Call && pos == 0;
                    let resolved_load = ins.op == Opcode::Ld && callee_loads.contains(&(f, pc));
                    if !direct_callee && !resolved_load {
                        escaped[target.index()] = true;
                    }
                });
            }
        }
    }
    Cfg {
        funcs,
        calls,
        const_funs,
        escaped,
    }
}
