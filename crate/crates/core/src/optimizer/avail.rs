//! Reaching definitions: which definitions of each slot may reach each
//! block entry. Globals are solved per function too; a call defines every
//! global that some non-entry function writes.

use std::collections::{HashMap, VecDeque};

use fixedbitset::FixedBitSet;

use super::cfg::{Cfg, FuncCfg};
use crate::bytecode::{global_index, global_slot, Opcode, RtlInstr, RtlProgram, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefKind {
    /// The slot's value on function entry: a parameter, nil, or for
    /// globals their value at program start or whenever the function runs.
    Entry,
    /// Written by the instruction at `pc`.
    Instr { pc: usize },
    /// A global the call at `pc` may overwrite.
    Clobber { pc: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DefSite {
    pub slot: Slot,
    pub kind: DefKind,
}

#[derive(Debug, Clone)]
pub struct FuncAvail {
    pub defs: Vec<DefSite>,
    pub slot_defs: HashMap<Slot, FixedBitSet>,
    /// Definitions reaching the start of each block.
    pub block_in: Vec<FixedBitSet>,
    /// Worklist pops until the fixed point.
    pub iterations: usize,
    instr_defs: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Availability {
    pub funcs: Vec<FuncAvail>,
    /// Globals written by some function other than the entry; every call
    /// may change them.
    pub clobbered: Vec<u32>,
}

impl FuncAvail {
    /// Applies the definitions made by instruction `pc` to `set`.
    pub fn transfer(&self, pc: usize, set: &mut FixedBitSet) {
        for &d in &self.instr_defs[pc] {
            set.difference_with(&self.slot_defs[&self.defs[d].slot]);
        }
        for &d in &self.instr_defs[pc] {
            set.insert(d);
        }
    }

    /// Calls `f(pc, set)` with the definitions reaching each instruction of
    /// each reachable-or-not block, in code order.
    pub fn walk(&self, cfg: &FuncCfg, mut f: impl FnMut(usize, &FixedBitSet)) {
        for (b, block) in cfg.blocks.iter().enumerate() {
            let mut cur = self.block_in[b].clone();
            for pc in block.start..block.end {
                f(pc, &cur);
                self.transfer(pc, &mut cur);
            }
        }
    }

    /// Definitions of `slot` in `set`.
    pub fn reaching<'a>(
        &'a self,
        set: &'a FixedBitSet,
        slot: Slot,
    ) -> impl Iterator<Item = usize> + 'a {
        let of_slot = self.slot_defs.get(&slot);
        set.ones()
            .filter(move |&d| of_slot.is_some_and(|s| s.contains(d)))
    }

    /// Definitions of the instruction at `pc` (in `defs()` order).
    pub fn defs_at(&self, pc: usize) -> &[usize] {
        &self.instr_defs[pc]
    }
}

fn clobbered_globals(p: &RtlProgram) -> Vec<u32> {
    let mut gs: Vec<u32> = p.units[1..]
        .iter()
        .flat_map(|u| u.code.iter())
        .flat_map(|i| i.defs().into_iter().flatten())
        .filter_map(global_index)
        .collect();
    gs.sort_unstable();
    gs.dedup();
    gs
}

fn solve(
    code: &[RtlInstr],
    nslots: u32,
    nglobals: usize,
    clobbered: &[u32],
    cfg: &FuncCfg,
) -> FuncAvail {
    let mut defs = Vec::new();
    for s in 0..nslots as Slot {
        defs.push(DefSite {
            slot: s,
            kind: DefKind::Entry,
        });
    }
    for g in 0..nglobals as u32 {
        defs.push(DefSite {
            slot: global_slot(g),
            kind: DefKind::Entry,
        });
    }
    let nentry = defs.len();
    let mut instr_defs = vec![Vec::new(); code.len()];
    for (pc, ins) in code.iter().enumerate() {
        for s in ins.defs().into_iter().flatten() {
            instr_defs[pc].push(defs.len());
            defs.push(DefSite {
                slot: s,
                kind: DefKind::Instr { pc },
            });
        }
        if ins.op == Opcode::Call {
            for &g in clobbered {
                instr_defs[pc].push(defs.len());
                defs.push(DefSite {
                    slot: global_slot(g),
                    kind: DefKind::Clobber { pc },
                });
            }
        }
    }
    let n = defs.len();
    let mut slot_defs: HashMap<Slot, FixedBitSet> = HashMap::new();
    for (d, site) in defs.iter().enumerate() {
        slot_defs
            .entry(site.slot)
            .or_insert_with(|| FixedBitSet::with_capacity(n))
            .insert(d);
    }
    let mut fa = FuncAvail {
        defs,
        slot_defs,
        block_in: vec![FixedBitSet::with_capacity(n); cfg.blocks.len()],
        iterations: 0,
        instr_defs,
    };
    if cfg.blocks.is_empty() {
        return fa;
    }
    let mut entry = FixedBitSet::with_capacity(n);
    entry.insert_range(0..nentry);
    let mut out = vec![FixedBitSet::with_capacity(n); cfg.blocks.len()];
    let mut queue: VecDeque<usize> = (0..cfg.blocks.len()).collect();
    let mut queued = vec![true; cfg.blocks.len()];
    // Each OUT set only grows, so it changes at most `n` times, and every
    // change enqueues at most two successors.
    let bound = cfg.blocks.len() * 2 * (n + 1);
    while let Some(b) = queue.pop_front() {
        queued[b] = false;
        fa.iterations += 1;
        assert!(
            fa.iterations <= bound,
            "reaching definitions exceeded {bound} iterations"
        );
        let mut cur = if b == 0 {
            entry.clone()
        } else {
            FixedBitSet::with_capacity(n)
        };
        for &p in &cfg.blocks[b].preds {
            cur.union_with(&out[p]);
        }
        fa.block_in[b] = cur.clone();
        for pc in cfg.blocks[b].start..cfg.blocks[b].end {
            fa.transfer(pc, &mut cur);
        }
        if cur != out[b] {
            out[b] = cur;
            for &s in &cfg.blocks[b].succs {
                if !queued[s] {
                    queued[s] = true;
                    queue.push_back(s);
                }
            }
        }
    }
    fa
}

pub fn compute_availability(p: &RtlProgram, cfg: &Cfg) -> Availability {
    let clobbered = clobbered_globals(p);
    let funcs = p
        .units
        .iter()
        .zip(&cfg.funcs)
        .map(|(u, fc)| solve(&u.code, u.nslots, p.globals.len(), &clobbered, fc))
        .collect();
    Availability { funcs, clobbered }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::gen_rtl;
    use crate::frontend::check_source;
    use crate::optimizer::cfg::build_cfg;

    /// Reaching definitions of `slot` at the first instruction that reads
    /// it at or after `from`, in function `f`.
    fn reaching_at_use(src: &str, f: usize, var: &str, nth_use: usize) -> Vec<DefKind> {
        let p = gen_rtl(&check_source(src).unwrap().resolved).unwrap();
        let cfg = build_cfg(&p);
        let av = compute_availability(&p, &cfg);
        let u = &p.units[f];
        let slot = u.vdecls.iter().find(|(n, _)| n == var).unwrap().1;
        let fa = &av.funcs[f];
        let mut found = Vec::new();
        fa.walk(&cfg.funcs[f], |pc, set| {
            if u.code[pc].uses().contains(&slot) {
                found.push(
                    fa.reaching(set, slot)
                        .map(|d| fa.defs[d].kind)
                        .collect::<Vec<_>>(),
                );
            }
        });
        found.swap_remove(nth_use)
    }

    #[test]
    fn single_def_before_loop() {
        let src = "fun f() { var x = 5, i, s = 0; for (i = 0; i < 3; i++) s += x; return s; }";
        let r = reaching_at_use(src, 1, "x", 0);
        assert_eq!(r.len(), 1);
        assert!(matches!(r[0], DefKind::Instr { .. }));
    }

    #[test]
    fn both_branches_define() {
        let src = "fun f(c) { var x; if (c) x = 1; else x = 2; return x; }";
        let r = reaching_at_use(src, 1, "x", 0);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|k| matches!(k, DefKind::Instr { .. })));
    }

    #[test]
    fn then_branch_only_keeps_earlier_def() {
        // `var x;` stores nil; without it the entry definition reaches.
        let src = "fun f(c) { var x; if (c) x = 1; return x; }";
        assert_eq!(reaching_at_use(src, 1, "x", 0).len(), 2);
        let src = "fun f(c, x) { if (c) x = 1; return x; }";
        let r = reaching_at_use(src, 1, "x", 0);
        assert!(r.contains(&DefKind::Entry));
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn loop_carried_increment_reaches_itself() {
        let src = "fun f(n) { var i; for (i = 0; i < n; i++); return i; }";
        let p = gen_rtl(&check_source(src).unwrap().resolved).unwrap();
        let cfg = build_cfg(&p);
        let av = compute_availability(&p, &cfg);
        let code = &p.units[1].code;
        let addi = code.iter().position(|i| i.op == Opcode::Addi).unwrap();
        let fa = &av.funcs[1];
        let mut reach = Vec::new();
        fa.walk(&cfg.funcs[1], |pc, set| {
            if pc == addi {
                reach = fa
                    .reaching(set, code[addi].op2)
                    .map(|d| fa.defs[d].kind)
                    .collect();
            }
        });
        assert!(reach.contains(&DefKind::Instr { pc: addi }));
    }

    #[test]
    fn calls_clobber_globals_written_elsewhere() {
        let src = "var g = 1; fun set() { g = 2.5; } set(); putln(g);";
        let p = gen_rtl(&check_source(src).unwrap().resolved).unwrap();
        let av = compute_availability(&p, &build_cfg(&p));
        assert_eq!(
            av.clobbered,
            vec![global_index(
                p.units[0]
                    .code
                    .iter()
                    .find(|i| i.op == Opcode::Ldi)
                    .unwrap()
                    .op1
            )
            .unwrap()]
        );
    }
}
