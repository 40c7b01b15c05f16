//! Inlining of `!inline` functions at resolved call sites.

use super::cfg::{build_cfg, build_func_cfg, resolve_callee, Callee, FuncCfg};
use super::combine::delete;
use crate::bytecode::{Fields, Opcode, RtlInstr, RtlProgram, RtlUnit, Slot};
use crate::frontend::ast::{FuncId, Hint};

pub const DEFAULT_INLINE_LIMIT: usize = 64;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InlineOutcome {
    /// Call sites replaced, per caller.
    pub sites: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Why an `!inline` function is not inlined anywhere, if it is not.
fn ineligible(p: &RtlProgram, f: usize, limit: usize, recursive: &[bool]) -> Option<String> {
    let u = &p.units[f];
    if f == 0 {
        Some("the entry function is never inlined".into())
    } else if recursive[f] {
        Some("it is recursive".into())
    } else if u.code.len() > limit {
        Some(format!(
            "{} instructions exceed the limit of {limit}",
            u.code.len()
        ))
    } else {
        None
    }
}

/// Functions on a cycle of resolved calls, or that make an unresolved call
/// while some function value escapes (the call may come back to them).
fn recursive_funcs(p: &RtlProgram) -> Vec<bool> {
    let cfg = build_cfg(p);
    let n = p.units.len();
    let mut succ = vec![Vec::new(); n];
    let mut calls_unknown = vec![false; n];
    for e in &cfg.calls {
        match e.callee {
            Callee::Known(c) => succ[e.caller.index()].push(c.index()),
            Callee::Unknown => calls_unknown[e.caller.index()] = true,
        }
    }
    (0..n)
        .map(|f| {
            if calls_unknown[f] && cfg.escaped.iter().any(|&e| e) {
                return true;
            }
            let mut seen = vec![false; n];
            let mut stack = succ[f].clone();
            while let Some(g) = stack.pop() {
                if g == f {
                    return true;
                }
                if !std::mem::replace(&mut seen[g], true) {
                    stack.extend(&succ[g]);
                }
            }
            false
        })
        .collect()
}

/// Rewrites every slot operand of `ins` through `map`.
fn map_slots(ins: &mut RtlInstr, mut map: impl FnMut(Slot) -> Slot) {
    let fields = ins.op.fields();
    if fields.has(Fields::OP1) {
        ins.op1 = map(ins.op1);
    }
    if fields.has(Fields::OP2) && ins.op != Opcode::Builtin {
        ins.op2 = map(ins.op2);
    }
    if fields.has(Fields::OP3) {
        ins.op3 = map(ins.op3);
    }
    if fields.has(Fields::RES) {
        ins.res = map(ins.res);
    }
}

fn writes(code: &[RtlInstr], slot: Slot) -> bool {
    code.iter()
        .any(|i| i.defs().into_iter().flatten().any(|d| d == slot))
}

fn reads(code: &[RtlInstr], slot: Slot) -> usize {
    code.iter()
        .map(|i| i.uses().iter().filter(|&&s| s == slot).count())
        .sum()
}

/// `u` without the blocks no path from the entry reaches, such as the
/// implicit `ret` after an explicit one.
fn without_dead_code(u: &RtlUnit) -> RtlUnit {
    let cfg = build_func_cfg(&u.code);
    let mut live = vec![false; cfg.blocks.len()];
    let mut stack = vec![0];
    while let Some(b) = stack.pop() {
        if !std::mem::replace(&mut live[b], true) {
            stack.extend(&cfg.blocks[b].succs);
        }
    }
    let mut new_pc = Vec::with_capacity(u.code.len());
    let mut code = Vec::new();
    for (pc, ins) in u.code.iter().enumerate() {
        new_pc.push(code.len() as u32);
        if live[cfg.block_of[pc]] {
            code.push(*ins);
        }
    }
    for ins in &mut code {
        if ins.op.fields().has(Fields::PC) {
            ins.pc = new_pc[ins.pc as usize];
        }
    }
    RtlUnit { code, ..u.clone() }
}

/// Replaces the call at `pc` in `caller` with a copy of `callee`'s body.
/// Returns false, leaving the caller untouched, when the site does not fit.
fn inline_site(caller: &mut RtlUnit, pc: usize, callee: &RtlUnit) -> bool {
    let callee = &without_dead_code(callee);
    let call = caller.code[pc];
    let (dest, argbase, arity) = (call.op1, call.op3, callee.arity);
    // An arity mismatch must still fail at run time.
    if call.n != arity || (arity > 0 && argbase < 0) {
        return false;
    }
    let fcfg = build_func_cfg(&caller.code);
    let block_start = fcfg.blocks[fcfg.block_of[pc]].start;

    // Arguments that are plain copies of caller variables are read in
    // place when the callee never writes the parameter. A global source
    // also needs a callee that neither writes it nor calls anything.
    let callee_calls = callee.code.iter().any(|i| i.op == Opcode::Call);
    let mut param_slot: Vec<Slot> = (0..arity as Slot).map(|k| argbase + k).collect();
    let mut dropped = Vec::new();
    for k in 0..arity as usize {
        let arg = argbase + k as Slot;
        if writes(&callee.code, k as Slot) {
            continue;
        }
        let Some(q) = (block_start..pc)
            .rev()
            .find(|&q| writes(&caller.code[q..=q], arg))
        else {
            continue;
        };
        let ld = caller.code[q];
        let between = &caller.code[q + 1..pc];
        if ld.op == Opcode::Ld
            && (ld.op2 >= 0 || (!callee_calls && !writes(&callee.code, ld.op2)))
            && !caller.code.iter().any(|i| i.target() == Some(q as u32))
            && !writes(between, ld.op2)
            && reads(between, arg) == 0
        {
            param_slot[k] = ld.op2;
            dropped.push(q);
        }
    }

    let base = caller.nslots as Slot;
    let map = |s: Slot| -> Slot {
        if s < 0 {
            s
        } else if s < arity as Slot {
            param_slot[s as usize]
        } else {
            base + s - arity as Slot
        }
    };

    // A temp computed right before `ret` is written straight into the
    // call's destination: that path leaves the callee next, so nothing else
    // reads the temp's last value.
    let named: Vec<Slot> = callee.vdecls.iter().map(|(_, s)| *s).collect();
    let ccfg = build_func_cfg(&callee.code);
    let folded: Vec<bool> = (0..callee.code.len())
        .map(|cp| {
            let ret = callee.code[cp];
            if ret.op != Opcode::Ret || cp == 0 || ccfg.is_leader(cp) {
                return false;
            }
            let prev = callee.code[cp - 1];
            let s = ret.op1;
            prev.defs() == [Some(s), None]
                && !prev.op.has_target()
                && s >= arity as Slot
                && !named.contains(&s)
        })
        .collect();
    let def_into_dest = |cp: usize| folded.get(cp + 1).copied().unwrap_or(false);

    let last = callee.code.len() - 1;
    let width = |cp: usize| -> usize {
        match callee.code[cp].op {
            Opcode::Ret => usize::from(!folded[cp]) + usize::from(cp != last),
            _ => 1,
        }
    };
    let mut offset = Vec::with_capacity(callee.code.len() + 1);
    let mut at = 0;
    for cp in 0..callee.code.len() {
        offset.push(at);
        at += width(cp);
    }
    let body_len = at;
    let end = (pc + body_len) as u32;

    let mut body = Vec::with_capacity(body_len);
    for (cp, ins) in callee.code.iter().enumerate() {
        if ins.op == Opcode::Ret {
            if !folded[cp] {
                body.push(RtlInstr::ld(dest, map(ins.op1)));
            }
            if cp != last {
                body.push(RtlInstr::jmp(end));
            }
            continue;
        }
        let mut new = *ins;
        map_slots(&mut new, map);
        if def_into_dest(cp) {
            new.op1 = dest;
        }
        if new.op.fields().has(Fields::PC) {
            new.pc = pc as u32 + offset[new.pc as usize] as u32;
        }
        if new.op.fields().has(Fields::CIDX) {
            let c = &callee.consts[new.cidx as usize];
            new.cidx = match caller.consts.iter().position(|k| k == c) {
                Some(i) => i as u32,
                None => {
                    caller.consts.push(c.clone());
                    caller.consts.len() as u32 - 1
                }
            };
        }
        body.push(new);
    }
    debug_assert_eq!(body.len(), body_len);

    for ins in caller.code.iter_mut() {
        if ins.op.fields().has(Fields::PC) && ins.pc as usize > pc {
            ins.pc = ins.pc + body_len as u32 - 1;
        }
    }
    caller.code.splice(pc..=pc, body);
    if body_len == 0 {
        // Only an empty callee body has no instructions; keep the site
        // addressable for branches that targeted it.
        unreachable!("a function body ends in ret");
    }
    for (name, s) in &callee.vdecls {
        let slot = map(*s);
        if slot >= 0 && !caller.vdecls.iter().any(|(_, t)| *t == slot) {
            caller
                .vdecls
                .push((format!("{}.{}", callee.name, name), slot));
        }
    }
    caller.nslots = caller
        .nslots
        .max(base as u32 + callee.nslots.saturating_sub(arity));
    dropped.sort_unstable();
    for q in dropped.into_iter().rev() {
        delete(&mut caller.code, q);
    }
    true
}

/// Points the operand read at use position `pos` to `slot`. Argument
/// windows cannot be redirected one slot at a time.
fn set_use(ins: &mut RtlInstr, pos: usize, slot: Slot) -> bool {
    use Opcode::*;
    let field = match (ins.op, pos) {
        (MkArr | MkTab | Builtin, _) | (Call, 1..) => return false,
        (Ld | Neg | Not | ALen | Addi | IAddi | Call, 0) => &mut ins.op2,
        (Bt | Bf | Ret, 0) => &mut ins.op1,
        (ASet, 0) => &mut ins.op1,
        (ASet, 1) => &mut ins.op2,
        (ASet, 2) => &mut ins.op3,
        (op, 0) if op.is_fused_branch() => &mut ins.op1,
        (op, 1) if op.is_fused_branch() => &mut ins.op2,
        (_, 0) => &mut ins.op2,
        (_, 1) => &mut ins.op3,
        _ => return false,
    };
    *field = slot;
    true
}

/// Whether `slot` may be read after instruction `pc` before being written.
fn live_after(code: &[RtlInstr], cfg: &FuncCfg, pc: usize, slot: Slot) -> bool {
    let scan = |from: usize, to: usize| -> Option<bool> {
        for ins in &code[from..to] {
            if ins.uses().contains(&slot) {
                return Some(true);
            }
            if ins.defs().contains(&Some(slot)) {
                return Some(false);
            }
        }
        None
    };
    let b = cfg.block_of[pc];
    if let Some(live) = scan(pc + 1, cfg.blocks[b].end) {
        return live;
    }
    let mut seen = vec![false; cfg.blocks.len()];
    let mut stack = cfg.blocks[b].succs.clone();
    while let Some(s) = stack.pop() {
        if std::mem::replace(&mut seen[s], true) {
            continue;
        }
        match scan(cfg.blocks[s].start, cfg.blocks[s].end) {
            Some(true) => return true,
            Some(false) => {}
            None => stack.extend(&cfg.blocks[s].succs),
        }
    }
    false
}

/// Removes `ld t, src` when the unnamed temp `t` is next read once, later
/// in the same block, with `src` unchanged in between, and the copy is dead
/// after that read. Inlining leaves such copies behind: operands saved
/// before a call in case it changed them, now that the body is visible.
fn forward_copies(u: &mut RtlUnit) {
    'restart: loop {
        let cfg = build_func_cfg(&u.code);
        for q in 0..u.code.len() {
            let ld = u.code[q];
            let (t, src) = (ld.op1, ld.op2);
            if ld.op != Opcode::Ld || t < 0 || t == src || u.vdecls.iter().any(|(_, s)| *s == t) {
                continue;
            }
            let block = &cfg.blocks[cfg.block_of[q]];
            let Some(r) = (q + 1..block.end)
                .find(|&r| u.code[r].uses().contains(&t) || u.code[r].defs().contains(&Some(t)))
            else {
                continue;
            };
            let between = &u.code[q + 1..r];
            if reads(&u.code[r..=r], t) != 1
                || writes(between, src)
                || (src < 0 && between.iter().any(|i| i.op == Opcode::Call))
                || (!u.code[r].defs().contains(&Some(t)) && live_after(&u.code, &cfg, r, t))
            {
                continue;
            }
            let mut pos = None;
            u.code[r].for_each_use(|k, s| {
                if s == t {
                    pos = Some(k);
                }
            });
            let mut new = u.code[r];
            if pos.is_some_and(|k| set_use(&mut new, k, src)) {
                u.code[r] = new;
                delete(&mut u.code, q);
                continue 'restart;
            }
        }
        return;
    }
}

/// Inlines resolved calls to eligible `!inline` functions everywhere,
/// innermost callees first, until no such call remains.
pub fn inline_calls(p: &mut RtlProgram, limit: usize) -> InlineOutcome {
    let n = p.units.len();
    let recursive = recursive_funcs(p);
    let mut eligible = vec![false; n];
    let mut warnings = Vec::new();
    for f in 0..n {
        if !p.units[f].has_hint(Hint::Inline) {
            continue;
        }
        match ineligible(p, f, limit, &recursive) {
            Some(why) => warnings.push(format!("`{}` is not inlined: {why}", p.units[f].name)),
            None => eligible[f] = true,
        }
    }
    let mut sites = vec![0; n];
    if !eligible.iter().any(|&e| e) {
        return InlineOutcome { sites, warnings };
    }
    // Eligible functions form no cycle, so this terminates.
    'restart: loop {
        let cfg = build_cfg(p);
        for f in 0..n {
            for pc in 0..p.units[f].code.len() {
                if p.units[f].code[pc].op != Opcode::Call {
                    continue;
                }
                let (callee, _) =
                    resolve_callee(&p.units[f].code, &cfg.funcs[f], pc, &cfg.const_funs);
                let Callee::Known(FuncId(c)) = callee else {
                    continue;
                };
                let c = c as usize;
                if !eligible[c] || c == f {
                    continue;
                }
                let body = p.units[c].clone();
                if inline_site(&mut p.units[f], pc, &body) {
                    sites[f] += 1;
                    continue 'restart;
                }
            }
        }
        for (u, &n) in p.units.iter_mut().zip(&sites) {
            if n > 0 {
                forward_copies(u);
            }
        }
        return InlineOutcome { sites, warnings };
    }
}
