//! Structural checks run after code generation, after every optimizer pass
//! in debug builds, and on bytecode read from text.

use std::fmt;

use super::instr::{
    global_index, BcProgram, Builtin, Const, RtlProgram, Slot, StackInstr, StackProgram,
};
use super::opcode::{Fields, Form, Opcode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub func: u32,
    pub instr: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.instr {
            Some(i) => write!(f, "function {} instr {}: {}", self.func, i, self.message),
            None => write!(f, "function {}: {}", self.func, self.message),
        }
    }
}

struct Checker {
    out: Vec<Violation>,
    func: u32,
}

impl Checker {
    fn at(&mut self, instr: Option<usize>, message: String) {
        self.out.push(Violation {
            func: self.func,
            instr,
            message,
        });
    }
}

fn check_units<I>(p: &BcProgram<I>, c: &mut Checker) {
    if p.units.is_empty() {
        c.at(None, "program has no entry function".into());
    }
    if p.globals.is_empty() {
        c.at(None, "program has no argv global".into());
    }
    for (k, u) in p.units.iter().enumerate() {
        c.func = u.id.0;
        if u.id.index() != k {
            c.at(None, format!("unit at position {k} has id {}", u.id.0));
        }
        if u.arity > u.nslots {
            c.at(
                None,
                format!("arity {} exceeds nslots {}", u.arity, u.nslots),
            );
        }
        if u.code.is_empty() {
            c.at(None, "empty code".into());
        }
        for (name, slot) in &u.vdecls {
            if *slot < 0 || *slot as u32 >= u.nslots {
                c.at(
                    None,
                    format!("vdecl {name} has slot {slot} outside the frame"),
                );
            }
        }
    }
}

fn slot_ok(slot: Slot, nslots: u32, nglobals: usize) -> bool {
    match global_index(slot) {
        Some(g) => (g as usize) < nglobals,
        None => (slot as u32) < nslots,
    }
}

pub fn validate_rtl(p: &RtlProgram) -> Result<(), Vec<Violation>> {
    let mut c = Checker {
        out: Vec::new(),
        func: 0,
    };
    check_units(p, &mut c);
    let nglobals = p.globals.len();
    for u in &p.units {
        c.func = u.id.0;
        let len = u.code.len();
        for (idx, i) in u.code.iter().enumerate() {
            let at = Some(idx);
            if i.op.form() != Form::Rtl {
                c.at(at, format!("stack opcode {} in RTL code", i.op));
                continue;
            }
            let mut bad_slot = None;
            i.for_each_use(|_, s| {
                if !slot_ok(s, u.nslots, nglobals) {
                    bad_slot.get_or_insert(s);
                }
            });
            for s in i.defs().into_iter().flatten() {
                if !slot_ok(s, u.nslots, nglobals) {
                    bad_slot.get_or_insert(s);
                }
            }
            if let Some(s) = bad_slot {
                c.at(at, format!("slot {s} out of range"));
            }
            if let Some(t) = i.target() {
                if t as usize >= len {
                    c.at(at, format!("pc {t} out of range"));
                }
            }
            match i.op {
                Opcode::Lds => match u.consts.get(i.cidx as usize) {
                    Some(Const::Str(_)) => {}
                    _ => c.at(at, format!("cidx {} is not a string constant", i.cidx)),
                },
                Opcode::Ldfun => {
                    if i.imm < 0 || i.imm as usize >= p.units.len() {
                        c.at(at, format!("function id {} out of range", i.imm));
                    }
                }
                Opcode::Builtin => match Builtin::from_id(i.op2) {
                    None => c.at(at, format!("unknown builtin id {}", i.op2)),
                    Some(b) => {
                        if b.arity().is_some_and(|a| a != i.n) {
                            c.at(
                                at,
                                format!(
                                    "builtin {} takes {:?} arguments, got {}",
                                    b.name(),
                                    b.arity(),
                                    i.n
                                ),
                            );
                        }
                    }
                },
                Opcode::MkArr | Opcode::MkTab if i.op1 < 0 => {
                    c.at(at, format!("{} window must be in the frame", i.op));
                }
                _ => {}
            }
            if matches!(i.op, Opcode::Call | Opcode::Builtin) && i.n > 0 && i.op3 < 0 {
                c.at(at, "argument window must be in the frame".into());
            }
            if i.op.fields().has(Fields::FLOAT) && !i.imm_f64().is_finite() {
                c.at(at, "non-finite float immediate".into());
            }
        }
        if let Some(last) = u.code.last() {
            if !last.op.is_terminator() {
                c.at(
                    Some(len - 1),
                    format!("code falls off the end after {}", last.op),
                );
            }
        }
    }
    if c.out.is_empty() {
        Ok(())
    } else {
        Err(c.out)
    }
}

pub fn validate_stack(p: &StackProgram) -> Result<(), Vec<Violation>> {
    use Opcode::*;
    let mut c = Checker {
        out: Vec::new(),
        func: 0,
    };
    check_units(p, &mut c);
    let nglobals = p.globals.len();
    for u in &p.units {
        c.func = u.id.0;
        let len = u.code.len();
        let mut ok = true;
        for (idx, i) in u.code.iter().enumerate() {
            let at = Some(idx);
            let problem = match i.op {
                op if op.form() != Form::Stack => Some(format!("RTL opcode {op} in stack code")),
                PushConst => u
                    .consts
                    .get(i.operand as usize)
                    .is_none()
                    .then(|| format!("constant {} out of range", i.operand)),
                PushSlot | StoreSlot => (!slot_ok(i.operand, u.nslots, nglobals))
                    .then(|| format!("slot {} out of range", i.operand)),
                PushFun => (i.operand < 0 || i.operand as usize >= p.units.len())
                    .then(|| format!("function id {} out of range", i.operand)),
                Jump | BrFalse | BrTrue => (i.operand < 0 || i.operand as usize >= len)
                    .then(|| format!("pc {} out of range", i.operand)),
                SMkArr | SMkTab | SCall => (i.operand < 0).then(|| "negative count".to_string()),
                SBuiltin => {
                    let (id, n) = StackInstr::unpack_builtin(i.operand);
                    match crate::bytecode::Builtin::from_id(id) {
                        None => Some(format!("unknown builtin id {id}")),
                        Some(b) if b.arity().is_some_and(|a| a != n) => Some(format!(
                            "builtin {} takes {:?} arguments, got {n}",
                            b.name(),
                            b.arity()
                        )),
                        _ => None,
                    }
                }
                _ => None,
            };
            if let Some(m) = problem {
                c.at(at, m);
                ok = false;
            }
        }
        if let Some(last) = u.code.last() {
            if !last.op.is_terminator() {
                c.at(
                    Some(len - 1),
                    format!("code falls off the end after {}", last.op),
                );
                ok = false;
            }
        }
        if ok && len > 0 {
            check_depths(&u.code, &mut c);
        }
    }
    if c.out.is_empty() {
        Ok(())
    } else {
        Err(c.out)
    }
}

/// Every instruction must be reached at a single operand-stack depth, no
/// pop may underflow, and `sret` must leave exactly its result.
fn check_depths(code: &[StackInstr], c: &mut Checker) {
    let mut depth: Vec<Option<u32>> = vec![None; code.len()];
    let mut work = vec![(0usize, 0u32)];
    while let Some((pc, d)) = work.pop() {
        match depth[pc] {
            Some(seen) if seen == d => continue,
            Some(seen) => {
                c.at(Some(pc), format!("reached at stack depth {d} and {seen}"));
                return;
            }
            None => depth[pc] = Some(d),
        }
        let i = code[pc];
        let (pops, pushes) = i.stack_effect();
        if pops > d {
            c.at(Some(pc), format!("{} pops {pops} with depth {d}", i.op));
            return;
        }
        if i.op == Opcode::SRet && d != 1 {
            c.at(Some(pc), format!("sret at depth {d}"));
            return;
        }
        let next = d - pops + pushes;
        if i.op.has_target() {
            work.push((i.operand as usize, next));
        }
        if !i.op.is_terminator() {
            work.push((pc + 1, next));
        }
    }
}
