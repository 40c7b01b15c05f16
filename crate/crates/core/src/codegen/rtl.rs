use super::{has_call, CodegenError, ConstPool, Labels};
use crate::bytecode::{
    global_index, Arith, BcProgram, BcUnit, Cmp, Opcode, RtlInstr, RtlProgram, Slot, Variant,
};
use crate::frontend::ast::*;
use crate::frontend::resolve::{FuncInfo, Resolved};

/// Stack-discipline allocator for temporary slots above the named locals.
#[derive(Debug, Clone)]
pub struct TempAllocator {
    base: u32,
    next: u32,
    high: u32,
}

impl TempAllocator {
    pub fn new(base: u32) -> Self {
        TempAllocator {
            base,
            next: base,
            high: base,
        }
    }

    pub fn alloc(&mut self) -> Slot {
        self.alloc_n(1)
    }

    /// `n` consecutive slots; returns the first.
    pub fn alloc_n(&mut self, n: u32) -> Slot {
        let s = self.next;
        self.next += n;
        self.high = self.high.max(self.next);
        s as Slot
    }

    pub fn mark(&self) -> u32 {
        self.next
    }

    pub fn release(&mut self, mark: u32) {
        debug_assert!(mark >= self.base && mark <= self.next);
        self.next = mark;
    }

    /// Frame size: everything below the base plus the temp high-water mark.
    pub fn nslots(&self) -> u32 {
        self.high
    }
}

struct LoopCtx {
    brk: usize,
    cont: usize,
}

struct FnGen<'r> {
    r: &'r Resolved,
    code: Vec<RtlInstr>,
    labels: Labels,
    consts: ConstPool,
    temps: TempAllocator,
    loops: Vec<LoopCtx>,
    /// Never written: `ret` of this slot returns nil.
    nil_slot: Slot,
}

fn arith_of(op: BinOp) -> Option<Arith> {
    Some(match op {
        BinOp::Add => Arith::Add,
        BinOp::Sub => Arith::Sub,
        BinOp::Mul => Arith::Mul,
        BinOp::Div => Arith::Div,
        BinOp::Mod => Arith::Mod,
        _ => return None,
    })
}

pub(super) fn cmp_of(op: BinOp) -> Option<Cmp> {
    Some(match op {
        BinOp::Lt => Cmp::Lt,
        BinOp::Le => Cmp::Le,
        BinOp::Gt => Cmp::Gt,
        BinOp::Ge => Cmp::Ge,
        BinOp::Eq => Cmp::Eq,
        BinOp::Ne => Cmp::Ne,
        _ => return None,
    })
}

fn unresolved(name: &str, pos: At) -> CodegenError {
    CodegenError {
        pos: pos.0,
        message: format!("identifier `{name}` was not resolved"),
    }
}

impl<'r> FnGen<'r> {
    fn new(r: &'r Resolved, info: &FuncInfo) -> Self {
        FnGen {
            r,
            code: Vec::new(),
            labels: Labels::default(),
            consts: ConstPool::default(),
            temps: TempAllocator::new(info.named_slots + 1),
            loops: Vec::new(),
            nil_slot: info.named_slots as Slot,
        }
    }

    fn emit(&mut self, i: RtlInstr) -> usize {
        self.code.push(i);
        self.code.len() - 1
    }

    fn emit_to(&mut self, i: RtlInstr, label: usize) {
        let at = self.emit(i);
        self.labels.refer(at, label);
    }

    fn place(&mut self, label: usize) {
        self.labels.place(label, self.code.len() as u32);
    }

    fn dest_or_temp(&mut self, dest: Option<Slot>) -> Slot {
        dest.unwrap_or_else(|| self.temps.alloc())
    }

    fn ident_slot(&self, id: &Ident) -> Result<Slot, CodegenError> {
        match id.binding {
            Some(Binding::Decl(d)) => Ok(self.r.decl(d).slot),
            _ => Err(unresolved(&id.name, id.pos)),
        }
    }

    /// Evaluates `e` to some slot without a forced destination. A global
    /// read directly is copied first when `later` (evaluated before the
    /// read happens) contains a call that might reassign it.
    fn operand(&mut self, e: &Expr, later: &[&Expr]) -> Result<Slot, CodegenError> {
        if let Expr::Ident(id) = e {
            let s = self.ident_slot(id)?;
            if global_index(s).is_some() && later.iter().any(|l| has_call(l)) {
                let t = self.temps.alloc();
                self.emit(RtlInstr::ld(t, s));
                return Ok(t);
            }
            return Ok(s);
        }
        self.expr(e, None)
    }

    /// Evaluates `e`. With `Some(d)` the value lands in `d` and only the final
    /// instruction writes `d`; otherwise a slot holding the value is returned.
    fn expr(&mut self, e: &Expr, dest: Option<Slot>) -> Result<Slot, CodegenError> {
        match e {
            Expr::Int(v, _) => {
                let d = self.dest_or_temp(dest);
                self.emit(RtlInstr::ldi(d, *v));
                Ok(d)
            }
            Expr::Float(v, _) => {
                let d = self.dest_or_temp(dest);
                self.emit(RtlInstr::ldf(d, *v));
                Ok(d)
            }
            Expr::Str(s, _) => {
                let d = self.dest_or_temp(dest);
                let c = self.consts.str(s);
                self.emit(RtlInstr::lds(d, c));
                Ok(d)
            }
            Expr::Nil(_) => {
                let d = self.dest_or_temp(dest);
                self.emit(RtlInstr::ldnil(d));
                Ok(d)
            }
            Expr::Ident(id) => {
                let s = self.ident_slot(id)?;
                match dest {
                    Some(d) if d != s => {
                        self.emit(RtlInstr::ld(d, s));
                        Ok(d)
                    }
                    _ => Ok(s),
                }
            }
            Expr::Binary {
                op: BinOp::And | BinOp::Or,
                ..
            } => self.logical(e, dest),
            Expr::Binary { op, lhs, rhs, .. } => {
                let mark = self.temps.mark();
                let a = self.operand(lhs, &[rhs])?;
                let b = self.operand(rhs, &[])?;
                self.temps.release(mark);
                let d = self.dest_or_temp(dest);
                let opc = match (arith_of(*op), cmp_of(*op)) {
                    (Some(k), _) => Opcode::arith(k, Variant::Generic).expect("generic arith"),
                    (_, Some(c)) => Opcode::cmp(c, Variant::Generic),
                    _ => unreachable!("logical ops handled above"),
                };
                self.emit(RtlInstr::dab(opc, d, a, b));
                Ok(d)
            }
            Expr::Unary { op, operand, .. } => {
                let mark = self.temps.mark();
                let s = self.operand(operand, &[])?;
                self.temps.release(mark);
                let d = self.dest_or_temp(dest);
                let opc = match op {
                    UnOp::Neg => Opcode::Neg,
                    UnOp::Not => Opcode::Not,
                };
                self.emit(RtlInstr::ds(opc, d, s));
                Ok(d)
            }
            Expr::Ternary {
                cond, then, els, ..
            } => {
                let d = self.dest_or_temp(dest);
                let (l_else, l_end) = (self.labels.new_label(), self.labels.new_label());
                self.branch_false(cond, l_else)?;
                let mark = self.temps.mark();
                self.expr(then, Some(d))?;
                self.temps.release(mark);
                self.emit_to(RtlInstr::jmp(0), l_end);
                self.place(l_else);
                self.expr(els, Some(d))?;
                self.temps.release(mark);
                self.place(l_end);
                Ok(d)
            }
            Expr::Call { callee, args, .. } => self.call(callee, args, dest),
            Expr::Index { base, index, .. } => {
                let mark = self.temps.mark();
                let b = self.operand(base, &[index])?;
                let i = self.operand(index, &[])?;
                self.temps.release(mark);
                let d = self.dest_or_temp(dest);
                self.emit(RtlInstr::dab(Opcode::AGet, d, b, i));
                Ok(d)
            }
            Expr::Array(elems, _) => {
                let window: Vec<&Expr> = elems.iter().collect();
                self.make(Opcode::MkArr, &window, elems.len() as u32, dest)
            }
            Expr::Table(pairs, _) => {
                let window: Vec<&Expr> = pairs.iter().flat_map(|(k, v)| [k, v]).collect();
                self.make(Opcode::MkTab, &window, pairs.len() as u32, dest)
            }
            Expr::Fill { size, init, .. } => {
                let mark = self.temps.mark();
                let n = self.operand(size, &[init])?;
                let v = self.operand(init, &[])?;
                self.temps.release(mark);
                let d = self.dest_or_temp(dest);
                self.emit(RtlInstr::dab(Opcode::MkFill, d, n, v));
                Ok(d)
            }
        }
    }

    /// `mkarr`/`mktab`: the aggregate is built in a temp followed by its
    /// element window, then moved to the destination if one was requested.
    fn make(
        &mut self,
        op: Opcode,
        window: &[&Expr],
        n: u32,
        dest: Option<Slot>,
    ) -> Result<Slot, CodegenError> {
        let w = self.temps.alloc();
        let mark = self.temps.mark();
        let first = self.temps.alloc_n(window.len() as u32);
        for (k, e) in window.iter().enumerate() {
            self.expr(e, Some(first + k as Slot))?;
        }
        self.temps.release(mark);
        self.emit(RtlInstr::dn(op, w, n));
        match dest {
            Some(d) => {
                self.emit(RtlInstr::ld(d, w));
                Ok(d)
            }
            None => Ok(w),
        }
    }

    fn call(
        &mut self,
        callee: &Expr,
        args: &[Expr],
        dest: Option<Slot>,
    ) -> Result<Slot, CodegenError> {
        let d = self.dest_or_temp(dest);
        let mark = self.temps.mark();
        let builtin = match callee {
            Expr::Ident(Ident {
                binding: Some(Binding::Builtin(b)),
                ..
            }) => Some(*b),
            _ => None,
        };
        let f = match builtin {
            Some(_) => None,
            None => {
                let later: Vec<&Expr> = args.iter().collect();
                Some(self.operand(callee, &later)?)
            }
        };
        let base = self.temps.alloc_n(args.len() as u32);
        for (k, a) in args.iter().enumerate() {
            self.expr(a, Some(base + k as Slot))?;
        }
        let n = args.len() as u32;
        match (builtin, f) {
            (Some(b), _) => self.emit(RtlInstr::builtin(d, b, base, n)),
            (None, Some(f)) => self.emit(RtlInstr::call(d, f, base, n)),
            (None, None) => unreachable!(),
        };
        self.temps.release(mark);
        Ok(d)
    }

    fn logical(&mut self, e: &Expr, dest: Option<Slot>) -> Result<Slot, CodegenError> {
        let d = self.dest_or_temp(dest);
        let (l_other, l_end) = (self.labels.new_label(), self.labels.new_label());
        let is_and = matches!(e, Expr::Binary { op: BinOp::And, .. });
        if is_and {
            self.branch_false(e, l_other)?;
        } else {
            self.branch_true(e, l_other)?;
        }
        self.emit(RtlInstr::ldi(d, is_and as i64));
        self.emit_to(RtlInstr::jmp(0), l_end);
        self.place(l_other);
        self.emit(RtlInstr::ldi(d, !is_and as i64));
        self.place(l_end);
        Ok(d)
    }

    /// Jumps to `label` when `e` is false; falls through otherwise.
    fn branch_false(&mut self, e: &Expr, label: usize) -> Result<(), CodegenError> {
        self.branch(e, label, false)
    }

    fn branch_true(&mut self, e: &Expr, label: usize) -> Result<(), CodegenError> {
        self.branch(e, label, true)
    }

    fn branch(&mut self, e: &Expr, label: usize, when: bool) -> Result<(), CodegenError> {
        let mark = self.temps.mark();
        match e {
            Expr::Binary {
                op: BinOp::And,
                lhs,
                rhs,
                ..
            } if !when => {
                self.branch(lhs, label, false)?;
                self.branch(rhs, label, false)?;
            }
            Expr::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
                ..
            } if when => {
                self.branch(lhs, label, true)?;
                self.branch(rhs, label, true)?;
            }
            Expr::Binary {
                op: BinOp::And,
                lhs,
                rhs,
                ..
            } => {
                // true-branch of `a && b`
                let skip = self.labels.new_label();
                self.branch(lhs, skip, false)?;
                self.branch(rhs, label, true)?;
                self.place(skip);
            }
            Expr::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
                ..
            } => {
                // false-branch of `a || b`
                let skip = self.labels.new_label();
                self.branch(lhs, skip, true)?;
                self.branch(rhs, label, false)?;
                self.place(skip);
            }
            Expr::Unary {
                op: UnOp::Not,
                operand,
                ..
            } => self.branch(operand, label, !when)?,
            Expr::Binary { op, lhs, rhs, .. } if op.is_comparison() => {
                let a = self.operand(lhs, &[rhs])?;
                let b = self.operand(rhs, &[])?;
                let t = self.temps.alloc();
                let c = cmp_of(*op).expect("comparison");
                self.emit(RtlInstr::dab(Opcode::cmp(c, Variant::Generic), t, a, b));
                let br = if when { Opcode::Bt } else { Opcode::Bf };
                self.emit_to(RtlInstr::branch(br, t, 0), label);
            }
            _ => {
                let s = self.operand(e, &[])?;
                let br = if when { Opcode::Bt } else { Opcode::Bf };
                self.emit_to(RtlInstr::branch(br, s, 0), label);
            }
        }
        self.temps.release(mark);
        Ok(())
    }

    fn body(&mut self, stmts: &[Stmt]) -> Result<(), CodegenError> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), CodegenError> {
        let mark = self.temps.mark();
        match s {
            Stmt::Var { decls, .. } => {
                for d in decls {
                    let decl = d.decl.ok_or_else(|| unresolved(&d.name, d.pos))?;
                    let slot = self.r.decl(decl).slot;
                    match &d.init {
                        Some(init) => {
                            self.expr(init, Some(slot))?;
                        }
                        None if slot >= 0 => {
                            self.emit(RtlInstr::ldnil(slot));
                        }
                        None => {}
                    }
                    self.temps.release(mark);
                }
            }
            Stmt::Fun(_) => {}
            Stmt::Assign {
                target: Expr::Ident(id),
                value,
                ..
            } => {
                let slot = self.ident_slot(id)?;
                self.expr(value, Some(slot))?;
            }
            Stmt::Assign {
                target: Expr::Index { base, index, .. },
                value,
                ..
            } => {
                let b = self.operand(base, &[index, value])?;
                let i = self.operand(index, &[value])?;
                let v = self.operand(value, &[])?;
                self.emit(RtlInstr::dab(Opcode::ASet, b, i, v));
            }
            Stmt::OpAssign {
                target: Expr::Ident(id),
                op,
                value,
                ..
            } => {
                let slot = self.ident_slot(id)?;
                match (op, value) {
                    (BinOp::Add, Expr::Int(k, _)) => {
                        self.emit(RtlInstr::addi(slot, slot, *k));
                    }
                    (BinOp::Sub, Expr::Int(k, _)) => {
                        self.emit(RtlInstr::addi(slot, slot, k.wrapping_neg()));
                    }
                    _ => {
                        let a = self.operand(&Expr::Ident(id.clone()), &[value])?;
                        let b = self.operand(value, &[])?;
                        let k = arith_of(*op).ok_or_else(|| CodegenError {
                            pos: id.pos.0,
                            message: format!("`{}=` is not an assignment operator", op.symbol()),
                        })?;
                        let opc = Opcode::arith(k, Variant::Generic).expect("generic arith");
                        self.emit(RtlInstr::dab(opc, slot, a, b));
                    }
                }
            }
            Stmt::OpAssign {
                target: Expr::Index { base, index, pos },
                op,
                value,
                ..
            } => {
                let b = self.operand(base, &[index, value])?;
                let i = self.operand(index, &[value])?;
                let t = self.temps.alloc();
                self.emit(RtlInstr::dab(Opcode::AGet, t, b, i));
                let v = self.operand(value, &[])?;
                let k = arith_of(*op).ok_or_else(|| CodegenError {
                    pos: pos.0,
                    message: format!("`{}=` is not an assignment operator", op.symbol()),
                })?;
                self.emit(RtlInstr::dab(
                    Opcode::arith(k, Variant::Generic).expect("arith"),
                    t,
                    t,
                    v,
                ));
                self.emit(RtlInstr::dab(Opcode::ASet, b, i, t));
            }
            Stmt::Assign { target, .. } | Stmt::OpAssign { target, .. } => {
                return Err(CodegenError {
                    pos: target.pos(),
                    message: "invalid assignment target".into(),
                });
            }
            Stmt::If {
                cond, then, els, ..
            } => {
                let l_else = self.labels.new_label();
                self.branch_false(cond, l_else)?;
                self.stmt(then)?;
                match els {
                    Some(els) => {
                        let l_end = self.labels.new_label();
                        self.emit_to(RtlInstr::jmp(0), l_end);
                        self.place(l_else);
                        self.stmt(els)?;
                        self.place(l_end);
                    }
                    None => self.place(l_else),
                }
            }
            Stmt::For {
                init,
                cond,
                update,
                body,
                ..
            } => {
                if let Some(init) = init {
                    self.stmt(init)?;
                }
                let (l_test, l_cont, l_exit) = (
                    self.labels.new_label(),
                    self.labels.new_label(),
                    self.labels.new_label(),
                );
                self.place(l_test);
                if let Some(c) = cond {
                    self.branch_false(c, l_exit)?;
                }
                self.loops.push(LoopCtx {
                    brk: l_exit,
                    cont: l_cont,
                });
                self.stmt(body)?;
                self.loops.pop();
                self.place(l_cont);
                if let Some(u) = update {
                    self.stmt(u)?;
                }
                self.emit_to(RtlInstr::jmp(0), l_test);
                self.place(l_exit);
            }
            Stmt::While { cond, body, .. } => {
                let (l_test, l_exit) = (self.labels.new_label(), self.labels.new_label());
                self.place(l_test);
                self.branch_false(cond, l_exit)?;
                self.loops.push(LoopCtx {
                    brk: l_exit,
                    cont: l_test,
                });
                self.stmt(body)?;
                self.loops.pop();
                self.emit_to(RtlInstr::jmp(0), l_test);
                self.place(l_exit);
            }
            Stmt::Break(pos) | Stmt::Continue(pos) => {
                let ctx = self.loops.last().ok_or_else(|| CodegenError {
                    pos: pos.0,
                    message: "`break`/`continue` outside of a loop".into(),
                })?;
                let target = if matches!(s, Stmt::Break(_)) {
                    ctx.brk
                } else {
                    ctx.cont
                };
                self.emit_to(RtlInstr::jmp(0), target);
            }
            Stmt::Return(value, _) => {
                let s = match value {
                    Some(v) => self.operand(v, &[])?,
                    None => self.nil_slot,
                };
                self.emit(RtlInstr::ret(s));
            }
            Stmt::Expr(e) => {
                self.expr(e, None)?;
            }
            Stmt::Block(body, _) => self.body(body)?,
        }
        self.temps.release(mark);
        Ok(())
    }

    fn finish(mut self, info: &FuncInfo) -> BcUnit<RtlInstr> {
        self.emit(RtlInstr::ret(self.nil_slot));
        self.labels.patch(&mut self.code, |i, pc| i.pc = pc);
        BcUnit {
            id: info.id,
            name: info.name.clone(),
            arity: info.arity,
            nslots: self.temps.nslots(),
            hints: info.hints.clone(),
            code: self.code,
            vdecls: info.vdecls.clone(),
            consts: self.consts.into_vec(),
        }
    }
}

/// Lowers a resolved program to register-transfer bytecode. Unit `i` is the
/// function with id `i`; unit 0 is the implicit `main`, whose prologue
/// stores every function value in its global slot.
pub fn gen_rtl(r: &Resolved) -> Result<RtlProgram, CodegenError> {
    let bodies = super::function_bodies(r)?;
    let mut units = Vec::with_capacity(r.functions.len());
    for info in &r.functions {
        let mut g = FnGen::new(r, info);
        if info.id == FuncId::MAIN {
            for f in &r.functions[1..] {
                g.emit(RtlInstr::ldfun(f.slot.expect("function slot"), f.id));
            }
        }
        g.body(bodies[info.id.index()])?;
        units.push(g.finish(info));
    }
    Ok(BcProgram {
        units,
        globals: r.globals.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::{dump_text, validate_rtl};
    use crate::frontend::check_source;

    fn rtl(src: &str) -> RtlProgram {
        let p = gen_rtl(&check_source(src).unwrap().resolved).unwrap();
        validate_rtl(&p).unwrap_or_else(|v| panic!("{v:?}\n{}", dump_text(&p)));
        p
    }

    fn ops(code: &[RtlInstr]) -> Vec<&'static str> {
        code.iter().map(|i| i.op.name()).collect()
    }

    #[test]
    fn empty_loop_shape() {
        let p = rtl("var i, n = 1000; for (i = 0; i < n; i++);");
        assert_eq!(
            ops(&p.entry().code),
            ["ldi", "ldi", "lt", "bf", "addi", "jmp", "ret"]
        );
        let c = &p.entry().code;
        assert_eq!(c[3].pc, 6);
        assert_eq!(c[5].pc, 2);
        assert_eq!(c[4].imm, 1);
    }

    #[test]
    fn return_constant() {
        let p = rtl("fun f() { return 0; } f();");
        let f = &p.units[1];
        assert_eq!(ops(&f.code), ["ldi", "ret", "ret"]);
        assert_eq!(f.code[0].op1, f.code[1].op1);
        assert!(
            f.code[0].op1 as u32 >= 1,
            "result goes to a temp, not the nil slot"
        );
    }

    #[test]
    fn assignment_targets_variable_directly() {
        let p = rtl("fun g(a, b) { var x; x = a + b; return x; } g(1, 2);");
        let g = &p.units[1];
        assert_eq!(g.code[1], RtlInstr::dab(Opcode::Add, 2, 0, 1));
    }

    #[test]
    fn main_prologue_stores_functions() {
        let p = rtl("fun f() {} fun g() {}");
        assert_eq!(ops(&p.entry().code), ["ldfun", "ldfun", "ret"]);
        assert_eq!(p.entry().code[1].imm, 2);
    }

    #[test]
    fn empty_program_is_one_ret() {
        assert_eq!(ops(&rtl("").entry().code), ["ret"]);
    }

    #[test]
    fn global_copied_before_call_in_operand() {
        let p = rtl("var g = 1; fun f() { g = 10; return 1; } var y = g + f();");
        let c = &p.entry().code;
        let add = c.iter().find(|i| i.op == Opcode::Add).unwrap();
        assert!(add.op2 >= 0, "left operand must be a snapshot temp: {add}");
    }

    #[test]
    fn nslots_covers_temps() {
        let p = rtl("fun h(x) { return [x, x + 1, [x : 0], tab [1 : 2]]; } h(1);");
        validate_rtl(&p).unwrap();
        assert!(p.units[1].nslots > 2);
    }

    #[test]
    fn temp_allocator_is_stackwise() {
        let mut t = TempAllocator::new(3);
        let a = t.alloc();
        let m = t.mark();
        let b = t.alloc_n(4);
        t.release(m);
        let c = t.alloc();
        assert_eq!((a, b, c), (3, 4, 4));
        assert_eq!(t.nslots(), 8);
    }
}
