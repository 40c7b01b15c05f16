use super::rtl::{cmp_of, TempAllocator};
use super::{CodegenError, ConstPool, Labels};
use crate::bytecode::{BcProgram, BcUnit, Cmp, Const, Opcode, StackInstr, StackProgram};
use crate::frontend::ast::*;
use crate::frontend::resolve::{FuncInfo, Resolved};

struct LoopCtx {
    brk: usize,
    cont: usize,
}

struct FnGen<'r> {
    r: &'r Resolved,
    code: Vec<StackInstr>,
    labels: Labels,
    consts: ConstPool,
    temps: TempAllocator,
    loops: Vec<LoopCtx>,
}

fn unresolved(name: &str, pos: At) -> CodegenError {
    CodegenError {
        pos: pos.0,
        message: format!("identifier `{name}` was not resolved"),
    }
}

fn stack_cmp(c: Cmp) -> Opcode {
    match c {
        Cmp::Lt => Opcode::SLt,
        Cmp::Le => Opcode::SLe,
        Cmp::Gt => Opcode::SGt,
        Cmp::Ge => Opcode::SGe,
        Cmp::Eq => Opcode::SEq,
        Cmp::Ne => Opcode::SNe,
    }
}

fn stack_arith(op: BinOp) -> Option<Opcode> {
    Some(match op {
        BinOp::Add => Opcode::SAdd,
        BinOp::Sub => Opcode::SSub,
        BinOp::Mul => Opcode::SMul,
        BinOp::Div => Opcode::SDiv,
        BinOp::Mod => Opcode::SMod,
        _ => return None,
    })
}

impl<'r> FnGen<'r> {
    fn emit(&mut self, op: Opcode, operand: i32) -> usize {
        self.code.push(StackInstr::new(op, operand));
        self.code.len() - 1
    }

    fn bare(&mut self, op: Opcode) {
        self.code.push(StackInstr::bare(op));
    }

    fn emit_to(&mut self, op: Opcode, label: usize) {
        let at = self.emit(op, 0);
        self.labels.refer(at, label);
    }

    fn place(&mut self, label: usize) {
        self.labels.place(label, self.code.len() as u32);
    }

    fn ident_slot(&self, id: &Ident) -> Result<i32, CodegenError> {
        match id.binding {
            Some(Binding::Decl(d)) => Ok(self.r.decl(d).slot),
            _ => Err(unresolved(&id.name, id.pos)),
        }
    }

    fn push_const(&mut self, c: Const) {
        let i = self.consts.add(c);
        self.emit(Opcode::PushConst, i as i32);
    }

    /// Leaves the value of `e` on top of the operand stack.
    fn expr(&mut self, e: &Expr) -> Result<(), CodegenError> {
        match e {
            Expr::Int(v, _) => self.push_const(Const::Int(*v)),
            Expr::Float(v, _) => self.push_const(Const::Float(*v)),
            Expr::Str(s, _) => self.push_const(Const::Str(s.clone())),
            Expr::Nil(_) => self.bare(Opcode::PushNil),
            Expr::Ident(id) => {
                let s = self.ident_slot(id)?;
                self.emit(Opcode::PushSlot, s);
            }
            Expr::Binary {
                op: op @ (BinOp::And | BinOp::Or),
                ..
            } => {
                let is_and = *op == BinOp::And;
                let (l_other, l_end) = (self.labels.new_label(), self.labels.new_label());
                self.branch(e, l_other, !is_and)?;
                self.push_const(Const::Int(is_and as i64));
                self.emit_to(Opcode::Jump, l_end);
                self.place(l_other);
                self.push_const(Const::Int(!is_and as i64));
                self.place(l_end);
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                let opc = match (stack_arith(*op), cmp_of(*op)) {
                    (Some(o), _) => o,
                    (_, Some(c)) => stack_cmp(c),
                    _ => unreachable!("logical ops handled above"),
                };
                self.bare(opc);
            }
            Expr::Unary { op, operand, .. } => {
                self.expr(operand)?;
                self.bare(match op {
                    UnOp::Neg => Opcode::SNeg,
                    UnOp::Not => Opcode::SNot,
                });
            }
            Expr::Ternary {
                cond, then, els, ..
            } => {
                let (l_else, l_end) = (self.labels.new_label(), self.labels.new_label());
                self.branch(cond, l_else, false)?;
                self.expr(then)?;
                self.emit_to(Opcode::Jump, l_end);
                self.place(l_else);
                self.expr(els)?;
                self.place(l_end);
            }
            Expr::Call { callee, args, .. } => match callee.as_ref() {
                Expr::Ident(Ident {
                    binding: Some(Binding::Builtin(b)),
                    ..
                }) => {
                    args.iter().try_for_each(|a| self.expr(a))?;
                    self.code.push(StackInstr::builtin(*b, args.len() as u32));
                }
                callee => {
                    self.expr(callee)?;
                    args.iter().try_for_each(|a| self.expr(a))?;
                    self.emit(Opcode::SCall, args.len() as i32);
                }
            },
            Expr::Index { base, index, .. } => {
                self.expr(base)?;
                self.expr(index)?;
                self.bare(Opcode::SAGet);
            }
            Expr::Array(elems, _) => {
                elems.iter().try_for_each(|a| self.expr(a))?;
                self.emit(Opcode::SMkArr, elems.len() as i32);
            }
            Expr::Table(pairs, _) => {
                for (k, v) in pairs {
                    self.expr(k)?;
                    self.expr(v)?;
                }
                self.emit(Opcode::SMkTab, pairs.len() as i32);
            }
            Expr::Fill { size, init, .. } => {
                self.expr(size)?;
                self.expr(init)?;
                self.bare(Opcode::SMkFill);
            }
        }
        Ok(())
    }

    /// Jumps to `label` when the truth of `e` equals `when`.
    fn branch(&mut self, e: &Expr, label: usize, when: bool) -> Result<(), CodegenError> {
        match e {
            Expr::Binary {
                op: BinOp::And,
                lhs,
                rhs,
                ..
            } if !when => {
                self.branch(lhs, label, false)?;
                self.branch(rhs, label, false)
            }
            Expr::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
                ..
            } if when => {
                self.branch(lhs, label, true)?;
                self.branch(rhs, label, true)
            }
            Expr::Binary {
                op: BinOp::And,
                lhs,
                rhs,
                ..
            } => {
                let skip = self.labels.new_label();
                self.branch(lhs, skip, false)?;
                self.branch(rhs, label, true)?;
                self.place(skip);
                Ok(())
            }
            Expr::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
                ..
            } => {
                let skip = self.labels.new_label();
                self.branch(lhs, skip, true)?;
                self.branch(rhs, label, false)?;
                self.place(skip);
                Ok(())
            }
            Expr::Unary {
                op: UnOp::Not,
                operand,
                ..
            } => self.branch(operand, label, !when),
            _ => {
                self.expr(e)?;
                self.emit_to(
                    if when {
                        Opcode::BrTrue
                    } else {
                        Opcode::BrFalse
                    },
                    label,
                );
                Ok(())
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), CodegenError> {
        let mark = self.temps.mark();
        match s {
            Stmt::Var { decls, .. } => {
                for d in decls {
                    let decl = d.decl.ok_or_else(|| unresolved(&d.name, d.pos))?;
                    let slot = self.r.decl(decl).slot;
                    match &d.init {
                        Some(init) => self.expr(init)?,
                        None if slot >= 0 => self.bare(Opcode::PushNil),
                        None => continue,
                    }
                    self.emit(Opcode::StoreSlot, slot);
                }
            }
            Stmt::Fun(_) => {}
            Stmt::Assign {
                target: Expr::Ident(id),
                value,
                ..
            } => {
                let slot = self.ident_slot(id)?;
                self.expr(value)?;
                self.emit(Opcode::StoreSlot, slot);
            }
            Stmt::Assign {
                target: Expr::Index { base, index, .. },
                value,
                ..
            } => {
                self.expr(base)?;
                self.expr(index)?;
                self.expr(value)?;
                self.bare(Opcode::SASet);
            }
            Stmt::OpAssign {
                target: Expr::Ident(id),
                op,
                value,
                pos,
            } => {
                let slot = self.ident_slot(id)?;
                self.emit(Opcode::PushSlot, slot);
                self.expr(value)?;
                self.bare(stack_arith(*op).ok_or_else(|| bad_op(*op, *pos))?);
                self.emit(Opcode::StoreSlot, slot);
            }
            Stmt::OpAssign {
                target: Expr::Index { base, index, .. },
                op,
                value,
                pos,
            } => {
                // No dup instruction: park base and index in hidden frame slots.
                let (tb, ti) = (self.temps.alloc(), self.temps.alloc());
                self.expr(base)?;
                self.emit(Opcode::StoreSlot, tb);
                self.expr(index)?;
                self.emit(Opcode::StoreSlot, ti);
                self.emit(Opcode::PushSlot, tb);
                self.emit(Opcode::PushSlot, ti);
                self.emit(Opcode::PushSlot, tb);
                self.emit(Opcode::PushSlot, ti);
                self.bare(Opcode::SAGet);
                self.expr(value)?;
                self.bare(stack_arith(*op).ok_or_else(|| bad_op(*op, *pos))?);
                self.bare(Opcode::SASet);
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
                self.branch(cond, l_else, false)?;
                self.stmt(then)?;
                match els {
                    Some(els) => {
                        let l_end = self.labels.new_label();
                        self.emit_to(Opcode::Jump, l_end);
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
                    self.branch(c, l_exit, false)?;
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
                self.emit_to(Opcode::Jump, l_test);
                self.place(l_exit);
            }
            Stmt::While { cond, body, .. } => {
                let (l_test, l_exit) = (self.labels.new_label(), self.labels.new_label());
                self.place(l_test);
                self.branch(cond, l_exit, false)?;
                self.loops.push(LoopCtx {
                    brk: l_exit,
                    cont: l_test,
                });
                self.stmt(body)?;
                self.loops.pop();
                self.emit_to(Opcode::Jump, l_test);
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
                self.emit_to(Opcode::Jump, target);
            }
            Stmt::Return(value, _) => {
                match value {
                    Some(v) => self.expr(v)?,
                    None => self.bare(Opcode::PushNil),
                }
                self.bare(Opcode::SRet);
            }
            Stmt::Expr(e) => {
                self.expr(e)?;
                self.bare(Opcode::Pop);
            }
            Stmt::Block(body, _) => body.iter().try_for_each(|s| self.stmt(s))?,
        }
        self.temps.release(mark);
        Ok(())
    }
}

fn bad_op(op: BinOp, pos: At) -> CodegenError {
    CodegenError {
        pos: pos.0,
        message: format!("`{}=` is not an assignment operator", op.symbol()),
    }
}

fn gen_unit(
    r: &Resolved,
    info: &FuncInfo,
    body: &[Stmt],
) -> Result<BcUnit<StackInstr>, CodegenError> {
    let mut g = FnGen {
        r,
        code: Vec::new(),
        labels: Labels::default(),
        consts: ConstPool::default(),
        temps: TempAllocator::new(info.named_slots),
        loops: Vec::new(),
    };
    if info.id == FuncId::MAIN {
        for f in &r.functions[1..] {
            g.emit(Opcode::PushFun, f.id.0 as i32);
            g.emit(Opcode::StoreSlot, f.slot.expect("function slot"));
        }
    }
    body.iter().try_for_each(|s| g.stmt(s))?;
    g.bare(Opcode::PushNil);
    g.bare(Opcode::SRet);
    g.labels.patch(&mut g.code, |i, pc| i.operand = pc as i32);
    Ok(BcUnit {
        id: info.id,
        name: info.name.clone(),
        arity: info.arity,
        nslots: g.temps.nslots(),
        hints: info.hints.clone(),
        code: g.code,
        vdecls: info.vdecls.clone(),
        consts: g.consts.into_vec(),
    })
}

/// Lowers a resolved program to one-operand stack bytecode with the same
/// unit numbering, globals and local slot layout as [`super::gen_rtl`].
pub fn gen_stack(r: &Resolved) -> Result<StackProgram, CodegenError> {
    let bodies = super::function_bodies(r)?;
    let units = r
        .functions
        .iter()
        .map(|info| gen_unit(r, info, bodies[info.id.index()]))
        .collect::<Result<_, _>>()?;
    Ok(BcProgram {
        units,
        globals: r.globals.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::validate_stack;
    use crate::codegen::gen_rtl;
    use crate::frontend::check_source;

    fn stack(src: &str) -> StackProgram {
        let p = gen_stack(&check_source(src).unwrap().resolved).unwrap();
        validate_stack(&p).unwrap_or_else(|v| panic!("{v:?}"));
        p
    }

    #[test]
    fn assignment_is_four_instructions() {
        let p = stack("fun g(a, b) { var x; x = a + b; } g(1, 2);");
        let names: Vec<_> = p.units[1].code.iter().map(|i| i.to_string()).collect();
        assert_eq!(
            &names[2..6],
            ["pushslot 0", "pushslot 1", "sadd", "storeslot 2"]
        );
    }

    #[test]
    fn bare_return() {
        let p = stack("fun f() { return; } f();");
        let names: Vec<_> = p.units[1].code.iter().map(|i| i.op.name()).collect();
        assert_eq!(&names[..2], ["pushnil", "sret"]);
    }

    #[test]
    fn empty_program_epilogue() {
        assert_eq!(stack("").entry().code.len(), 2);
    }

    #[test]
    fn static_count_not_below_rtl() {
        let src = crate::frontend::parser::tests::SIEVE;
        let r = check_source(src).unwrap().resolved;
        let (s, t) = (gen_stack(&r).unwrap(), gen_rtl(&r).unwrap());
        for (a, b) in s.units.iter().zip(&t.units) {
            assert!(
                b.code.len() <= a.code.len(),
                "{}: rtl {} > stack {}",
                a.name,
                b.code.len(),
                a.code.len()
            );
        }
    }

    #[test]
    fn index_op_assign_is_balanced() {
        stack("var a = [1, 2]; a[0] += 5; a[1] *= a[0];");
    }
}
