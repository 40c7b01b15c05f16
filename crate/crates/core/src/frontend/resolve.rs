use std::collections::HashMap;

use super::ast::*;
use super::{CompileError, Pos};
use crate::bytecode::{global_slot, Builtin, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    GlobalVar,
    GlobalVal,
    LocalVar,
    LocalVal,
    Param,
    Function,
}

impl DeclKind {
    pub fn is_frame_local(self) -> bool {
        matches!(
            self,
            DeclKind::LocalVar | DeclKind::LocalVal | DeclKind::Param
        )
    }
}

/// Resolution facts for one declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeInfo {
    pub decl: DeclId,
    pub name: String,
    pub kind: DeclKind,
    /// Signed slot reference: `>= 0` is a frame slot of `owner`, `< 0` a global.
    pub slot: Slot,
    pub owner: Option<FuncId>,
    pub pos: Pos,
    /// For `Function` declarations, the function it names.
    pub func: Option<FuncId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncInfo {
    pub id: FuncId,
    pub name: String,
    pub arity: u32,
    /// Parameters plus named locals; temporaries come after these.
    pub named_slots: u32,
    pub hints: Vec<Hint>,
    /// Global slot holding the function value (`None` for the implicit main).
    pub slot: Option<Slot>,
    pub parent: Option<FuncId>,
    /// Named locals in slot order, parameters first.
    pub vdecls: Vec<(String, Slot)>,
}

/// A scope-checked program: the annotated AST plus declaration tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub program: Program,
    pub decls: Vec<ScopeInfo>,
    pub functions: Vec<FuncInfo>,
    /// Global names by global index; index 0 is `argv`.
    pub globals: Vec<String>,
}

impl Resolved {
    pub fn decl(&self, id: DeclId) -> &ScopeInfo {
        &self.decls[id.0 as usize]
    }

    pub fn func(&self, id: FuncId) -> &FuncInfo {
        &self.functions[id.index()]
    }
}

pub const ARGV_GLOBAL: u32 = 0;
pub const MAIN_NAME: &str = "main";

struct FuncCtx {
    id: FuncId,
    loop_depth: u32,
}

struct Resolver {
    decls: Vec<ScopeInfo>,
    functions: Vec<FuncInfo>,
    globals: Vec<String>,
    /// Innermost last. Each scope maps names to declarations.
    scopes: Vec<HashMap<String, DeclId>>,
    funcs: Vec<FuncCtx>,
    /// Forward declarations awaiting a definition.
    pending: HashMap<DeclId, Pos>,
}

fn err(pos: impl Into<Pos>, message: impl Into<String>) -> CompileError {
    CompileError::Resolve {
        pos: pos.into(),
        message: message.into(),
    }
}

impl From<At> for Pos {
    fn from(a: At) -> Pos {
        a.0
    }
}

impl Resolver {
    fn current(&self) -> FuncId {
        self.funcs.last().expect("function context").id
    }

    fn at_program_level(&self) -> bool {
        self.funcs.len() == 1 && self.scopes.len() == 1
    }

    fn new_global(&mut self, name: &str) -> Slot {
        self.globals.push(name.to_string());
        global_slot(self.globals.len() as u32 - 1)
    }

    fn declare(&mut self, name: &str, kind: DeclKind, pos: Pos) -> DeclId {
        let owner = self.current();
        let slot = match kind {
            DeclKind::GlobalVar | DeclKind::GlobalVal | DeclKind::Function => self.new_global(name),
            DeclKind::LocalVar | DeclKind::LocalVal | DeclKind::Param => {
                let f = &mut self.functions[owner.index()];
                let s = f.named_slots as Slot;
                f.named_slots += 1;
                f.vdecls.push((name.to_string(), s));
                s
            }
        };
        let id = DeclId(self.decls.len() as u32);
        self.decls.push(ScopeInfo {
            decl: id,
            name: name.to_string(),
            kind,
            slot,
            owner: Some(owner),
            pos,
            func: None,
        });
        self.scopes
            .last_mut()
            .expect("scope")
            .insert(name.to_string(), id);
        id
    }

    fn new_function(&mut self, name: &str, hints: &[Hint], slot: Option<Slot>) -> FuncId {
        let id = FuncId(self.functions.len() as u32);
        let parent = self.funcs.last().map(|c| c.id);
        self.functions.push(FuncInfo {
            id,
            name: name.to_string(),
            arity: 0,
            named_slots: 0,
            hints: hints.to_vec(),
            slot,
            parent,
            vdecls: Vec::new(),
        });
        id
    }

    fn lookup(&self, name: &str) -> Option<DeclId> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn resolve_ident(&mut self, id: &mut Ident, callee: bool) -> Result<(), CompileError> {
        match self.lookup(&id.name) {
            Some(d) => {
                let info = &self.decls[d.0 as usize];
                if info.kind.is_frame_local() && info.owner != Some(self.current()) {
                    return Err(err(
                        id.pos,
                        format!(
                            "`{}` is a local of an enclosing function and cannot be captured",
                            id.name
                        ),
                    ));
                }
                id.binding = Some(Binding::Decl(d));
                Ok(())
            }
            None => match Builtin::from_name(&id.name) {
                Some(b) if callee => {
                    id.binding = Some(Binding::Builtin(b));
                    Ok(())
                }
                Some(_) => Err(err(
                    id.pos,
                    format!("builtin `{}` can only be called", id.name),
                )),
                None => Err(err(id.pos, format!("undeclared identifier `{}`", id.name))),
            },
        }
    }

    fn expr(&mut self, e: &mut Expr) -> Result<(), CompileError> {
        match e {
            Expr::Int(..) | Expr::Float(..) | Expr::Str(..) | Expr::Nil(_) => Ok(()),
            Expr::Ident(id) => self.resolve_ident(id, false),
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs)?;
                self.expr(rhs)
            }
            Expr::Unary { operand, .. } => self.expr(operand),
            Expr::Ternary {
                cond, then, els, ..
            } => {
                self.expr(cond)?;
                self.expr(then)?;
                self.expr(els)
            }
            Expr::Call { callee, args, .. } => {
                match &mut **callee {
                    Expr::Ident(id) => {
                        self.resolve_ident(id, true)?;
                        if let Some(Binding::Builtin(b)) = id.binding {
                            if let Some(n) = b.arity().filter(|&n| n as usize != args.len()) {
                                return Err(err(
                                    id.pos,
                                    format!(
                                        "`{}` takes {n} argument(s), got {}",
                                        b.name(),
                                        args.len()
                                    ),
                                ));
                            }
                        }
                    }
                    other => self.expr(other)?,
                }
                args.iter_mut().try_for_each(|a| self.expr(a))
            }
            Expr::Index { base, index, .. } => {
                self.expr(base)?;
                self.expr(index)
            }
            Expr::Array(elems, _) => elems.iter_mut().try_for_each(|a| self.expr(a)),
            Expr::Fill { size, init, .. } => {
                self.expr(size)?;
                self.expr(init)
            }
            Expr::Table(pairs, _) => pairs.iter_mut().try_for_each(|(k, v)| {
                self.expr(k)?;
                self.expr(v)
            }),
        }
    }

    fn assign_target(&mut self, target: &mut Expr) -> Result<(), CompileError> {
        match target {
            Expr::Ident(id) => {
                self.resolve_ident(id, false)?;
                let Some(Binding::Decl(d)) = id.binding else {
                    unreachable!()
                };
                let info = &self.decls[d.0 as usize];
                match info.kind {
                    DeclKind::GlobalVal | DeclKind::LocalVal => {
                        Err(err(id.pos, format!("cannot assign to `val {}`", id.name)))
                    }
                    DeclKind::Function => Err(err(
                        id.pos,
                        format!("cannot assign to function `{}`", id.name),
                    )),
                    _ => Ok(()),
                }
            }
            other => self.expr(other),
        }
    }

    fn block(&mut self, body: &mut [Stmt]) -> Result<(), CompileError> {
        self.scopes.push(HashMap::new());
        let r = body.iter_mut().try_for_each(|s| self.stmt(s));
        self.scopes.pop();
        r
    }

    fn nested(&mut self, s: &mut Stmt) -> Result<(), CompileError> {
        // A lone statement in if/for/while position still gets its own scope.
        self.block(std::slice::from_mut(s))
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), CompileError> {
        match s {
            Stmt::Var { is_val, decls, .. } => {
                let global = self.at_program_level();
                let kind = match (global, *is_val) {
                    (true, false) => DeclKind::GlobalVar,
                    (true, true) => DeclKind::GlobalVal,
                    (false, false) => DeclKind::LocalVar,
                    (false, true) => DeclKind::LocalVal,
                };
                for d in decls {
                    if let Some(init) = &mut d.init {
                        self.expr(init)?;
                    }
                    d.decl = Some(self.declare(&d.name, kind, d.pos.0));
                }
                Ok(())
            }
            Stmt::Fun(f) => self.fun(f),
            Stmt::Assign { target, value, .. } | Stmt::OpAssign { target, value, .. } => {
                self.expr(value)?;
                self.assign_target(target)
            }
            Stmt::If {
                cond, then, els, ..
            } => {
                self.expr(cond)?;
                self.nested(then)?;
                if let Some(e) = els {
                    self.nested(e)?;
                }
                Ok(())
            }
            Stmt::For {
                init,
                cond,
                update,
                body,
                ..
            } => {
                if let Some(i) = init {
                    self.stmt(i)?;
                }
                if let Some(c) = cond {
                    self.expr(c)?;
                }
                if let Some(u) = update {
                    self.stmt(u)?;
                }
                self.loop_body(body)
            }
            Stmt::While { cond, body, .. } => {
                self.expr(cond)?;
                self.loop_body(body)
            }
            Stmt::Break(pos) | Stmt::Continue(pos) => {
                let pos = *pos;
                let what = if matches!(s, Stmt::Break(_)) {
                    "break"
                } else {
                    "continue"
                };
                if self.funcs.last().expect("ctx").loop_depth == 0 {
                    return Err(err(pos, format!("`{what}` outside of a loop")));
                }
                Ok(())
            }
            Stmt::Return(v, pos) => {
                if self.funcs.len() == 1 {
                    return Err(err(*pos, "`return` outside of a function"));
                }
                if let Some(v) = v {
                    self.expr(v)?;
                }
                Ok(())
            }
            Stmt::Expr(e) => self.expr(e),
            Stmt::Block(body, _) => self.block(body),
        }
    }

    fn loop_body(&mut self, body: &mut Stmt) -> Result<(), CompileError> {
        self.funcs.last_mut().expect("ctx").loop_depth += 1;
        let r = self.nested(body);
        self.funcs.last_mut().expect("ctx").loop_depth -= 1;
        r
    }

    fn fun(&mut self, f: &mut FunDecl) -> Result<(), CompileError> {
        // A definition completes a forward declaration made in the same block.
        let forward = self
            .scopes
            .last()
            .and_then(|s| s.get(&f.name).copied())
            .filter(|d| self.pending.contains_key(d));
        let decl = match forward {
            Some(d) if f.body.is_some() => {
                self.pending.remove(&d);
                d
            }
            _ => {
                let d = self.declare(&f.name, DeclKind::Function, f.pos.0);
                let slot = self.decls[d.0 as usize].slot;
                let id = self.new_function(&f.name, &f.hints, Some(slot));
                self.decls[d.0 as usize].func = Some(id);
                if f.body.is_none() {
                    self.pending.insert(d, f.pos.0);
                }
                d
            }
        };
        let id = self.decls[decl.0 as usize].func.expect("function decl");
        f.decl = Some(decl);
        f.func = Some(id);
        let Some(body) = &mut f.body else {
            return Ok(());
        };

        let info = &mut self.functions[id.index()];
        for h in &f.hints {
            if !info.hints.contains(h) {
                info.hints.push(*h);
            }
        }
        info.hints.sort();
        info.arity = f.params.len() as u32;
        info.parent = self.funcs.last().map(|c| c.id);

        self.funcs.push(FuncCtx { id, loop_depth: 0 });
        self.scopes.push(HashMap::new());
        let mut r = Ok(());
        for p in &mut f.params {
            if self.scopes.last().expect("scope").contains_key(&p.name) {
                r = Err(err(p.pos, format!("duplicate parameter `{}`", p.name)));
                break;
            }
            p.decl = Some(self.declare(&p.name, DeclKind::Param, p.pos.0));
        }
        if r.is_ok() {
            r = body.iter_mut().try_for_each(|s| self.stmt(s));
        }
        self.scopes.pop();
        self.funcs.pop();
        r
    }
}

/// Binds every identifier to its declaration and assigns frame and global
/// slots. Fails on undeclared names, use before declaration, assignment to a
/// `val`, capture of an enclosing function's locals, undefined forward
/// declarations, and `break`/`continue` outside loops.
pub fn resolve_scopes(mut program: Program) -> Result<Resolved, CompileError> {
    let mut r = Resolver {
        decls: Vec::new(),
        functions: Vec::new(),
        globals: Vec::new(),
        scopes: vec![HashMap::new()],
        funcs: Vec::new(),
        pending: HashMap::new(),
    };
    let main = r.new_function(MAIN_NAME, &[], None);
    r.funcs.push(FuncCtx {
        id: main,
        loop_depth: 0,
    });
    let argv = r.declare("argv", DeclKind::GlobalVal, Pos::new(0, 0));
    debug_assert_eq!(r.decls[argv.0 as usize].slot, global_slot(ARGV_GLOBAL));

    for s in &mut program.body {
        r.stmt(s)?;
    }
    if let Some((d, pos)) = r.pending.iter().min_by_key(|(_, p)| **p) {
        let name = &r.decls[d.0 as usize].name;
        return Err(err(
            *pos,
            format!("function `{name}` is declared but never defined"),
        ));
    }
    Ok(Resolved {
        program,
        decls: r.decls,
        functions: r.functions,
        globals: r.globals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_program, tokenize};

    fn resolve(src: &str) -> Result<Resolved, CompileError> {
        resolve_scopes(parse_program(&tokenize(src)?)?)
    }

    #[test]
    fn sieve_names_become_globals() {
        let r = resolve(crate::frontend::parser::tests::SIEVE).unwrap();
        let names: Vec<_> = r.globals.iter().map(String::as_str).collect();
        assert_eq!(
            names,
            ["argv", "SieveSize", "i", "prime", "k", "count", "flags"]
        );
        for (g, name) in names.iter().enumerate() {
            let d = r.decls.iter().find(|d| d.name == *name).unwrap();
            assert_eq!(d.slot, global_slot(g as u32));
        }
        assert_eq!(r.functions.len(), 1);
    }

    #[test]
    fn assignment_to_val_rejected() {
        let e = resolve("val x=1; x=2;").unwrap_err();
        assert!(e.to_string().contains("cannot assign to `val x`"), "{e}");
    }

    #[test]
    fn use_before_declaration_rejected() {
        let e = resolve("putln(y); var y;").unwrap_err();
        assert!(e.to_string().contains("undeclared identifier `y`"), "{e}");
    }

    #[test]
    fn forward_declaration_unifies() {
        let r = resolve("fun f; fun g(i){return f(i);} fun f(i){return i;}").unwrap();
        let Stmt::Fun(g) = &r.program.body[1] else {
            panic!()
        };
        let Some(body) = &g.body else { panic!() };
        let Stmt::Return(Some(Expr::Call { callee, .. }), _) = &body[0] else {
            panic!()
        };
        let Expr::Ident(Ident {
            binding: Some(Binding::Decl(d)),
            ..
        }) = &**callee
        else {
            panic!()
        };
        let Stmt::Fun(f) = &r.program.body[2] else {
            panic!()
        };
        assert_eq!(Some(*d), f.decl);
        assert_eq!(r.functions.len(), 3);
    }

    #[test]
    fn undefined_forward_declaration() {
        assert!(resolve("fun f; f();")
            .unwrap_err()
            .to_string()
            .contains("never defined"));
    }

    #[test]
    fn outer_local_capture_rejected() {
        let e = resolve("fun f(a) { fun g() { return a; } return g(); }").unwrap_err();
        assert!(e.to_string().contains("enclosing function"), "{e}");
        // Globals and function names are fine.
        resolve("var G = 1; fun f(a) { fun g() { return G; } return g(); }").unwrap();
    }

    #[test]
    fn break_outside_loop() {
        assert!(resolve("break;").is_err());
        assert!(resolve("while (1) { fun f() { break; } }").is_err());
        resolve("while (1) { if (1) break; }").unwrap();
    }

    #[test]
    fn slot_order_params_then_locals() {
        let r = resolve("fun f(a, b) { var x; { var y; } var z; return a; }").unwrap();
        let f = &r.functions[1];
        assert_eq!(f.arity, 2);
        let v: Vec<_> = f.vdecls.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        assert_eq!(v, [("a", 0), ("b", 1), ("x", 2), ("y", 3), ("z", 4)]);
    }

    #[test]
    fn builtins_only_as_callees() {
        resolve("putln(1);").unwrap();
        assert!(resolve("var p = putln;").is_err());
        // A user declaration shadows the builtin.
        resolve("fun putln(x) { return x; } var p = putln;").unwrap();
    }

    #[test]
    fn deterministic() {
        let a = resolve(crate::frontend::parser::tests::SIEVE).unwrap();
        let b = resolve(crate::frontend::parser::tests::SIEVE).unwrap();
        assert_eq!(a.decls, b.decls);
    }

    #[test]
    fn every_ident_bound_and_decl_reachable() {
        let src = "var a = 1; fun f(x) { var y = x + a; return y; } putln(f(a));";
        let r = resolve(src).unwrap();
        let mut bound = Vec::new();
        crate::frontend::visit_idents(&r.program, &mut |id| bound.push(id.binding));
        assert!(bound.iter().all(Option::is_some));
        // All user declarations (not the predeclared argv) are referenced.
        let used: std::collections::HashSet<_> = bound
            .iter()
            .filter_map(|b| match b {
                Some(Binding::Decl(d)) => Some(*d),
                _ => None,
            })
            .collect();
        for d in &r.decls[1..] {
            assert!(
                used.contains(&d.decl) || d.kind == DeclKind::Function,
                "{} unused",
                d.name
            );
        }
    }
}
