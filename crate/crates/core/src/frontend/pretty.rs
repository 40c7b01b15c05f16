//! Source printer. Binary and unary expressions are fully parenthesized so
//! printing and re-parsing reproduces the same tree.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.body {
        stmt(&mut out, s, 0);
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::Var { .. } | Stmt::Assign { .. } | Stmt::OpAssign { .. } | Stmt::Expr(_) => {
            simple(out, s);
            out.push_str(";\n");
        }
        Stmt::Fun(f) => {
            for h in &f.hints {
                let _ = writeln!(out, "!{}", h.name());
                indent(out, depth);
            }
            let _ = write!(out, "fun {}", f.name);
            match &f.body {
                None => out.push_str(";\n"),
                Some(body) => {
                    let names: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
                    let _ = writeln!(out, "({}) {{", names.join(", "));
                    for s in body {
                        stmt(out, s, depth + 1);
                    }
                    indent(out, depth);
                    out.push_str("}\n");
                }
            }
        }
        Stmt::If {
            cond, then, els, ..
        } => {
            out.push_str("if (");
            expr(out, cond);
            out.push_str(")\n");
            stmt(out, then, depth + 1);
            if let Some(e) = els {
                indent(out, depth);
                out.push_str("else\n");
                stmt(out, e, depth + 1);
            }
        }
        Stmt::For {
            init,
            cond,
            update,
            body,
            ..
        } => {
            out.push_str("for (");
            if let Some(i) = init {
                simple(out, i);
            }
            out.push_str("; ");
            if let Some(c) = cond {
                expr(out, c);
            }
            out.push_str("; ");
            if let Some(u) = update {
                simple(out, u);
            }
            out.push_str(")\n");
            stmt(out, body, depth + 1);
        }
        Stmt::While { cond, body, .. } => {
            out.push_str("while (");
            expr(out, cond);
            out.push_str(")\n");
            stmt(out, body, depth + 1);
        }
        Stmt::Break(_) => out.push_str("break;\n"),
        Stmt::Continue(_) => out.push_str("continue;\n"),
        Stmt::Return(v, _) => {
            out.push_str("return");
            if let Some(v) = v {
                out.push(' ');
                expr(out, v);
            }
            out.push_str(";\n");
        }
        Stmt::Block(body, _) => {
            out.push_str("{\n");
            for s in body {
                stmt(out, s, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

fn simple(out: &mut String, s: &Stmt) {
    match s {
        Stmt::Var { is_val, decls, .. } => {
            out.push_str(if *is_val { "val " } else { "var " });
            for (i, d) in decls.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&d.name);
                if let Some(init) = &d.init {
                    out.push_str(" = ");
                    expr(out, init);
                }
            }
        }
        Stmt::Assign { target, value, .. } => {
            expr(out, target);
            out.push_str(" = ");
            expr(out, value);
        }
        Stmt::OpAssign {
            target, op, value, ..
        } => {
            expr(out, target);
            let _ = write!(out, " {}= ", op.symbol());
            expr(out, value);
        }
        Stmt::Expr(e) => expr(out, e),
        other => unreachable!("not a simple statement: {other:?}"),
    }
}

fn expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(v, _) => {
            let _ = write!(out, "{v}");
        }
        Expr::Float(v, _) => {
            // `{:e}` always round-trips and always lexes as a float literal.
            let _ = write!(out, "{v:e}");
        }
        Expr::Str(s, _) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    '\0' => out.push_str("\\0"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        Expr::Nil(_) => out.push_str("nil"),
        Expr::Ident(id) => out.push_str(&id.name),
        Expr::Binary { op, lhs, rhs, .. } => {
            out.push('(');
            expr(out, lhs);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, rhs);
            out.push(')');
        }
        Expr::Unary { op, operand, .. } => {
            out.push('(');
            out.push_str(match op {
                UnOp::Neg => "- ",
                UnOp::Not => "!",
            });
            expr(out, operand);
            out.push(')');
        }
        Expr::Ternary {
            cond, then, els, ..
        } => {
            out.push('(');
            expr(out, cond);
            out.push_str(" ? ");
            expr(out, then);
            out.push_str(" : ");
            expr(out, els);
            out.push(')');
        }
        Expr::Call { callee, args, .. } => {
            expr(out, callee);
            out.push('(');
            list(out, args);
            out.push(')');
        }
        Expr::Index { base, index, .. } => {
            expr(out, base);
            out.push('[');
            expr(out, index);
            out.push(']');
        }
        Expr::Array(elems, _) => {
            out.push('[');
            list(out, elems);
            out.push(']');
        }
        Expr::Fill { size, init, .. } => {
            out.push('[');
            expr(out, size);
            out.push_str(" : ");
            expr(out, init);
            out.push(']');
        }
        Expr::Table(pairs, _) => {
            out.push_str("tab [");
            for (i, (k, v)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, k);
                out.push_str(" : ");
                expr(out, v);
            }
            out.push(']');
        }
    }
}

fn list(out: &mut String, es: &[Expr]) {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, e);
    }
}
