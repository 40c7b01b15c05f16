use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::{CompileError, Pos};

struct Parser<'t> {
    toks: &'t [Token],
    i: usize,
    warnings: Vec<String>,
}

type PResult<T> = Result<T, CompileError>;

impl<'t> Parser<'t> {
    fn peek(&self) -> &Token {
        &self.toks[self.i.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.i + k).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.i.min(self.toks.len() - 1)];
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn at_op(&self, text: &str) -> bool {
        self.peek().is(TokenKind::Operator, text)
    }

    fn at_punct(&self, text: &str) -> bool {
        self.peek().is(TokenKind::Punct, text)
    }

    fn at_kw(&self, text: &str) -> bool {
        self.peek().is(TokenKind::Keyword, text)
    }

    fn eat_op(&mut self, text: &str) -> bool {
        let hit = self.at_op(text);
        if hit {
            self.bump();
        }
        hit
    }

    fn eat_punct(&mut self, text: &str) -> bool {
        let hit = self.at_punct(text);
        if hit {
            self.bump();
        }
        hit
    }

    fn error_here(&self, expected: &str) -> CompileError {
        let t = self.peek();
        CompileError::Parse {
            pos: t.pos(),
            message: format!("expected {expected}, found {t}"),
        }
    }

    fn expect_punct(&mut self, text: &str) -> PResult<Pos> {
        if self.at_punct(text) {
            Ok(self.bump().pos())
        } else {
            Err(self.error_here(&format!("`{text}`")))
        }
    }

    fn expect_op(&mut self, text: &str) -> PResult<Pos> {
        if self.at_op(text) {
            Ok(self.bump().pos())
        } else {
            Err(self.error_here(&format!("`{text}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Pos)> {
        if self.peek().kind == TokenKind::Ident {
            let t = self.bump();
            Ok((t.text.clone(), t.pos()))
        } else {
            Err(self.error_here("identifier"))
        }
    }

    /// `!inline`, `!pure`, `!jit` lines are hints only when a `fun` follows
    /// them; otherwise `!` starts an ordinary expression statement.
    fn hint_run_len(&self) -> Option<usize> {
        let mut k = 0;
        while self.peek_at(k).is(TokenKind::Operator, "!") {
            let name = self.peek_at(k + 1);
            if name.kind != TokenKind::Ident || Hint::from_name(&name.text).is_none() {
                return None;
            }
            k += 2;
        }
        (k > 0 && self.peek_at(k).is(TokenKind::Keyword, "fun")).then_some(k / 2)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        if let Some(n) = self.hint_run_len() {
            let mut hints = Vec::new();
            for _ in 0..n {
                self.bump();
                let t = self.bump();
                let (line, col) = (t.line, t.col);
                let hint = Hint::from_name(&t.text).expect("checked by hint_run_len");
                if hint == Hint::Jit {
                    self.warnings.push(format!(
                        "{line}:{col}: warning: `!jit` hint ignored (no JIT in this interpreter)"
                    ));
                }
                if !hints.contains(&hint) {
                    hints.push(hint);
                }
            }
            return self.fun_decl(hints);
        }
        let t = self.peek().clone();
        match (t.kind, t.text.as_str()) {
            (TokenKind::Keyword, "fun") => self.fun_decl(Vec::new()),
            (TokenKind::Keyword, "var") | (TokenKind::Keyword, "val") => {
                let s = self.var_decl()?;
                self.expect_punct(";")?;
                Ok(s)
            }
            (TokenKind::Keyword, "if") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then = Box::new(self.statement()?);
                let els = if self.at_kw("else") {
                    self.bump();
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                Ok(Stmt::If {
                    cond,
                    then,
                    els,
                    pos: t.pos().into(),
                })
            }
            (TokenKind::Keyword, "while") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = Box::new(self.statement()?);
                Ok(Stmt::While {
                    cond,
                    body,
                    pos: t.pos().into(),
                })
            }
            (TokenKind::Keyword, "for") => {
                self.bump();
                self.expect_punct("(")?;
                let init = if self.at_punct(";") {
                    None
                } else {
                    Some(Box::new(self.simple()?))
                };
                self.expect_punct(";")?;
                let cond = if self.at_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                let update = if self.at_punct(")") {
                    None
                } else {
                    Some(Box::new(self.simple()?))
                };
                self.expect_punct(")")?;
                let body = Box::new(self.statement()?);
                Ok(Stmt::For {
                    init,
                    cond,
                    update,
                    body,
                    pos: t.pos().into(),
                })
            }
            (TokenKind::Keyword, "break") => {
                self.bump();
                self.expect_punct(";")?;
                Ok(Stmt::Break(t.pos().into()))
            }
            (TokenKind::Keyword, "continue") => {
                self.bump();
                self.expect_punct(";")?;
                Ok(Stmt::Continue(t.pos().into()))
            }
            (TokenKind::Keyword, "return") => {
                self.bump();
                let value = if self.at_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                Ok(Stmt::Return(value, t.pos().into()))
            }
            (TokenKind::Punct, "{") => self.block_stmt(),
            (TokenKind::Punct, ";") => {
                self.bump();
                Ok(Stmt::Block(Vec::new(), t.pos().into()))
            }
            _ => {
                let s = self.simple()?;
                self.expect_punct(";")?;
                Ok(s)
            }
        }
    }

    fn block_stmt(&mut self) -> PResult<Stmt> {
        let pos = self.expect_punct("{")?;
        let body = self.block_body()?;
        Ok(Stmt::Block(body, pos.into()))
    }

    fn block_body(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while !self.at_punct("}") {
            if self.peek().kind == TokenKind::Eof {
                return Err(self.error_here("`}`"));
            }
            out.push(self.statement()?);
        }
        self.bump();
        Ok(out)
    }

    fn fun_decl(&mut self, hints: Vec<Hint>) -> PResult<Stmt> {
        let pos = self.bump().pos();
        let (name, _) = self.expect_ident()?;
        if self.eat_punct(";") {
            return Ok(Stmt::Fun(FunDecl {
                name,
                params: Vec::new(),
                body: None,
                hints,
                pos: pos.into(),
                decl: None,
                func: None,
            }));
        }
        let mut params = Vec::new();
        if self.eat_punct("(") {
            if !self.at_punct(")") {
                loop {
                    let (pname, ppos) = self.expect_ident()?;
                    params.push(Param {
                        name: pname,
                        pos: ppos.into(),
                        decl: None,
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct("{")?;
        let body = self.block_body()?;
        Ok(Stmt::Fun(FunDecl {
            name,
            params,
            body: Some(body),
            hints,
            pos: pos.into(),
            decl: None,
            func: None,
        }))
    }

    fn var_decl(&mut self) -> PResult<Stmt> {
        let kw = self.bump();
        let is_val = kw.text == "val";
        let pos = kw.pos();
        let mut decls = Vec::new();
        loop {
            let (name, npos) = self.expect_ident()?;
            let init = if self.eat_op("=") {
                Some(self.expr()?)
            } else if is_val {
                return Err(CompileError::Parse {
                    pos: npos,
                    message: format!("`val {name}` requires an initializer"),
                });
            } else {
                None
            };
            decls.push(VarDecl {
                name,
                init,
                pos: npos.into(),
                decl: None,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(Stmt::Var {
            is_val,
            decls,
            pos: pos.into(),
        })
    }

    /// Assignment, compound assignment, `++`/`--`, or a bare expression.
    fn simple(&mut self) -> PResult<Stmt> {
        let lhs = self.expr()?;
        let pos = lhs.pos();
        let t = self.peek().clone();
        if t.kind != TokenKind::Operator {
            return Ok(Stmt::Expr(lhs));
        }
        let op = match t.text.as_str() {
            "=" => None,
            "+=" | "++" => Some(BinOp::Add),
            "-=" | "--" => Some(BinOp::Sub),
            "*=" => Some(BinOp::Mul),
            "/=" => Some(BinOp::Div),
            "%=" => Some(BinOp::Mod),
            _ => return Ok(Stmt::Expr(lhs)),
        };
        if !matches!(lhs, Expr::Ident(_) | Expr::Index { .. }) {
            return Err(CompileError::Parse {
                pos: t.pos(),
                message: format!("invalid assignment target before `{}`", t.text),
            });
        }
        self.bump();
        let value = if t.text == "++" || t.text == "--" {
            Expr::Int(1, t.pos().into())
        } else {
            self.expr()?
        };
        Ok(match op {
            None => Stmt::Assign {
                target: lhs,
                value,
                pos: pos.into(),
            },
            Some(op) => Stmt::OpAssign {
                target: lhs,
                op,
                value,
                pos: pos.into(),
            },
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.at_op("?") {
            let pos = self.bump().pos();
            let then = self.expr()?;
            self.expect_op(":")?;
            let els = self.expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
                pos: pos.into(),
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(&str, BinOp)]] = &[
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("==", BinOp::Eq), ("!=", BinOp::Ne)],
            &[
                ("<", BinOp::Lt),
                ("<=", BinOp::Le),
                (">", BinOp::Gt),
                (">=", BinOp::Ge),
            ],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Mod)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let t = self.peek();
            if t.kind != TokenKind::Operator {
                return Ok(lhs);
            }
            let Some(&(_, op)) = LEVELS[level].iter().find(|(s, _)| *s == t.text) else {
                return Ok(lhs);
            };
            let pos = self.bump().pos();
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos: pos.into(),
            };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.at_op("-") {
            let pos = self.bump().pos();
            // Negative literals fold here so `-9223372036854775808` stays
            // out of reach only through the lexer, and `-1` costs no `neg`.
            let t = self.peek().clone();
            match t.kind {
                TokenKind::IntLit => {
                    self.bump();
                    let v: i64 = t.text.parse().expect("validated by lexer");
                    return self.postfix(Expr::Int(v.wrapping_neg(), pos.into()));
                }
                TokenKind::FloatLit => {
                    self.bump();
                    let v: f64 = t.text.parse().expect("validated by lexer");
                    return self.postfix(Expr::Float(-v, pos.into()));
                }
                _ => {}
            }
            let operand = self.unary()?;
            return Ok(Expr::Unary {
                op: UnOp::Neg,
                operand: Box::new(operand),
                pos: pos.into(),
            });
        }
        if self.at_op("!") {
            let pos = self.bump().pos();
            let operand = self.unary()?;
            return Ok(Expr::Unary {
                op: UnOp::Not,
                operand: Box::new(operand),
                pos: pos.into(),
            });
        }
        let p = self.primary()?;
        self.postfix(p)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            if self.at_punct("(") {
                let pos = self.bump().pos();
                let args = self.expr_list(")")?;
                e = Expr::Call {
                    callee: Box::new(e),
                    args,
                    pos: pos.into(),
                };
            } else if self.at_punct("[") {
                let pos = self.bump().pos();
                let index = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::Index {
                    base: Box::new(e),
                    index: Box::new(index),
                    pos: pos.into(),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn expr_list(&mut self, close: &str) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        if self.eat_punct(close) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_punct(close) {
                return Ok(out);
            }
            self.expect_punct(",")?;
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        let pos: At = t.pos().into();
        match t.kind {
            TokenKind::IntLit => {
                self.bump();
                Ok(Expr::Int(t.text.parse().expect("validated by lexer"), pos))
            }
            TokenKind::FloatLit => {
                self.bump();
                Ok(Expr::Float(
                    t.text.parse().expect("validated by lexer"),
                    pos,
                ))
            }
            TokenKind::StrLit => {
                self.bump();
                Ok(Expr::Str(t.text, pos))
            }
            TokenKind::Ident => {
                self.bump();
                Ok(Expr::Ident(Ident {
                    name: t.text,
                    pos,
                    binding: None,
                }))
            }
            TokenKind::Keyword if t.text == "nil" => {
                self.bump();
                Ok(Expr::Nil(pos))
            }
            TokenKind::Keyword if t.text == "tab" => {
                self.bump();
                self.expect_punct("[")?;
                let mut pairs = Vec::new();
                if !self.eat_punct("]") {
                    loop {
                        let k = self.expr()?;
                        self.expect_op(":")?;
                        let v = self.expr()?;
                        pairs.push((k, v));
                        if self.eat_punct("]") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                Ok(Expr::Table(pairs, pos))
            }
            TokenKind::Punct if t.text == "(" => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokenKind::Punct if t.text == "[" => {
                self.bump();
                if self.eat_punct("]") {
                    return Ok(Expr::Array(Vec::new(), pos));
                }
                let first = self.expr()?;
                if self.eat_op(":") {
                    let init = self.expr()?;
                    self.expect_punct("]")?;
                    return Ok(Expr::Fill {
                        size: Box::new(first),
                        init: Box::new(init),
                        pos,
                    });
                }
                let mut elems = vec![first];
                while self.eat_punct(",") {
                    elems.push(self.expr()?);
                }
                self.expect_punct("]")?;
                Ok(Expr::Array(elems, pos))
            }
            _ => Err(self.error_here("expression")),
        }
    }
}

/// Parses a token stream (as produced by `tokenize`) into a program.
/// The first syntax error aborts parsing.
pub fn parse_program(tokens: &[Token]) -> Result<Program, CompileError> {
    parse_program_with_warnings(tokens).map(|(p, _)| p)
}

/// Like [`parse_program`], also returning warnings such as ignored `!jit` hints.
pub fn parse_program_with_warnings(
    tokens: &[Token],
) -> Result<(Program, Vec<String>), CompileError> {
    assert!(
        tokens.last().is_some_and(|t| t.kind == TokenKind::Eof),
        "token list must end with eof"
    );
    let mut p = Parser {
        toks: tokens,
        i: 0,
        warnings: Vec::new(),
    };
    let mut body = Vec::new();
    while p.peek().kind != TokenKind::Eof {
        body.push(p.statement()?);
    }
    Ok((Program { body }, p.warnings))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::frontend::tokenize;

    fn parse(src: &str) -> PResult<Program> {
        parse_program(&tokenize(src)?)
    }

    pub(crate) const SIEVE: &str = "val SieveSize = 8191;
var i, prime, k, count = 0, flags = [SieveSize : 1];
for (i = 0; i < SieveSize; i++)
  if (flags[i]) {
    prime = i + i + 3;
    k = i + prime;
    for (;;) {
      if (k >= SieveSize)
        break;
      flags[k] = 0;
      k += prime;
    }
    count++;
  }
putln (count);
";

    #[test]
    fn sieve_shape() {
        let p = parse(SIEVE).unwrap();
        let decls = p
            .body
            .iter()
            .filter(|s| matches!(s, Stmt::Var { .. }))
            .count();
        let fors = p
            .body
            .iter()
            .filter(|s| matches!(s, Stmt::For { .. }))
            .count();
        assert_eq!((decls, fors), (2, 1));
        let Stmt::Var { decls, .. } = &p.body[1] else {
            panic!()
        };
        assert!(matches!(decls[4].init, Some(Expr::Fill { .. })));
    }

    #[test]
    fn missing_expression_points_at_semicolon() {
        match parse("x = ;") {
            Err(CompileError::Parse { pos, message }) => {
                assert_eq!(pos, Pos::new(1, 5));
                assert!(message.contains("expected expression"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn forward_declaration_parses() {
        let p = parse("fun f; fun g(i){return f(i);} fun f(i){return i;}").unwrap();
        assert_eq!(p.body.len(), 3);
        assert!(matches!(&p.body[0], Stmt::Fun(FunDecl { body: None, .. })));
    }

    #[test]
    fn hints_attach_to_following_fun() {
        let p = parse("!inline\n!pure\nfun sq(x) { return x * x; }\n!x;").unwrap();
        let Stmt::Fun(f) = &p.body[0] else { panic!() };
        assert_eq!(f.hints, vec![Hint::Inline, Hint::Pure]);
        assert!(matches!(
            p.body[1],
            Stmt::Expr(Expr::Unary { op: UnOp::Not, .. })
        ));
    }

    #[test]
    fn jit_hint_warns() {
        let (_, w) = parse_program_with_warnings(&tokenize("!jit fun f() {}").unwrap()).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn precedence_is_c_like() {
        let p = parse("x = 1 + 2 * 3 < 4 && 5 || 6;").unwrap();
        let Stmt::Assign { value, .. } = &p.body[0] else {
            panic!()
        };
        let Expr::Binary {
            op: BinOp::Or, lhs, ..
        } = value
        else {
            panic!("{value:?}")
        };
        let Expr::Binary {
            op: BinOp::And,
            lhs,
            ..
        } = &**lhs
        else {
            panic!()
        };
        let Expr::Binary {
            op: BinOp::Lt, lhs, ..
        } = &**lhs
        else {
            panic!()
        };
        assert!(matches!(&**lhs, Expr::Binary { op: BinOp::Add, .. }));
    }

    #[test]
    fn ternary_inside_fill_and_table() {
        let p = parse("x = [c ? 1 : 2 : 0]; t = tab [\"a\" : 1, 2 : [3]];").unwrap();
        let Stmt::Assign {
            value: Expr::Fill { size, .. },
            ..
        } = &p.body[0]
        else {
            panic!()
        };
        assert!(matches!(**size, Expr::Ternary { .. }));
        let Stmt::Assign {
            value: Expr::Table(pairs, _),
            ..
        } = &p.body[1]
        else {
            panic!()
        };
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn fun_without_param_list() {
        let p = parse("fun main { var n = 1; putln(n); } main ();").unwrap();
        let Stmt::Fun(f) = &p.body[0] else { panic!() };
        assert!(f.params.is_empty());
    }

    #[test]
    fn bad_assignment_target() {
        assert!(parse("1 = 2;").is_err());
        assert!(parse("f() += 2;").is_err());
    }

    #[test]
    fn val_needs_initializer() {
        assert!(parse("val x;").is_err());
    }

    #[test]
    fn unclosed_block() {
        assert!(parse("if (x) { y = 1;").is_err());
    }
}
