use std::collections::HashSet;

use super::ast::*;
use super::builtins;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Accept tests whose final statement is not an assertion, recording a
    /// warning instead of failing.
    pub allow_trailing_code: bool,
}

pub fn parse_unit(source: &str, kind: UnitKind) -> Result<SourceUnit, ParseError> {
    parse_unit_with(source, kind, "<input>", &ParseOptions::default())
}

pub fn parse_unit_with(
    source: &str,
    kind: UnitKind,
    path: &str,
    opts: &ParseOptions,
) -> Result<SourceUnit, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        next_id: 0,
    };
    let mut unit = SourceUnit::empty(path, kind);
    while p.peek() != &Tok::Eof {
        match p.peek() {
            Tok::Fn => unit.functions.push(p.function()?),
            Tok::Test => unit.tests.push(p.test()?),
            _ => return Err(p.unexpected("`fn` or `test`")),
        }
    }
    validate(&mut unit, opts)?;
    Ok(unit)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_id: u32,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn here(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let t = self.here();
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            message: format!("expected {wanted}, found {}", describe(&t.tok)),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn fresh_id(&mut self) -> StatementId {
        let id = StatementId(self.next_id);
        self.next_id += 1;
        id
    }

    fn function(&mut self) -> Result<FunctionDef, ParseError> {
        let line = self.expect(Tok::Fn, "`fn`")?.line;
        let name = self.ident()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident()?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;
        Ok(FunctionDef {
            name,
            params,
            body,
            line,
        })
    }

    fn test(&mut self) -> Result<TestCase, ParseError> {
        let line = self.expect(Tok::Test, "`test`")?.line;
        let name = self.ident()?;
        let body = self.block()?;
        let mut test = TestCase {
            name,
            body,
            assertion_ids: Vec::new(),
            line,
        };
        test.recompute_assertions();
        Ok(test)
    }

    fn block(&mut self) -> Result<Vec<Statement>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            out.push(self.statement()?);
        }
        self.advance();
        Ok(out)
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let line = self.here().line;
        let id = self.fresh_id();
        let kind = match self.peek().clone() {
            Tok::Let => {
                self.advance();
                let name = self.ident()?;
                self.expect(Tok::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Let { name, value }
            }
            Tok::Ident(name) if *self.peek_at(1) == Tok::Assign => {
                self.advance();
                self.advance();
                let value = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Assign { name, value }
            }
            Tok::If => return self.if_statement(id, line),
            Tok::While => {
                self.advance();
                let cond = self.expr()?;
                if *self.peek() != Tok::Bound {
                    return Err(ParseError::Structure {
                        line,
                        message: "unbounded loop: `while` requires `bound N`".into(),
                    });
                }
                self.advance();
                let bound = match self.peek().clone() {
                    Tok::Int(n) if n > 0 && n <= u32::MAX as i64 => {
                        self.advance();
                        n as u32
                    }
                    Tok::Int(_) => {
                        return Err(ParseError::Structure {
                            line,
                            message: "loop bound must be a positive integer".into(),
                        })
                    }
                    _ => return Err(self.unexpected("integer loop bound")),
                };
                let body = self.block()?;
                StmtKind::While { cond, body, bound }
            }
            Tok::Return => {
                self.advance();
                let value = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            Tok::Try => {
                self.advance();
                if !matches!(self.peek(), Tok::AssertEq | Tok::AssertTrue) {
                    return Err(self.unexpected("assertion after `try`"));
                }
                self.assertion(true)?
            }
            Tok::AssertEq | Tok::AssertTrue => self.assertion(false)?,
            Tok::RethrowFirst => {
                self.advance();
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::RethrowFirst
            }
            _ => {
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Statement { id, line, kind })
    }

    fn if_statement(&mut self, id: StatementId, line: u32) -> Result<Statement, ParseError> {
        self.expect(Tok::If, "`if`")?;
        let cond = self.expr()?;
        let then_block = self.block()?;
        let else_block = if *self.peek() == Tok::Else {
            self.advance();
            if *self.peek() == Tok::If {
                let nested_line = self.here().line;
                let nested_id = self.fresh_id();
                vec![self.if_statement(nested_id, nested_line)?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Statement {
            id,
            line,
            kind: StmtKind::If {
                cond,
                then_block,
                else_block,
            },
        })
    }

    fn assertion(&mut self, guarded: bool) -> Result<StmtKind, ParseError> {
        let head = self.advance();
        self.expect(Tok::LParen, "`(`")?;
        let kind = if head.tok == Tok::AssertEq {
            let expected = self.expr()?;
            self.expect(Tok::Comma, "`,`")?;
            let actual = self.expr()?;
            let tol = if *self.peek() == Tok::Comma {
                self.advance();
                let t = self.here().clone();
                let value = match t.tok {
                    Tok::Int(n) => n as f64,
                    Tok::Float(x) => x,
                    Tok::Minus => {
                        return Err(ParseError::Structure {
                            line: t.line,
                            message: "assertion tolerance must be non-negative".into(),
                        })
                    }
                    _ => return Err(self.unexpected("numeric tolerance literal")),
                };
                self.advance();
                Some(value)
            } else {
                None
            };
            StmtKind::AssertEq {
                expected,
                actual,
                tol,
                guarded,
            }
        } else {
            let cond = self.expr()?;
            StmtKind::AssertTrue { cond, guarded }
        };
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(kind)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = binop(self.peek()) {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.advance();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.advance();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Int(n))
            }
            Tok::Float(x) => {
                self.advance();
                Ok(Expr::Float(x))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::True => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::False => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    self.advance();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if *self.peek() == Tok::Comma {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn binop(tok: &Tok) -> Option<BinOp> {
    Some(match tok {
        Tok::Plus => BinOp::Add,
        Tok::Minus => BinOp::Sub,
        Tok::Star => BinOp::Mul,
        Tok::Slash => BinOp::Div,
        Tok::Percent => BinOp::Rem,
        Tok::Lt => BinOp::Lt,
        Tok::Le => BinOp::Le,
        Tok::Gt => BinOp::Gt,
        Tok::Ge => BinOp::Ge,
        Tok::EqEq => BinOp::Eq,
        Tok::Ne => BinOp::Ne,
        Tok::AndAnd => BinOp::And,
        Tok::OrOr => BinOp::Or,
        _ => return None,
    })
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(n) => format!("identifier `{n}`"),
        Tok::Int(n) => format!("integer `{n}`"),
        Tok::Float(x) => format!("number `{x}`"),
        Tok::Str(_) => "string literal".into(),
        Tok::Eof => "end of input".into(),
        other => format!("`{}`", token_text(other)),
    }
}

fn token_text(tok: &Tok) -> &'static str {
    match tok {
        Tok::Fn => "fn",
        Tok::Test => "test",
        Tok::Let => "let",
        Tok::If => "if",
        Tok::Else => "else",
        Tok::While => "while",
        Tok::Bound => "bound",
        Tok::Return => "return",
        Tok::True => "true",
        Tok::False => "false",
        Tok::AssertEq => "assert_eq",
        Tok::AssertTrue => "assert_true",
        Tok::Try => "try",
        Tok::RethrowFirst => "rethrow_first",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::Comma => ",",
        Tok::Semi => ";",
        Tok::Assign => "=",
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Percent => "%",
        Tok::Lt => "<",
        Tok::Le => "<=",
        Tok::Gt => ">",
        Tok::Ge => ">=",
        Tok::EqEq => "==",
        Tok::Ne => "!=",
        Tok::AndAnd => "&&",
        Tok::OrOr => "||",
        Tok::Bang => "!",
        _ => "?",
    }
}

fn structure(line: u32, message: impl Into<String>) -> ParseError {
    ParseError::Structure {
        line,
        message: message.into(),
    }
}

fn validate(unit: &mut SourceUnit, opts: &ParseOptions) -> Result<(), ParseError> {
    match unit.kind {
        UnitKind::Subject => {
            if let Some(t) = unit.tests.first() {
                return Err(structure(t.line, "test definitions are not allowed in a subject unit"));
            }
            let mut seen = HashSet::new();
            for f in &unit.functions {
                if !seen.insert(f.name.as_str()) {
                    return Err(structure(f.line, format!("duplicate function `{}`", f.name)));
                }
                if builtins::arity(&f.name).is_some() {
                    return Err(structure(
                        f.line,
                        format!("function `{}` shadows a builtin", f.name),
                    ));
                }
                let mut params = HashSet::new();
                for p in &f.params {
                    if !params.insert(p.as_str()) {
                        return Err(structure(
                            f.line,
                            format!("duplicate parameter `{p}` in `{}`", f.name),
                        ));
                    }
                }
                if f.body.is_empty() {
                    return Err(structure(f.line, format!("function `{}` has an empty body", f.name)));
                }
            }
            for f in &unit.functions {
                let mut err = None;
                walk_statements(&f.body, &mut |s| {
                    if err.is_some() {
                        return;
                    }
                    if s.kind.is_assertion() || s.kind == StmtKind::RethrowFirst {
                        err = Some(structure(s.line, "assertions are only allowed in test bodies"));
                        return;
                    }
                    for e in s.own_exprs() {
                        e.for_each_call(&mut |name, args| {
                            if err.is_some() {
                                return;
                            }
                            let arity = unit
                                .function(name)
                                .map(|g| g.params.len())
                                .or_else(|| builtins::arity(name));
                            match arity {
                                None => {
                                    err = Some(structure(
                                        s.line,
                                        format!("call to undefined function `{name}`"),
                                    ))
                                }
                                Some(n) if n != args.len() => {
                                    err = Some(structure(
                                        s.line,
                                        format!(
                                            "`{name}` expects {n} argument(s), got {}",
                                            args.len()
                                        ),
                                    ))
                                }
                                _ => {}
                            }
                        });
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
            }
        }
        UnitKind::Testsuite => {
            if let Some(f) = unit.functions.first() {
                return Err(structure(
                    f.line,
                    "function definitions are not allowed in a test suite",
                ));
            }
            let mut seen = HashSet::new();
            let mut warnings = Vec::new();
            for t in &unit.tests {
                if !seen.insert(t.name.as_str()) {
                    return Err(structure(t.line, format!("duplicate test `{}`", t.name)));
                }
                for s in &t.body {
                    for inner in s.blocks() {
                        let mut err = None;
                        walk_statements(inner, &mut |n| {
                            if err.is_none()
                                && (n.kind.is_assertion() || n.kind == StmtKind::RethrowFirst)
                            {
                                err = Some(structure(
                                    n.line,
                                    "assertions must appear at the top level of a test body",
                                ));
                            }
                        });
                        if let Some(e) = err {
                            return Err(e);
                        }
                    }
                }
                let mut ret = None;
                walk_statements(&t.body, &mut |n| {
                    if ret.is_none() && matches!(n.kind, StmtKind::Return(_)) {
                        ret = Some(n.line);
                    }
                });
                if let Some(line) = ret {
                    return Err(structure(line, "`return` is not allowed in a test body"));
                }
                let ends_with_assertion = t
                    .body
                    .last()
                    .map(|s| s.kind.is_assertion() || s.kind == StmtKind::RethrowFirst)
                    .unwrap_or(false);
                if !ends_with_assertion {
                    let msg = format!("test `{}` does not end with an assertion", t.name);
                    if opts.allow_trailing_code {
                        warnings.push(msg);
                    } else {
                        return Err(structure(t.line, msg));
                    }
                }
            }
            unit.warnings = warnings;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_function() {
        let u = parse_unit("fn id(x) { return x; }", UnitKind::Subject).unwrap();
        assert_eq!(u.functions.len(), 1);
        assert_eq!(u.all_statements().len(), 1);
        assert_eq!(u.functions[0].body[0].line, 1);
    }

    #[test]
    fn single_assertion_test() {
        let u = parse_unit("test t1 { assert_true(true); }", UnitKind::Testsuite).unwrap();
        assert_eq!(u.tests[0].assertion_ids.len(), 1);
    }

    #[test]
    fn precedence() {
        let u = parse_unit("fn f(a, b) { return a + b * 2 < 3 && !false; }", UnitKind::Subject)
            .unwrap();
        let StmtKind::Return(e) = &u.functions[0].body[0].kind else {
            panic!()
        };
        let Expr::Binary(BinOp::And, lhs, _) = e else {
            panic!("{e:?}")
        };
        let Expr::Binary(BinOp::Lt, sum, _) = lhs.as_ref() else {
            panic!()
        };
        assert!(matches!(sum.as_ref(), Expr::Binary(BinOp::Add, _, _)));
    }

    #[test]
    fn else_if_desugars_to_nested_if() {
        let src = "fn f(x) { if x < 0 { return 0; } else if x < 5 { return 1; } else { return 2; } }";
        let u = parse_unit(src, UnitKind::Subject).unwrap();
        let StmtKind::If { else_block, .. } = &u.functions[0].body[0].kind else {
            panic!()
        };
        assert_eq!(else_block.len(), 1);
        assert!(matches!(else_block[0].kind, StmtKind::If { .. }));
        assert_eq!(u.all_statements().len(), 5);
    }

    #[test]
    fn syntax_error_location() {
        let err = parse_unit("fn f(x) {\n  return x +;\n}", UnitKind::Subject).unwrap_err();
        match err {
            ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 13)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structure_errors() {
        let cases = [
            ("fn f(x) { assert_true(x); return x; }", UnitKind::Subject),
            ("fn f(x) { return x; } fn f(y) { return y; }", UnitKind::Subject),
            ("fn f(x, x) { return x; }", UnitKind::Subject),
            ("fn f(x) { while x < 3 { x = x + 1; } return x; }", UnitKind::Subject),
            ("fn f(x) { while x < 3 bound 0 { x = x + 1; } return x; }", UnitKind::Subject),
            ("fn f(x) { return g(x); }", UnitKind::Subject),
            ("fn f(x) { return abs(x, 1); }", UnitKind::Subject),
            ("fn abs(x) { return x; }", UnitKind::Subject),
            ("test a { assert_true(true); } test a { assert_true(true); }", UnitKind::Testsuite),
            ("test a { let x = 1; }", UnitKind::Testsuite),
            ("test a { if true { assert_true(true); } assert_true(true); }", UnitKind::Testsuite),
            ("test a { assert_eq(1, 1, -1); }", UnitKind::Testsuite),
            ("fn f(x) { return x; }", UnitKind::Testsuite),
        ];
        for (src, kind) in cases {
            let err = parse_unit(src, kind).unwrap_err();
            assert!(matches!(err, ParseError::Structure { .. }), "{src}: {err:?}");
        }
    }

    #[test]
    fn trailing_code_lint_is_overridable() {
        let src = "test a { assert_true(true); let x = 1; }";
        let opts = ParseOptions {
            allow_trailing_code: true,
        };
        let u = parse_unit_with(src, UnitKind::Testsuite, "a.tst", &opts).unwrap();
        assert_eq!(u.warnings.len(), 1);
    }

    #[test]
    fn ids_are_stable_and_preorder() {
        let src = "fn f(x) { if x { return 1; } else { return 2; } }\nfn g() { return 3; }";
        let a = parse_unit(src, UnitKind::Subject).unwrap();
        let b = parse_unit(src, UnitKind::Subject).unwrap();
        assert_eq!(a, b);
        let ids: Vec<u32> = a.all_statements().iter().map(|s| s.id.0).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }
}
