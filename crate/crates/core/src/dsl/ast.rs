use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of a statement, unique within its [`SourceUnit`].
///
/// Ids are assigned in pre-order over the unit's items in source order, so
/// two parses of the same text always agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Subject,
    Testsuite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub path: String,
    pub kind: UnitKind,
    pub functions: Vec<FunctionDef>,
    pub tests: Vec<TestCase>,
    /// Lint findings that were downgraded to warnings by parse options.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Statement>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub name: String,
    pub body: Vec<Statement>,
    /// Assertion statements of `body`, in source order.
    pub assertion_ids: Vec<StatementId>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub id: StatementId,
    pub line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let {
        name: String,
        value: Expr,
    },
    Assign {
        name: String,
        value: Expr,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then_block: Vec<Statement>,
        else_block: Vec<Statement>,
    },
    While {
        cond: Expr,
        body: Vec<Statement>,
        bound: u32,
    },
    Return(Expr),
    AssertEq {
        expected: Expr,
        actual: Expr,
        tol: Option<f64>,
        /// Display marker produced by the Trycatch rewrite: a failure is
        /// collected instead of aborting the test.
        guarded: bool,
    },
    AssertTrue {
        cond: Expr,
        guarded: bool,
    },
    /// Trailing marker of a Trycatch-rewritten test: fail with the first
    /// collected assertion failure, if any.
    RethrowFirst,
}

impl StmtKind {
    pub fn is_assertion(&self) -> bool {
        matches!(self, StmtKind::AssertEq { .. } | StmtKind::AssertTrue { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter. All levels are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Call(name.into(), args)
    }

    /// Integer literal in the form the parser produces (negatives as unary minus).
    pub fn int(n: i64) -> Expr {
        if n < 0 {
            Expr::Unary(UnOp::Neg, Box::new(Expr::Int(n.unsigned_abs() as i64)))
        } else {
            Expr::Int(n)
        }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    /// Visits every variable read by this expression, in evaluation order.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Var(name) => f(name),
            Expr::Unary(_, e) => e.for_each_var(f),
            Expr::Binary(_, l, r) => {
                l.for_each_var(f);
                r.for_each_var(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
            Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) => {}
        }
    }

    pub fn for_each_call<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a [Expr])) {
        match self {
            Expr::Call(name, args) => {
                f(name, args);
                args.iter().for_each(|a| a.for_each_call(f));
            }
            Expr::Unary(_, e) => e.for_each_call(f),
            Expr::Binary(_, l, r) => {
                l.for_each_call(f);
                r.for_each_call(f);
            }
            _ => {}
        }
    }

    pub fn contains_call(&self) -> bool {
        let mut found = false;
        self.for_each_call(&mut |_, _| found = true);
        found
    }
}

impl Statement {
    /// Expressions evaluated directly by this statement (not by nested blocks).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => vec![value],
            StmtKind::Expr(e) | StmtKind::Return(e) => vec![e],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::AssertEq {
                expected, actual, ..
            } => vec![expected, actual],
            StmtKind::AssertTrue { cond, .. } => vec![cond],
            StmtKind::RethrowFirst => vec![],
        }
    }

    /// Nested blocks of a compound statement.
    pub fn blocks(&self) -> Vec<&[Statement]> {
        match &self.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => vec![then_block, else_block],
            StmtKind::While { body, .. } => vec![body],
            _ => vec![],
        }
    }

    pub fn defined_var(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::Let { name, .. } | StmtKind::Assign { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Structural equality: ignores statement ids and line numbers.
    pub fn same_shape(&self, other: &Statement) -> bool {
        use StmtKind::*;
        match (&self.kind, &other.kind) {
            (
                If {
                    cond: c1,
                    then_block: t1,
                    else_block: e1,
                },
                If {
                    cond: c2,
                    then_block: t2,
                    else_block: e2,
                },
            ) => c1 == c2 && blocks_same_shape(t1, t2) && blocks_same_shape(e1, e2),
            (
                While {
                    cond: c1,
                    body: b1,
                    bound: n1,
                },
                While {
                    cond: c2,
                    body: b2,
                    bound: n2,
                },
            ) => c1 == c2 && n1 == n2 && blocks_same_shape(b1, b2),
            (a, b) => a == b,
        }
    }
}

pub fn blocks_same_shape(a: &[Statement], b: &[Statement]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
}

/// Pre-order walk over a block and all nested blocks.
pub fn walk_statements<'a>(block: &'a [Statement], f: &mut impl FnMut(&'a Statement)) {
    for stmt in block {
        f(stmt);
        for inner in stmt.blocks() {
            walk_statements(inner, f);
        }
    }
}

pub fn count_statements(block: &[Statement]) -> usize {
    let mut n = 0;
    walk_statements(block, &mut |_| n += 1);
    n
}

impl FunctionDef {
    pub fn same_shape(&self, other: &FunctionDef) -> bool {
        self.name == other.name
            && self.params == other.params
            && blocks_same_shape(&self.body, &other.body)
    }
}

impl TestCase {
    pub fn same_shape(&self, other: &TestCase) -> bool {
        self.name == other.name && blocks_same_shape(&self.body, &other.body)
    }

    pub fn assertion_count(&self) -> usize {
        self.assertion_ids.len()
    }

    /// 1-based ordinal of an assertion statement.
    pub fn assertion_ordinal(&self, id: StatementId) -> Option<usize> {
        self.assertion_ids.iter().position(|a| *a == id).map(|p| p + 1)
    }

    pub fn statement_count(&self) -> usize {
        count_statements(&self.body)
    }

    pub fn recompute_assertions(&mut self) {
        self.assertion_ids = self
            .body
            .iter()
            .filter(|s| s.kind.is_assertion())
            .map(|s| s.id)
            .collect();
    }
}

impl SourceUnit {
    pub fn empty(path: impl Into<String>, kind: UnitKind) -> Self {
        SourceUnit {
            path: path.into(),
            kind,
            functions: Vec::new(),
            tests: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn test(&self, name: &str) -> Option<&TestCase> {
        self.tests.iter().find(|t| t.name == name)
    }

    pub fn same_shape(&self, other: &SourceUnit) -> bool {
        self.kind == other.kind
            && self.functions.len() == other.functions.len()
            && self.tests.len() == other.tests.len()
            && self
                .functions
                .iter()
                .zip(&other.functions)
                .all(|(a, b)| a.same_shape(b))
            && self
                .tests
                .iter()
                .zip(&other.tests)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn all_statements(&self) -> Vec<&Statement> {
        let mut out = Vec::new();
        for f in &self.functions {
            walk_statements(&f.body, &mut |s| out.push(s));
        }
        for t in &self.tests {
            walk_statements(&t.body, &mut |s| out.push(s));
        }
        out
    }

    pub fn statement(&self, id: StatementId) -> Option<&Statement> {
        self.all_statements().into_iter().find(|s| s.id == id)
    }

    /// Reassigns statement ids in pre-order, the same order the parser uses.
    pub fn renumber(&mut self) {
        fn block(stmts: &mut [Statement], next: &mut u32) {
            for s in stmts {
                s.id = StatementId(*next);
                *next += 1;
                match &mut s.kind {
                    StmtKind::If {
                        then_block,
                        else_block,
                        ..
                    } => {
                        block(then_block, next);
                        block(else_block, next);
                    }
                    StmtKind::While { body, .. } => block(body, next),
                    _ => {}
                }
            }
        }
        let mut next = 0;
        for f in &mut self.functions {
            block(&mut f.body, &mut next);
        }
        for t in &mut self.tests {
            block(&mut t.body, &mut next);
            t.recompute_assertions();
        }
    }
}
