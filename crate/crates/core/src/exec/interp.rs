use std::collections::{BTreeSet, HashMap};

use crate::dsl::{
    builtins, walk_statements, BinOp, Expr, FunctionDef, SourceUnit, Statement, StatementId,
    StmtKind, TestCase,
};

use super::trace::*;
use super::value::{self, Value};
use super::ExecError;

pub const DEFAULT_FUEL: u64 = 1_000_000;
const MAX_CALL_DEPTH: usize = 128;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Upper bound on evaluated statements, test and subject combined.
    pub fuel: u64,
    /// After a runtime error in a top-level test statement, record it and
    /// continue with the next top-level statement. Used by the
    /// statement-deletion oracles; never by the three settings.
    pub continue_after_errors: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            fuel: DEFAULT_FUEL,
            continue_after_errors: false,
        }
    }
}

impl RunOptions {
    pub fn with_fuel(fuel: u64) -> Self {
        RunOptions {
            fuel,
            ..Default::default()
        }
    }
}

/// Checks that every call in `test` (and in the subject) resolves with the
/// right arity.
pub fn check_calls(subject: &SourceUnit, test: &TestCase) -> Result<(), ExecError> {
    let mut err = None;
    let mut visit = |s: &Statement, in_subject: bool| {
        for e in s.own_exprs() {
            e.for_each_call(&mut |name, args| {
                if err.is_some() {
                    return;
                }
                let arity = subject
                    .function(name)
                    .map(|f| f.params.len())
                    .or_else(|| builtins::arity(name));
                match arity {
                    None => {
                        err = Some(ExecError::MissingFunction {
                            name: name.to_string(),
                            statement: s.id,
                            line: s.line,
                            in_subject,
                        })
                    }
                    Some(n) if n != args.len() => {
                        err = Some(ExecError::ArityMismatch {
                            name: name.to_string(),
                            expected: n,
                            found: args.len(),
                            statement: s.id,
                            line: s.line,
                            in_subject,
                        })
                    }
                    _ => {}
                }
            });
        }
    };
    walk_statements(&test.body, &mut |s| visit(s, false));
    for f in &subject.functions {
        walk_statements(&f.body, &mut |s| visit(s, true));
    }
    err.map_or(Ok(()), Err)
}

pub fn run_test(
    subject: &SourceUnit,
    test: &TestCase,
    mode: ExecutionMode,
    fuel: u64,
) -> Result<ExecutionTrace, ExecError> {
    run_test_with(subject, test, mode, &RunOptions::with_fuel(fuel))
}

pub fn run_test_with(
    subject: &SourceUnit,
    test: &TestCase,
    mode: ExecutionMode,
    opts: &RunOptions,
) -> Result<ExecutionTrace, ExecError> {
    check_calls(subject, test)?;
    let mut m = Machine::new(subject, opts.fuel);
    let mut frame = Frame::default();
    let mut failures = Vec::new();
    let mut stop_at = None;

    for (idx, stmt) in test.body.iter().enumerate() {
        let test_location = Location {
            statement: stmt.id,
            line: stmt.line,
        };
        let ordinal = test.assertion_ordinal(stmt.id);
        let event = |kind, fault: Fault| FailureEvent {
            kind,
            location: fault.location,
            in_subject: fault.in_subject,
            test_location,
            test_index: idx + 1,
            assertion_ordinal: ordinal,
            message: fault.message,
            chain: fault.chain,
        };
        m.stack.clear();

        let result = match &stmt.kind {
            StmtKind::AssertEq { guarded, .. } | StmtKind::AssertTrue { guarded, .. } => {
                m.check_assertion(stmt, &mut frame).map(|r| (r, *guarded))
            }
            StmtKind::RethrowFirst => {
                m.enter(stmt, false).map(|_| {
                    m.leave();
                    (None, false)
                })
            }
            _ => m.exec_stmt(stmt, &mut frame, false).map(|_| (None, false)),
        };

        match result {
            Ok((None, _)) => {
                if stmt.kind == StmtKind::RethrowFirst
                    && failures
                        .iter()
                        .any(|f: &FailureEvent| f.kind == FailureKind::AssertionFailure)
                {
                    stop_at = Some(idx);
                    break;
                }
            }
            Ok((Some(message), guarded)) => {
                let fault = Fault {
                    location: test_location,
                    in_subject: false,
                    message,
                    chain: vec![test_location],
                };
                failures.push(event(FailureKind::AssertionFailure, fault));
                if mode == ExecutionMode::Original && !guarded {
                    stop_at = Some(idx);
                    break;
                }
            }
            Err(fault) => {
                failures.push(event(FailureKind::RuntimeError, fault));
                if !opts.continue_after_errors {
                    stop_at = Some(idx);
                    break;
                }
            }
        }
    }

    let mut skipped_test = BTreeSet::new();
    if let Some(i) = stop_at {
        walk_statements(&test.body[i + 1..], &mut |s| {
            skipped_test.insert(s.id);
        });
    }
    let outcome = if failures.is_empty() {
        Outcome::Passed
    } else {
        Outcome::Failed
    };
    Ok(ExecutionTrace {
        test_name: test.name.clone(),
        outcome,
        failures,
        covered_subject: m.covered_subject,
        covered_subject_branches: m.branches,
        covered_test: m.covered_test,
        skipped_test,
        test_statement_count: test.statement_count(),
        top_level_count: test.body.len(),
        assertion_count: test.assertion_count(),
    })
}

/// Calls a subject function directly with argument values. Used by the
/// corpus generator to compute expected values from the correct program.
pub fn call_function(
    subject: &SourceUnit,
    name: &str,
    args: Vec<Value>,
    fuel: u64,
) -> Result<Value, String> {
    let mut m = Machine::new(subject, fuel);
    m.call(name, args).map_err(|f| f.message)
}

/// The trace recorded when a test cannot start because it references a
/// missing function.
pub fn trace_for_error(test: &TestCase, err: &ExecError) -> ExecutionTrace {
    let (statement, line, in_subject) = err.location();
    let idx = if in_subject {
        None
    } else {
        test.body.iter().position(|s| {
            let mut hit = false;
            walk_statements(std::slice::from_ref(s), &mut |n| hit |= n.id == statement);
            hit
        })
    }
    .unwrap_or(0);
    let test_location = test
        .body
        .get(idx)
        .map(|s| Location {
            statement: s.id,
            line: s.line,
        })
        .unwrap_or(Location { statement, line });
    let location = Location { statement, line };
    let mut skipped_test = BTreeSet::new();
    walk_statements(&test.body, &mut |s| {
        skipped_test.insert(s.id);
    });
    ExecutionTrace {
        test_name: test.name.clone(),
        outcome: Outcome::Failed,
        failures: vec![FailureEvent {
            kind: FailureKind::RuntimeError,
            location,
            in_subject,
            test_location,
            test_index: idx + 1,
            assertion_ordinal: test.assertion_ordinal(test_location.statement),
            message: err.to_string(),
            chain: vec![location],
        }],
        covered_subject: BTreeSet::new(),
        covered_subject_branches: BTreeSet::new(),
        covered_test: BTreeSet::new(),
        skipped_test,
        test_statement_count: test.statement_count(),
        top_level_count: test.body.len(),
        assertion_count: test.assertion_count(),
    }
}

#[derive(Debug)]
struct Fault {
    location: Location,
    in_subject: bool,
    message: String,
    chain: Vec<Location>,
}

enum Flow {
    Next,
    Return(Value),
}

#[derive(Default)]
struct Frame {
    vars: HashMap<String, Value>,
}

struct Machine<'a> {
    functions: HashMap<&'a str, &'a FunctionDef>,
    fuel: u64,
    depth: usize,
    stack: Vec<(Location, bool)>,
    covered_subject: BTreeSet<StatementId>,
    branches: BTreeSet<Branch>,
    covered_test: BTreeSet<StatementId>,
}

impl<'a> Machine<'a> {
    fn new(subject: &'a SourceUnit, fuel: u64) -> Self {
        Machine {
            functions: subject
                .functions
                .iter()
                .map(|f| (f.name.as_str(), f))
                .collect(),
            fuel,
            depth: 0,
            stack: Vec::new(),
            covered_subject: BTreeSet::new(),
            branches: BTreeSet::new(),
            covered_test: BTreeSet::new(),
        }
    }

    fn fault(&self, message: impl Into<String>) -> Fault {
        let (location, in_subject) = self.stack.last().copied().unwrap_or((
            Location {
                statement: StatementId(0),
                line: 0,
            },
            false,
        ));
        Fault {
            location,
            in_subject,
            message: message.into(),
            chain: self.stack.iter().map(|(l, _)| *l).collect(),
        }
    }

    /// Charges fuel and records coverage for a statement about to execute.
    fn enter(&mut self, stmt: &Statement, in_subject: bool) -> Result<(), Fault> {
        self.stack.push((
            Location {
                statement: stmt.id,
                line: stmt.line,
            },
            in_subject,
        ));
        if self.fuel == 0 {
            return Err(self.fault("fuel exhausted"));
        }
        self.fuel -= 1;
        if in_subject {
            self.covered_subject.insert(stmt.id);
        } else {
            self.covered_test.insert(stmt.id);
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.stack.pop();
    }

    fn branch(&mut self, in_subject: bool, statement: StatementId, arm: Arm) {
        if in_subject {
            self.branches.insert(Branch { statement, arm });
        }
    }

    fn check_assertion(
        &mut self,
        stmt: &Statement,
        frame: &mut Frame,
    ) -> Result<Option<String>, Fault> {
        self.enter(stmt, false)?;
        let verdict = match &stmt.kind {
            StmtKind::AssertEq {
                expected,
                actual,
                tol,
                ..
            } => {
                let e = self.eval(expected, frame)?;
                let a = self.eval(actual, frame)?;
                if assert_equal(&e, &a, *tol) {
                    None
                } else {
                    Some(match tol {
                        Some(t) => format!("AssertionFailure: expected:<{e}> but was:<{a}> (tolerance {t:?})"),
                        None => format!("AssertionFailure: expected:<{e}> but was:<{a}>"),
                    })
                }
            }
            StmtKind::AssertTrue { cond, .. } => {
                let v = self.eval(cond, frame)?;
                match v {
                    Value::Bool(true) => None,
                    Value::Bool(false) => Some("AssertionFailure: expected true".to_string()),
                    other => {
                        return Err(self.fault(format!(
                            "assert_true expects bool, found {}",
                            other.type_name()
                        )))
                    }
                }
            }
            _ => unreachable!("check_assertion called on a non-assertion"),
        };
        self.leave();
        Ok(verdict)
    }

    fn exec_block(
        &mut self,
        block: &[Statement],
        frame: &mut Frame,
        in_subject: bool,
    ) -> Result<Flow, Fault> {
        for stmt in block {
            if let Flow::Return(v) = self.exec_stmt(stmt, frame, in_subject)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn exec_stmt(
        &mut self,
        stmt: &Statement,
        frame: &mut Frame,
        in_subject: bool,
    ) -> Result<Flow, Fault> {
        self.enter(stmt, in_subject)?;
        let flow = match &stmt.kind {
            StmtKind::Let { name, value } => {
                let v = self.eval(value, frame)?;
                frame.vars.insert(name.clone(), v);
                Flow::Next
            }
            StmtKind::Assign { name, value } => {
                let v = self.eval(value, frame)?;
                match frame.vars.get_mut(name) {
                    Some(slot) => *slot = v,
                    None => {
                        return Err(
                            self.fault(format!("assignment to undeclared variable `{name}`"))
                        )
                    }
                }
                Flow::Next
            }
            StmtKind::Expr(e) => {
                self.eval(e, frame)?;
                Flow::Next
            }
            StmtKind::Return(e) => Flow::Return(self.eval(e, frame)?),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let c = self.eval(cond, frame)?;
                let c = c.truthy().map_err(|m| self.fault(m))?;
                self.branch(in_subject, stmt.id, if c { Arm::Then } else { Arm::Else });
                let block = if c { then_block } else { else_block };
                let flow = self.exec_block(block, frame, in_subject)?;
                self.leave();
                return Ok(flow);
            }
            StmtKind::While { cond, body, bound } => {
                let mut iterations = 0u32;
                loop {
                    let c = self.eval(cond, frame)?;
                    let c = c.truthy().map_err(|m| self.fault(m))?;
                    self.branch(
                        in_subject,
                        stmt.id,
                        if c { Arm::Taken } else { Arm::NotTaken },
                    );
                    if !c {
                        break;
                    }
                    if iterations == *bound {
                        return Err(self.fault(format!("loop bound {bound} exceeded")));
                    }
                    iterations += 1;
                    if let Flow::Return(v) = self.exec_block(body, frame, in_subject)? {
                        self.leave();
                        return Ok(Flow::Return(v));
                    }
                }
                Flow::Next
            }
            StmtKind::AssertEq { .. } | StmtKind::AssertTrue { .. } | StmtKind::RethrowFirst => {
                return Err(self.fault("assertion outside the top level of a test body"));
            }
        };
        self.leave();
        Ok(flow)
    }

    fn eval(&mut self, e: &Expr, frame: &mut Frame) -> Result<Value, Fault> {
        match e {
            Expr::Int(n) => Ok(Value::Int(*n)),
            Expr::Float(x) => Ok(Value::Float(*x)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Var(name) => frame
                .vars
                .get(name)
                .cloned()
                .ok_or_else(|| self.fault(format!("unbound variable `{name}`"))),
            Expr::Unary(op, inner) => {
                let v = self.eval(inner, frame)?;
                value::unary(*op, v).map_err(|m| self.fault(m))
            }
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lv = self.eval(l, frame)?;
                let lb = lv.truthy().map_err(|m| self.fault(m))?;
                if (*op == BinOp::And && !lb) || (*op == BinOp::Or && lb) {
                    return Ok(Value::Bool(lb));
                }
                let rv = self.eval(r, frame)?;
                rv.truthy().map(Value::Bool).map_err(|m| self.fault(m))
            }
            Expr::Binary(op, l, r) => {
                let lv = self.eval(l, frame)?;
                let rv = self.eval(r, frame)?;
                value::binary(*op, lv, rv).map_err(|m| self.fault(m))
            }
            Expr::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, frame)?);
                }
                self.call(name, vals)
            }
        }
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Fault> {
        let Some(func) = self.functions.get(name).copied() else {
            return value::call_builtin(name, &args).map_err(|m| self.fault(m));
        };
        if self.depth >= MAX_CALL_DEPTH {
            return Err(self.fault(format!("call depth limit {MAX_CALL_DEPTH} exceeded")));
        }
        let mut callee = Frame {
            vars: func.params.iter().cloned().zip(args).collect(),
        };
        self.depth += 1;
        let flow = self.exec_block(&func.body, &mut callee, true);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Value::Unit),
        }
    }
}

/// JUnit-style equality: numbers within `tol` (default 0), NaN never equal.
fn assert_equal(expected: &Value, actual: &Value, tol: Option<f64>) -> bool {
    match (expected, actual) {
        (Value::Int(a), Value::Int(b)) if tol.is_none() => a == b,
        _ => match (expected.as_f64(), actual.as_f64()) {
            (Some(a), Some(b)) => (a - b).abs() <= tol.unwrap_or(0.0),
            _ => value::values_equal(expected, actual),
        },
    }
}
