use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::TransformError;
use crate::dsl::{Expr, SourceUnit, Statement, StatementId, StmtKind, TestCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Data,
    CallEffect,
    Control,
}

/// `to` must be kept (and run before `from`) whenever `from` is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub from: StatementId,
    pub to: StatementId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DependenceOptions {
    /// Add call-effect edges: an expression statement or assertion that
    /// passes `v` to a subject function depends on every earlier statement
    /// passing `v` to a subject function. Builtins are pure and never count.
    pub call_effect: bool,
}

impl Default for DependenceOptions {
    fn default() -> Self {
        DependenceOptions { call_effect: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceGraph {
    /// Statements of the test body in pre-order.
    pub nodes: Vec<StatementId>,
    pub edges: BTreeSet<Edge>,
    /// Nested statement to its innermost enclosing If/While.
    pub parent: BTreeMap<StatementId, StatementId>,
}

impl DependenceGraph {
    pub fn deps(&self, from: StatementId) -> impl Iterator<Item = &Edge> {
        let lo = Edge {
            from,
            to: StatementId(0),
            kind: EdgeKind::Data,
        };
        self.edges.range(lo..).take_while(move |e| e.from == from)
    }

    /// Descendants of a compound statement, in pre-order.
    pub fn descendants(&self, id: StatementId) -> Vec<StatementId> {
        self.nodes
            .iter()
            .copied()
            .filter(|n| {
                let mut cur = *n;
                while let Some(p) = self.parent.get(&cur) {
                    if *p == id {
                        return true;
                    }
                    cur = *p;
                }
                false
            })
            .collect()
    }
}

type Defs = BTreeMap<String, BTreeSet<StatementId>>;

struct Builder<'a> {
    subject: &'a SourceUnit,
    opts: DependenceOptions,
    nodes: Vec<StatementId>,
    edges: BTreeSet<Edge>,
    parent: BTreeMap<StatementId, StatementId>,
    /// Statements (in source order) that pass a variable to a subject call.
    passers: Vec<(StatementId, BTreeSet<String>)>,
    error: Option<TransformError>,
}

pub fn build_dependence_graph(
    test: &TestCase,
    subject: &SourceUnit,
    opts: &DependenceOptions,
) -> Result<DependenceGraph, TransformError> {
    let mut b = Builder {
        subject,
        opts: *opts,
        nodes: Vec::new(),
        edges: BTreeSet::new(),
        parent: BTreeMap::new(),
        passers: Vec::new(),
        error: None,
    };
    let mut defs = Defs::new();
    b.block(&test.body, &mut defs, None);
    match b.error {
        Some(e) => Err(e),
        None => Ok(DependenceGraph {
            nodes: b.nodes,
            edges: b.edges,
            parent: b.parent,
        }),
    }
}

impl Builder<'_> {
    fn block(&mut self, block: &[Statement], defs: &mut Defs, enclosing: Option<StatementId>) {
        for stmt in block {
            self.stmt(stmt, defs, enclosing);
        }
    }

    fn uses(&mut self, stmt: &Statement, e: &Expr, defs: &Defs) {
        let mut names = Vec::new();
        e.for_each_var(&mut |v| names.push(v));
        for name in names {
            self.use_var(stmt, name, defs);
        }
    }

    fn use_var(&mut self, stmt: &Statement, name: &str, defs: &Defs) {
        match defs.get(name) {
            Some(ds) if !ds.is_empty() => {
                for d in ds {
                    self.edges.insert(Edge {
                        from: stmt.id,
                        to: *d,
                        kind: EdgeKind::Data,
                    });
                }
            }
            _ => {
                self.error.get_or_insert(TransformError::UnboundVariable {
                    name: name.to_string(),
                    statement: stmt.id,
                    line: stmt.line,
                });
            }
        }
    }

    fn call_args(&self, stmt: &Statement) -> BTreeSet<String> {
        let mut vars = BTreeSet::new();
        for e in stmt.own_exprs() {
            e.for_each_call(&mut |name, args| {
                if self.subject.function(name).is_some() {
                    for a in args {
                        a.for_each_var(&mut |v| {
                            vars.insert(v.to_string());
                        });
                    }
                }
            });
        }
        vars
    }

    fn call_effect(&mut self, stmt: &Statement) {
        let passed = self.call_args(stmt);
        if passed.is_empty() {
            return;
        }
        let is_from = matches!(
            stmt.kind,
            StmtKind::Expr(_) | StmtKind::AssertEq { .. } | StmtKind::AssertTrue { .. }
        );
        if self.opts.call_effect && is_from {
            for (earlier, vars) in &self.passers {
                if !vars.is_disjoint(&passed) {
                    self.edges.insert(Edge {
                        from: stmt.id,
                        to: *earlier,
                        kind: EdgeKind::CallEffect,
                    });
                }
            }
        }
        self.passers.push((stmt.id, passed));
    }

    fn stmt(&mut self, stmt: &Statement, defs: &mut Defs, enclosing: Option<StatementId>) {
        self.nodes.push(stmt.id);
        if let Some(p) = enclosing {
            self.parent.insert(stmt.id, p);
            self.edges.insert(Edge {
                from: stmt.id,
                to: p,
                kind: EdgeKind::Control,
            });
        }
        for e in stmt.own_exprs() {
            self.uses(stmt, e, defs);
        }
        self.call_effect(stmt);
        match &stmt.kind {
            StmtKind::Let { name, .. } => {
                defs.insert(name.clone(), BTreeSet::from([stmt.id]));
            }
            StmtKind::Assign { name, .. } => {
                // assignment needs the variable to exist already
                self.use_var(stmt, name, defs);
                defs.insert(name.clone(), BTreeSet::from([stmt.id]));
            }
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                let mut then_defs = defs.clone();
                self.block(then_block, &mut then_defs, Some(stmt.id));
                self.block(else_block, defs, Some(stmt.id));
                merge(defs, &then_defs);
            }
            StmtKind::While { cond, body, .. } => {
                // iterate to a fixpoint so loop-carried definitions reach
                // the condition and the top of the body
                let passers_before = self.passers.len();
                loop {
                    let mut body_defs = defs.clone();
                    self.passers.truncate(passers_before);
                    let nodes_before = self.nodes.len();
                    self.block(body, &mut body_defs, Some(stmt.id));
                    self.nodes.truncate(nodes_before);
                    let before = defs.clone();
                    merge(defs, &body_defs);
                    self.uses(stmt, cond, defs);
                    if *defs == before {
                        break;
                    }
                }
                self.block_nodes(body);
            }
            _ => {}
        }
    }

    fn block_nodes(&mut self, block: &[Statement]) {
        crate::dsl::walk_statements(block, &mut |s| self.nodes.push(s.id));
    }
}

fn merge(into: &mut Defs, other: &Defs) {
    for (k, v) in other {
        into.entry(k.clone()).or_default().extend(v.iter().copied());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_unit, UnitKind};

    fn graph(subject: &str, suite: &str) -> DependenceGraph {
        let subject = parse_unit(subject, UnitKind::Subject).unwrap();
        let suite = parse_unit(suite, UnitKind::Testsuite).unwrap();
        build_dependence_graph(&suite.tests[0], &subject, &DependenceOptions::default()).unwrap()
    }

    #[test]
    fn chain() {
        let g = graph(
            "fn id(x) { return x; }",
            "test t { let a = 1; let b = a + 1; assert_eq(b, 2); }",
        );
        let to: Vec<_> = g.deps(StatementId(2)).map(|e| e.to).collect();
        assert_eq!(to, vec![StatementId(1)]);
        let to: Vec<_> = g.deps(StatementId(1)).map(|e| e.to).collect();
        assert_eq!(to, vec![StatementId(0)]);
    }

    #[test]
    fn loop_carried_definition_reaches_condition() {
        let g = graph(
            "fn id(x) { return x; }",
            "test t { let i = 0; while i < 3 bound 5 { i = i + 1; } assert_eq(i, 3); }",
        );
        let while_deps: BTreeSet<_> = g.deps(StatementId(1)).map(|e| e.to).collect();
        assert_eq!(while_deps, BTreeSet::from([StatementId(0), StatementId(2)]));
        let assign_deps: BTreeSet<_> = g.deps(StatementId(2)).map(|e| (e.to, e.kind)).collect();
        assert!(assign_deps.contains(&(StatementId(1), EdgeKind::Control)));
        assert!(assign_deps.contains(&(StatementId(2), EdgeKind::Data)));
        assert_eq!(g.nodes.len(), 4);
    }

    #[test]
    fn unbound_variable() {
        let subject = parse_unit("fn id(x) { return x; }", UnitKind::Subject).unwrap();
        let suite = parse_unit("test t { assert_eq(y, 2); }", UnitKind::Testsuite).unwrap();
        let err = build_dependence_graph(&suite.tests[0], &subject, &DependenceOptions::default());
        assert!(matches!(err, Err(TransformError::UnboundVariable { ref name, .. }) if name == "y"));
    }

    #[test]
    fn call_effect_switch() {
        let subject = "fn set_value(v, n) { return n; } fn get_value(v) { return v; }";
        let suite = "test t { let v1 = 0; assert_eq(4, set_value(v1, 4)); assert_eq(0, get_value(v1)); }";
        let g = graph(subject, suite);
        assert!(g.deps(StatementId(2)).any(|e| e.to == StatementId(1)));
        let subject = parse_unit(subject, UnitKind::Subject).unwrap();
        let suite = parse_unit(suite, UnitKind::Testsuite).unwrap();
        let pure = build_dependence_graph(
            &suite.tests[0],
            &subject,
            &DependenceOptions { call_effect: false },
        )
        .unwrap();
        assert!(!pure.deps(StatementId(2)).any(|e| e.to == StatementId(1)));
    }
}
