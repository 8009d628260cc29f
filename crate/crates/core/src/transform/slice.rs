use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::depend::{build_dependence_graph, DependenceGraph, DependenceOptions};
use super::TransformError;
use crate::dsl::{
    parse_unit_with, pretty_print, Expr, ParseOptions, SourceUnit, Statement, StatementId,
    StmtKind, TestCase, UnOp, UnitKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlicePolicy {
    AllTests,
    #[default]
    MultiAssertionOnly,
}

impl std::str::FromStr for SlicePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all_tests" | "all-tests" => Ok(SlicePolicy::AllTests),
            "multi_assertion_only" | "multi-assertion-only" => Ok(SlicePolicy::MultiAssertionOnly),
            other => Err(format!("unknown slice policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceSet {
    pub origin_test: String,
    pub sub_tests: Vec<TestCase>,
    /// (assertion ordinal, sub-test name)
    pub mapping: Vec<(usize, String)>,
}

/// JSON sidecar entry written next to a sliced suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSidecar {
    pub origin_test: String,
    pub sub_tests: Vec<String>,
    pub mapping: Vec<(usize, String)>,
}

impl SliceSet {
    pub fn sidecar(&self) -> SliceSidecar {
        SliceSidecar {
            origin_test: self.origin_test.clone(),
            sub_tests: self.sub_tests.iter().map(|t| t.name.clone()).collect(),
            mapping: self.mapping.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicedSuite {
    pub unit: SourceUnit,
    pub slices: Vec<SliceSet>,
    pub warnings: Vec<String>,
}

impl SlicedSuite {
    pub fn sidecar_json(&self) -> String {
        let entries: Vec<_> = self.slices.iter().map(SliceSet::sidecar).collect();
        serde_json::to_string_pretty(&entries).expect("sidecar serialization is infallible")
    }
}

/// Backward closure of `target` over the graph. Keeping a nested statement
/// keeps its enclosing conditional, and keeping a conditional keeps all of
/// it, so the closure is always a well-formed sub-body.
pub fn slice_closure(graph: &DependenceGraph, target: StatementId) -> BTreeSet<StatementId> {
    let mut keep = BTreeSet::new();
    let mut work = vec![target];
    while let Some(id) = work.pop() {
        if !keep.insert(id) {
            continue;
        }
        work.extend(graph.deps(id).map(|e| e.to));
        if let Some(p) = graph.parent.get(&id) {
            work.push(*p);
        }
        work.extend(graph.descendants(id));
    }
    keep
}

fn is_literal(e: &Expr) -> bool {
    match e {
        Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) => true,
        Expr::Unary(UnOp::Neg, inner) => matches!(**inner, Expr::Int(_) | Expr::Float(_)),
        _ => false,
    }
}

/// Expression statements left behind when an earlier assertion is stripped:
/// its operands in evaluation order, literals dropped.
fn strip_assertion(stmt: &Statement) -> Vec<Statement> {
    let operands: Vec<&Expr> = match &stmt.kind {
        StmtKind::AssertEq {
            expected, actual, ..
        } => vec![expected, actual],
        StmtKind::AssertTrue { cond, .. } => vec![cond],
        _ => vec![],
    };
    operands
        .into_iter()
        .filter(|e| !is_literal(e))
        .map(|e| Statement {
            id: stmt.id,
            line: stmt.line,
            kind: StmtKind::Expr(e.clone()),
        })
        .collect()
}

fn unguard(stmt: &Statement) -> Statement {
    let mut s = stmt.clone();
    if let StmtKind::AssertEq { guarded, .. } | StmtKind::AssertTrue { guarded, .. } = &mut s.kind
    {
        *guarded = false;
    }
    s
}

/// The `ordinal`-th sub-test of `test`: the closure of that assertion in
/// source order, earlier assertions in the closure stripped, ending at the
/// assertion. Statement ids are renumbered from 0 within the sub-test.
pub fn slice_for_assertion(
    test: &TestCase,
    ordinal: usize,
    graph: &DependenceGraph,
) -> Result<TestCase, TransformError> {
    let count = test.assertion_count();
    if ordinal == 0 || ordinal > count {
        return Err(TransformError::OrdinalOutOfRange {
            test: test.name.clone(),
            ordinal,
            count,
        });
    }
    let target = test.assertion_ids[ordinal - 1];
    let keep = slice_closure(graph, target);
    let mut body = Vec::new();
    for stmt in &test.body {
        if stmt.id == target {
            body.push(unguard(stmt));
            break;
        }
        if !keep.contains(&stmt.id) {
            continue;
        }
        if stmt.kind.is_assertion() {
            body.extend(strip_assertion(stmt));
        } else if stmt.kind != StmtKind::RethrowFirst {
            body.push(stmt.clone());
        }
    }
    let mut unit = SourceUnit::empty("", UnitKind::Testsuite);
    unit.tests.push(TestCase {
        name: format!("{}_{}", test.name, ordinal),
        body,
        assertion_ids: Vec::new(),
        line: test.line,
    });
    unit.renumber();
    Ok(unit.tests.pop().expect("one test"))
}

fn slice_test(
    test: &TestCase,
    subject: &SourceUnit,
    deps: &DependenceOptions,
) -> Result<SliceSet, TransformError> {
    let graph = build_dependence_graph(test, subject, deps)?;
    let mut sub_tests = Vec::with_capacity(test.assertion_count());
    let mut mapping = Vec::with_capacity(test.assertion_count());
    for ordinal in 1..=test.assertion_count() {
        let sub = slice_for_assertion(test, ordinal, &graph)?;
        mapping.push((ordinal, sub.name.clone()));
        sub_tests.push(sub);
    }
    Ok(SliceSet {
        origin_test: test.name.clone(),
        sub_tests,
        mapping,
    })
}

/// Replaces each selected test by its sub-tests. A test whose slicing fails
/// or whose sub-test names would collide passes through with a warning.
/// The result is printed and re-parsed so ids and lines are canonical.
pub fn slice_suite(
    suite: &SourceUnit,
    subject: &SourceUnit,
    policy: SlicePolicy,
    deps: &DependenceOptions,
) -> SlicedSuite {
    let original_names: HashSet<&str> = suite.tests.iter().map(|t| t.name.as_str()).collect();
    let mut emitted: HashSet<String> = HashSet::new();
    let mut warnings = Vec::new();
    let mut slices = Vec::new();
    let mut unit = SourceUnit::empty(suite.path.clone(), UnitKind::Testsuite);

    for test in &suite.tests {
        let wanted = match policy {
            SlicePolicy::MultiAssertionOnly => test.assertion_count() >= 2,
            SlicePolicy::AllTests => test.assertion_count() >= 1,
        };
        let sliced = if wanted {
            match slice_test(test, subject, deps) {
                Ok(set) => {
                    let clash = set.sub_tests.iter().find(|s| {
                        original_names.contains(s.name.as_str()) || emitted.contains(&s.name)
                    });
                    match clash {
                        Some(s) => {
                            warnings.push(format!(
                                "test `{}` not sliced: sub-test name `{}` already in use",
                                test.name, s.name
                            ));
                            None
                        }
                        None => Some(set),
                    }
                }
                Err(e) => {
                    warnings.push(format!("test `{}` not sliced: {e}", test.name));
                    None
                }
            }
        } else {
            None
        };
        match sliced {
            Some(set) => {
                for s in &set.sub_tests {
                    emitted.insert(s.name.clone());
                    unit.tests.push(s.clone());
                }
                slices.push(set);
            }
            None => {
                emitted.insert(test.name.clone());
                unit.tests.push(test.clone());
            }
        }
    }

    let opts = ParseOptions {
        allow_trailing_code: true,
    };
    let unit = parse_unit_with(&pretty_print(&unit), UnitKind::Testsuite, &suite.path, &opts)
        .expect("printed suite re-parses");
    for set in &mut slices {
        for sub in &mut set.sub_tests {
            *sub = unit.test(&sub.name).expect("sub-test present").clone();
        }
    }
    SlicedSuite {
        unit,
        slices,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_unit;

    const SUBJECT: &str = "fn set_value(v, n) { return n; }\nfn get_value(v) { return v; }\n";

    fn suite(src: &str) -> SourceUnit {
        parse_unit(src, UnitKind::Testsuite).unwrap()
    }

    #[test]
    fn stripped_dependent_call_is_kept() {
        let subject = parse_unit(SUBJECT, UnitKind::Subject).unwrap();
        let s = suite(
            "test v { let v1 = 0; assert_eq(4, set_value(v1, 4)); assert_eq(0, get_value(v1)); }",
        );
        let g = build_dependence_graph(&s.tests[0], &subject, &DependenceOptions::default())
            .unwrap();
        let sub = slice_for_assertion(&s.tests[0], 2, &g).unwrap();
        let expected = suite(
            "test v_2 { let v1 = 0; set_value(v1, 4); assert_eq(0, get_value(v1)); }",
        );
        assert!(sub.same_shape(&expected.tests[0]));
        assert!(matches!(
            slice_for_assertion(&s.tests[0], 3, &g),
            Err(TransformError::OrdinalOutOfRange { .. })
        ));
    }

    #[test]
    fn name_collision_passes_through() {
        let subject = parse_unit(SUBJECT, UnitKind::Subject).unwrap();
        let s = suite(
            "test t { assert_eq(1, 1); assert_eq(2, 2); }\ntest t_2 { assert_eq(3, 3); }",
        );
        let out = slice_suite(&s, &subject, SlicePolicy::default(), &DependenceOptions::default());
        assert_eq!(out.unit.tests.len(), 2);
        assert!(out.slices.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn unbound_test_passes_through() {
        let subject = parse_unit(SUBJECT, UnitKind::Subject).unwrap();
        let s = suite("test t { assert_eq(1, z); assert_eq(2, 2); }");
        let out = slice_suite(&s, &subject, SlicePolicy::default(), &DependenceOptions::default());
        assert!(out.unit.same_shape(&s));
        assert!(out.warnings[0].contains("`z`"));
    }
}
