use crate::dsl::{SourceUnit, Statement, StatementId, StmtKind, TestCase};

/// Display form of a test under Trycatch: every assertion is guarded and a
/// `rethrow_first;` marker closes the body. Running the result in Original
/// mode behaves like running `test` in Trycatch mode.
///
/// The marker gets the next free id of this test; call
/// [`SourceUnit::renumber`] when the test is placed in a unit.
pub fn trycatch_rewrite(test: &TestCase) -> TestCase {
    let mut out = test.clone();
    for stmt in &mut out.body {
        if let StmtKind::AssertEq { guarded, .. } | StmtKind::AssertTrue { guarded, .. } =
            &mut stmt.kind
        {
            *guarded = true;
        }
    }
    if out.body.last().map(|s| &s.kind) != Some(&StmtKind::RethrowFirst) {
        let mut max_id = 0;
        let mut max_line = test.line;
        crate::dsl::walk_statements(&out.body, &mut |s| {
            max_id = max_id.max(s.id.0 + 1);
            max_line = max_line.max(s.line);
        });
        out.body.push(Statement {
            id: StatementId(max_id),
            line: max_line + 1,
            kind: StmtKind::RethrowFirst,
        });
    }
    out
}

pub fn trycatch_rewrite_suite(suite: &SourceUnit) -> SourceUnit {
    let mut out = suite.clone();
    out.tests = suite.tests.iter().map(trycatch_rewrite).collect();
    out.renumber();
    out
}
