#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use slicefl::dsl::{walk_statements, SourceUnit, Statement, StatementId, TestCase};
use slicefl::exec::{run_test_with, ExecutionMode, FailureKind, RunOptions};
use slicefl::harness::Scenario;
use slicefl::transform::{build_dependence_graph, slice_closure, DependenceOptions};

pub fn golden_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../golden")
        .join(name)
}

pub fn load_golden(name: &str) -> Scenario {
    Scenario::load(&golden_dir(name)).unwrap_or_else(|e| panic!("golden {name}: {e}"))
}

/// Sorted (relative path, sha256) over every file below `root`.
pub fn hash_tree(root: &Path) -> Vec<(String, String)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                let digest = Sha256::digest(fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.push((rel, hex));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out
}

fn remove_statement(block: &mut Vec<Statement>, id: StatementId) -> bool {
    if let Some(pos) = block.iter().position(|s| s.id == id) {
        block.remove(pos);
        return true;
    }
    block.iter_mut().any(|s| match &mut s.kind {
        slicefl::dsl::StmtKind::If {
            then_block,
            else_block,
            ..
        } => remove_statement(then_block, id) || remove_statement(else_block, id),
        slicefl::dsl::StmtKind::While { body, .. } => remove_statement(body, id),
        _ => false,
    })
}

/// What the assertion `target` did: None when it held, otherwise the
/// failure kind and message.
fn assertion_result(
    subject: &SourceUnit,
    test: &TestCase,
    target: StatementId,
) -> Option<(FailureKind, String)> {
    let opts = RunOptions {
        continue_after_errors: true,
        ..Default::default()
    };
    let trace = run_test_with(subject, test, ExecutionMode::Trycatch, &opts).expect("calls resolve");
    trace
        .failures
        .iter()
        .find(|f| f.test_location.statement == target)
        .map(|f| (f.kind, f.message.clone()))
}

pub fn assertion_ids(test: &TestCase) -> Vec<StatementId> {
    let mut ids = Vec::new();
    walk_statements(&test.body, &mut |s| {
        if s.kind.is_assertion() {
            ids.push(s.id);
        }
    });
    ids
}

pub fn statement_ids(test: &TestCase) -> Vec<StatementId> {
    let mut ids = Vec::new();
    walk_statements(&test.body, &mut |s| ids.push(s.id));
    ids
}

/// Brute-force slicing check: deleting any single statement outside the
/// computed slice of an assertion must leave that assertion's result alone.
/// Returns one line per violation and the number of deletions tried.
pub fn deletion_oracle(subject: &SourceUnit, test: &TestCase) -> (Vec<String>, usize) {
    let graph = build_dependence_graph(test, subject, &DependenceOptions::default())
        .expect("generated tests bind every variable");
    let mut violations = Vec::new();
    let mut tried = 0;
    for target in assertion_ids(test) {
        let closure: BTreeSet<StatementId> = slice_closure(&graph, target);
        let baseline = assertion_result(subject, test, target);
        for s in statement_ids(test) {
            if closure.contains(&s) {
                continue;
            }
            let mut reduced = test.clone();
            if !remove_statement(&mut reduced.body, s) {
                // already gone with a deleted parent
                continue;
            }
            reduced.recompute_assertions();
            tried += 1;
            let after = assertion_result(subject, &reduced, target);
            if after != baseline {
                violations.push(format!(
                    "{}: deleting {s} changes assertion {target}: {baseline:?} -> {after:?}",
                    test.name
                ));
            }
        }
    }
    (violations, tried)
}
