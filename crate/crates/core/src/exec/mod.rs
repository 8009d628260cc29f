//! Tree-walking interpreter with statement and branch coverage, and the
//! suite runner for the three settings.

mod interp;
mod report;
mod trace;
pub mod value;

use std::collections::{BTreeMap, BTreeSet};

pub use interp::{call_function, check_calls, run_test, run_test_with, trace_for_error, RunOptions, DEFAULT_FUEL};
pub use report::{BranchDoc, FailureDoc, ReportDoc, StatementLine, TraceDoc, UniverseDoc};
pub use trace::*;

use crate::dsl::{walk_statements, SourceUnit, StatementId, StmtKind};
use crate::par::{self, Parallelism};
use crate::transform::{slice_suite, DependenceOptions, SlicePolicy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("call to undefined function `{name}` at line {line}")]
    MissingFunction {
        name: String,
        statement: StatementId,
        line: u32,
        in_subject: bool,
    },
    #[error("`{name}` expects {expected} argument(s), got {found} at line {line}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        statement: StatementId,
        line: u32,
        in_subject: bool,
    },
}

impl ExecError {
    pub fn location(&self) -> (StatementId, u32, bool) {
        match self {
            ExecError::MissingFunction {
                statement,
                line,
                in_subject,
                ..
            }
            | ExecError::ArityMismatch {
                statement,
                line,
                in_subject,
                ..
            } => (*statement, *line, *in_subject),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub fuel: u64,
    pub slice_policy: SlicePolicy,
    pub dependence: DependenceOptions,
    pub parallelism: Parallelism,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            fuel: DEFAULT_FUEL,
            slice_policy: SlicePolicy::default(),
            dependence: DependenceOptions::default(),
            parallelism: Parallelism::default(),
        }
    }
}

pub fn run_suite(
    subject: &SourceUnit,
    suite: &SourceUnit,
    setting: Setting,
    fuel: u64,
) -> SuiteRunReport {
    let opts = SuiteOptions {
        fuel,
        ..Default::default()
    };
    run_suite_with(subject, suite, setting, &opts)
}

/// Runs a suite under one setting. Under Slicing the suite is first
/// disassembled with [`slice_suite`] and every sub-test runs in Original
/// mode; slicing warnings land in the report.
pub fn run_suite_with(
    subject: &SourceUnit,
    suite: &SourceUnit,
    setting: Setting,
    opts: &SuiteOptions,
) -> SuiteRunReport {
    match setting {
        Setting::Slicing => {
            let sliced = slice_suite(suite, subject, opts.slice_policy, &opts.dependence);
            let mut report = run_tests(subject, &sliced.unit, setting, opts);
            report.warnings.extend(sliced.warnings);
            report
        }
        _ => run_tests(subject, suite, setting, opts),
    }
}

/// Runs every test of `suite` as-is under the execution mode of `setting`,
/// labelling the report with `setting`.
pub fn run_tests(
    subject: &SourceUnit,
    suite: &SourceUnit,
    setting: Setting,
    opts: &SuiteOptions,
) -> SuiteRunReport {
    let mode = setting.execution_mode();
    let traces = par::map(opts.parallelism, &suite.tests, |test| {
        run_test(subject, test, mode, opts.fuel).unwrap_or_else(|e| trace_for_error(test, &e))
    });
    let mut test_lines = BTreeMap::new();
    for t in &suite.tests {
        walk_statements(&t.body, &mut |s| {
            test_lines.insert(s.id, s.line);
        });
    }
    let (subject_statement_universe, subject_branch_universe) = subject_universe(subject);
    SuiteRunReport {
        mode: setting,
        traces,
        subject_statement_universe,
        subject_branch_universe,
        test_lines,
        warnings: Vec::new(),
    }
}

pub fn subject_universe(subject: &SourceUnit) -> (BTreeMap<StatementId, u32>, BTreeSet<Branch>) {
    let mut statements = BTreeMap::new();
    let mut branches = BTreeSet::new();
    for f in &subject.functions {
        walk_statements(&f.body, &mut |s| {
            statements.insert(s.id, s.line);
            let arms = match s.kind {
                StmtKind::If { .. } => [Arm::Then, Arm::Else],
                StmtKind::While { .. } => [Arm::Taken, Arm::NotTaken],
                _ => return,
            };
            for arm in arms {
                branches.insert(Branch {
                    statement: s.id,
                    arm,
                });
            }
        });
    }
    (statements, branches)
}
