use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::StatementId;

/// Termination semantics of a single test run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    /// Abort at the first failure.
    Original,
    /// Collect assertion failures and keep going; runtime errors still abort.
    Trycatch,
}

/// One of the three suite-level settings. Slicing is a suite transformation
/// whose sub-tests run in [`ExecutionMode::Original`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Original,
    Trycatch,
    Slicing,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Original, Setting::Trycatch, Setting::Slicing];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Original => "original",
            Setting::Trycatch => "trycatch",
            Setting::Slicing => "slicing",
        }
    }

    pub fn execution_mode(self) -> ExecutionMode {
        match self {
            Setting::Trycatch => ExecutionMode::Trycatch,
            Setting::Original | Setting::Slicing => ExecutionMode::Original,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Setting::Original),
            "trycatch" => Ok(Setting::Trycatch),
            "slicing" => Ok(Setting::Slicing),
            other => Err(format!("unknown setting `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Then,
    Else,
    Taken,
    NotTaken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Branch {
    pub statement: StatementId,
    pub arm: Arm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    AssertionFailure,
    RuntimeError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub statement: StatementId,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub kind: FailureKind,
    /// Innermost failing statement: the assertion itself, or the statement
    /// (test or subject) that raised the runtime error.
    pub location: Location,
    pub in_subject: bool,
    /// Top-level test statement that was executing.
    pub test_location: Location,
    /// 1-based position of `test_location` among the top-level statements.
    pub test_index: usize,
    pub assertion_ordinal: Option<usize>,
    pub message: String,
    /// Statements being evaluated when the failure occurred, outermost first.
    pub chain: Vec<Location>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub test_name: String,
    pub outcome: Outcome,
    pub failures: Vec<FailureEvent>,
    pub covered_subject: BTreeSet<StatementId>,
    pub covered_subject_branches: BTreeSet<Branch>,
    pub covered_test: BTreeSet<StatementId>,
    pub skipped_test: BTreeSet<StatementId>,
    /// All statements of the test body, nested ones included.
    pub test_statement_count: usize,
    pub top_level_count: usize,
    pub assertion_count: usize,
}

impl ExecutionTrace {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Passed
    }

    /// The failure the run reports: the first collected assertion failure,
    /// otherwise the first event.
    pub fn primary_failure(&self) -> Option<&FailureEvent> {
        self.failures
            .iter()
            .find(|f| f.kind == FailureKind::AssertionFailure)
            .or_else(|| self.failures.first())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRunReport {
    pub mode: Setting,
    pub traces: Vec<ExecutionTrace>,
    /// Subject statement id to source line.
    pub subject_statement_universe: BTreeMap<StatementId, u32>,
    pub subject_branch_universe: BTreeSet<Branch>,
    /// Line table of the executed suite (the sliced suite under Slicing).
    pub test_lines: BTreeMap<StatementId, u32>,
    pub warnings: Vec<String>,
}

impl SuiteRunReport {
    pub fn failed_count(&self) -> usize {
        self.traces.iter().filter(|t| !t.passed()).count()
    }

    pub fn trace(&self, name: &str) -> Option<&ExecutionTrace> {
        self.traces.iter().find(|t| t.test_name == name)
    }

    pub fn covered_subject_union(&self) -> BTreeSet<StatementId> {
        self.traces
            .iter()
            .flat_map(|t| t.covered_subject.iter().copied())
            .collect()
    }

    pub fn covered_branch_union(&self) -> BTreeSet<Branch> {
        self.traces
            .iter()
            .flat_map(|t| t.covered_subject_branches.iter().copied())
            .collect()
    }

    pub fn subject_line(&self, id: StatementId) -> u32 {
        self.subject_statement_universe.get(&id).copied().unwrap_or(0)
    }
}
