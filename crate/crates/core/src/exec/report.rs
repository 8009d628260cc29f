//! JSON form of [`SuiteRunReport`]. Field names are a stable format; see
//! docs/formats.md. The document carries both statement ids and lines, so a
//! report can be read back losslessly (this is what `detect --from-log` does).

use serde::{Deserialize, Serialize};

use super::trace::*;
use crate::dsl::StatementId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub mode: Setting,
    pub traces: Vec<TraceDoc>,
    pub universe: UniverseDoc,
    pub test_lines: Vec<StatementLine>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDoc {
    pub test: String,
    pub outcome: Outcome,
    pub failures: Vec<FailureDoc>,
    pub covered_subject_lines: Vec<u32>,
    pub covered_branches: Vec<BranchDoc>,
    pub skipped_test_lines: Vec<u32>,
    pub covered_subject: Vec<StatementId>,
    pub covered_test: Vec<StatementId>,
    pub skipped_test: Vec<StatementId>,
    pub test_statements: usize,
    pub top_level_statements: usize,
    pub assertions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDoc {
    pub kind: FailureKind,
    pub line: u32,
    pub ordinal: Option<usize>,
    pub message: String,
    pub statement: StatementId,
    pub in_subject: bool,
    pub test_line: u32,
    pub test_statement: StatementId,
    pub test_index: usize,
    pub chain: Vec<Location>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchDoc {
    pub statement: StatementId,
    pub line: u32,
    pub arm: Arm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementLine {
    pub id: StatementId,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseDoc {
    pub statements: Vec<StatementLine>,
    pub branches: Vec<BranchDoc>,
}

fn dedup_lines(mut lines: Vec<u32>) -> Vec<u32> {
    lines.sort_unstable();
    lines.dedup();
    lines
}

impl SuiteRunReport {
    pub fn to_doc(&self) -> ReportDoc {
        let branch_doc = |b: &Branch| BranchDoc {
            statement: b.statement,
            line: self.subject_line(b.statement),
            arm: b.arm,
        };
        let test_line = |id: &StatementId| self.test_lines.get(id).copied().unwrap_or(0);
        let traces = self
            .traces
            .iter()
            .map(|t| TraceDoc {
                test: t.test_name.clone(),
                outcome: t.outcome,
                failures: t
                    .failures
                    .iter()
                    .map(|f| FailureDoc {
                        kind: f.kind,
                        line: f.location.line,
                        ordinal: f.assertion_ordinal,
                        message: f.message.clone(),
                        statement: f.location.statement,
                        in_subject: f.in_subject,
                        test_line: f.test_location.line,
                        test_statement: f.test_location.statement,
                        test_index: f.test_index,
                        chain: f.chain.clone(),
                    })
                    .collect(),
                covered_subject_lines: dedup_lines(
                    t.covered_subject.iter().map(|s| self.subject_line(*s)).collect(),
                ),
                covered_branches: t.covered_subject_branches.iter().map(branch_doc).collect(),
                skipped_test_lines: dedup_lines(t.skipped_test.iter().map(test_line).collect()),
                covered_subject: t.covered_subject.iter().copied().collect(),
                covered_test: t.covered_test.iter().copied().collect(),
                skipped_test: t.skipped_test.iter().copied().collect(),
                test_statements: t.test_statement_count,
                top_level_statements: t.top_level_count,
                assertions: t.assertion_count,
            })
            .collect();
        ReportDoc {
            mode: self.mode,
            traces,
            universe: UniverseDoc {
                statements: self
                    .subject_statement_universe
                    .iter()
                    .map(|(id, line)| StatementLine {
                        id: *id,
                        line: *line,
                    })
                    .collect(),
                branches: self.subject_branch_universe.iter().map(branch_doc).collect(),
            },
            test_lines: self
                .test_lines
                .iter()
                .map(|(id, line)| StatementLine {
                    id: *id,
                    line: *line,
                })
                .collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn from_doc(doc: &ReportDoc) -> SuiteRunReport {
        let traces = doc
            .traces
            .iter()
            .map(|t| ExecutionTrace {
                test_name: t.test.clone(),
                outcome: t.outcome,
                failures: t
                    .failures
                    .iter()
                    .map(|f| FailureEvent {
                        kind: f.kind,
                        location: Location {
                            statement: f.statement,
                            line: f.line,
                        },
                        in_subject: f.in_subject,
                        test_location: Location {
                            statement: f.test_statement,
                            line: f.test_line,
                        },
                        test_index: f.test_index,
                        assertion_ordinal: f.ordinal,
                        message: f.message.clone(),
                        chain: f.chain.clone(),
                    })
                    .collect(),
                covered_subject: t.covered_subject.iter().copied().collect(),
                covered_subject_branches: t
                    .covered_branches
                    .iter()
                    .map(|b| Branch {
                        statement: b.statement,
                        arm: b.arm,
                    })
                    .collect(),
                covered_test: t.covered_test.iter().copied().collect(),
                skipped_test: t.skipped_test.iter().copied().collect(),
                test_statement_count: t.test_statements,
                top_level_count: t.top_level_statements,
                assertion_count: t.assertions,
            })
            .collect();
        SuiteRunReport {
            mode: doc.mode,
            traces,
            subject_statement_universe: doc
                .universe
                .statements
                .iter()
                .map(|s| (s.id, s.line))
                .collect(),
            subject_branch_universe: doc
                .universe
                .branches
                .iter()
                .map(|b| Branch {
                    statement: b.statement,
                    arm: b.arm,
                })
                .collect(),
            test_lines: doc.test_lines.iter().map(|s| (s.id, s.line)).collect(),
            warnings: doc.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("report serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<SuiteRunReport, serde_json::Error> {
        let doc: ReportDoc = serde_json::from_str(text)?;
        Ok(SuiteRunReport::from_doc(&doc))
    }
}
