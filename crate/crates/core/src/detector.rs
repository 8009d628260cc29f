//! Early-termination classification of failed tests.

use std::io;

use serde::{Deserialize, Serialize};

use crate::exec::{ExecutionTrace, FailureKind, Setting, SuiteRunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    AssertionFailure,
    RuntimeError,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTermination {
    pub test: String,
    pub early: bool,
    pub cause: Cause,
    /// 1-based position among the top-level test statements where execution
    /// stopped.
    pub failing_statement_index: usize,
    pub top_level_statements: usize,
    pub skipped_statements: usize,
    pub test_statements: usize,
    pub skipped_fraction: f64,
    pub assertions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationReport {
    pub mode: Setting,
    /// Set when the report did not come from an Original run, where
    /// continuation changes what "early" means.
    pub flagged: bool,
    pub tests: Vec<TestTermination>,
    pub t_total: usize,
    pub t_early: usize,
    pub t_early_assert: usize,
    /// Mean skipped fraction over tests terminated early by an assertion.
    pub mean_c_noexecuted: f64,
    pub suite_tests: usize,
    pub t_multi: usize,
    pub t_multi_ratio: f64,
}

fn stop_point(trace: &ExecutionTrace, mode: Setting) -> (usize, FailureKind) {
    let errors_abort = trace
        .failures
        .iter()
        .find(|f| f.kind == FailureKind::RuntimeError);
    match (mode, errors_abort) {
        // Trycatch keeps going after assertion failures, so only an error
        // stops the test before its end
        (Setting::Trycatch, Some(e)) => (e.test_index, e.kind),
        (Setting::Trycatch, None) => (trace.top_level_count, FailureKind::AssertionFailure),
        _ => {
            let f = &trace.failures[0];
            (f.test_index, f.kind)
        }
    }
}

pub fn classify_trace(trace: &ExecutionTrace, mode: Setting) -> Option<TestTermination> {
    if trace.passed() {
        return None;
    }
    let (index, kind) = stop_point(trace, mode);
    let early = index < trace.top_level_count;
    let cause = match (early, kind) {
        (false, _) => Cause::None,
        (true, FailureKind::AssertionFailure) => Cause::AssertionFailure,
        (true, FailureKind::RuntimeError) => Cause::RuntimeError,
    };
    let skipped = trace.skipped_test.len();
    let total = trace.test_statement_count;
    Some(TestTermination {
        test: trace.test_name.clone(),
        early,
        cause,
        failing_statement_index: index,
        top_level_statements: trace.top_level_count,
        skipped_statements: skipped,
        test_statements: total,
        skipped_fraction: if total == 0 {
            0.0
        } else {
            skipped as f64 / total as f64
        },
        assertions: trace.assertion_count,
    })
}

pub fn classify(report: &SuiteRunReport) -> TerminationReport {
    let tests: Vec<TestTermination> = report
        .traces
        .iter()
        .filter_map(|t| classify_trace(t, report.mode))
        .collect();
    let t_early = tests.iter().filter(|t| t.early).count();
    let early_assert: Vec<&TestTermination> = tests
        .iter()
        .filter(|t| t.cause == Cause::AssertionFailure)
        .collect();
    let mean_c_noexecuted = if early_assert.is_empty() {
        0.0
    } else {
        early_assert.iter().map(|t| t.skipped_fraction).sum::<f64>() / early_assert.len() as f64
    };
    let suite_tests = report.traces.len();
    let t_multi = report.traces.iter().filter(|t| t.assertion_count >= 2).count();
    TerminationReport {
        mode: report.mode,
        flagged: report.mode != Setting::Original,
        t_total: tests.len(),
        t_early,
        t_early_assert: early_assert.len(),
        mean_c_noexecuted,
        suite_tests,
        t_multi,
        t_multi_ratio: if suite_tests == 0 {
            0.0
        } else {
            t_multi as f64 / suite_tests as f64
        },
        tests,
    }
}

impl TerminationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("termination report serialization is infallible")
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "mode",
            "tests",
            "T_total",
            "T_early",
            "T_earlyAssert",
            "C_noexecuted",
            "T_multi",
            "T_multi_ratio",
        ])?;
        w.write_record([
            self.mode.to_string(),
            self.suite_tests.to_string(),
            self.t_total.to_string(),
            self.t_early.to_string(),
            self.t_early_assert.to_string(),
            format!("{:.4}", self.mean_c_noexecuted),
            self.t_multi.to_string(),
            format!("{:.4}", self.t_multi_ratio),
        ])?;
        w.flush()?;
        Ok(())
    }
}
