//! Coverage matrices over subject statements and the spectrum counts
//! derived from them.

use std::collections::BTreeSet;
use std::io;

use crate::dsl::StatementId;
use crate::exec::{Outcome, SuiteRunReport};
use crate::par::{self, Parallelism};

#[derive(Debug, thiserror::Error)]
pub enum SpectrumError {
    #[error("test `{test}` covers {statement}, which is not in the subject universe")]
    UniverseMismatch { test: String, statement: StatementId },
    #[error("malformed coverage matrix: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One row per subject statement, one column per test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMatrix {
    pub tests: Vec<(String, Outcome)>,
    pub statements: Vec<StatementId>,
    pub lines: Vec<u32>,
    pub rows: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub e_f: usize,
    pub n_f: usize,
    pub e_p: usize,
    pub n_p: usize,
}

impl Counts {
    pub fn failed(&self) -> usize {
        self.e_f + self.n_f
    }

    pub fn passed(&self) -> usize {
        self.e_p + self.n_p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCounts {
    pub statements: Vec<StatementId>,
    pub lines: Vec<u32>,
    pub counts: Vec<Counts>,
    pub total_failed: usize,
    pub total_passed: usize,
}

impl SpectrumCounts {
    pub fn get(&self, id: StatementId) -> Option<Counts> {
        let i = self.statements.iter().position(|s| *s == id)?;
        Some(self.counts[i])
    }
}

pub fn build_matrix(report: &SuiteRunReport) -> Result<CoverageMatrix, SpectrumError> {
    for t in &report.traces {
        if let Some(s) = t
            .covered_subject
            .iter()
            .find(|s| !report.subject_statement_universe.contains_key(s))
        {
            return Err(SpectrumError::UniverseMismatch {
                test: t.test_name.clone(),
                statement: *s,
            });
        }
    }
    let statements: Vec<StatementId> = report.subject_statement_universe.keys().copied().collect();
    let lines = report.subject_statement_universe.values().copied().collect();
    let rows = statements
        .iter()
        .map(|s| {
            report
                .traces
                .iter()
                .map(|t| t.covered_subject.contains(s))
                .collect()
        })
        .collect();
    Ok(CoverageMatrix {
        tests: report
            .traces
            .iter()
            .map(|t| (t.test_name.clone(), t.outcome))
            .collect(),
        statements,
        lines,
        rows,
    })
}

pub fn count_spectrum(matrix: &CoverageMatrix) -> SpectrumCounts {
    count_spectrum_with(matrix, Parallelism::default())
}

pub fn count_spectrum_with(matrix: &CoverageMatrix, par: Parallelism) -> SpectrumCounts {
    let failed: Vec<bool> = matrix
        .tests
        .iter()
        .map(|(_, o)| *o == Outcome::Failed)
        .collect();
    let total_failed = failed.iter().filter(|f| **f).count();
    let total_passed = failed.len() - total_failed;
    let counts = par::map(par, &matrix.rows, |row| {
        let mut c = Counts::default();
        for (covered, is_failed) in row.iter().zip(&failed) {
            if *is_failed {
                c.e_f += usize::from(*covered);
            } else {
                c.e_p += usize::from(*covered);
            }
        }
        c.n_f = total_failed - c.e_f;
        c.n_p = total_passed - c.e_p;
        c
    });
    SpectrumCounts {
        statements: matrix.statements.clone(),
        lines: matrix.lines.clone(),
        counts,
        total_failed,
        total_passed,
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Passed => "passed",
        Outcome::Failed => "failed",
    }
}

impl CoverageMatrix {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SpectrumError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["statement".to_string(), "line".to_string()];
        header.extend(self.tests.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        let mut outcomes = vec!["outcome".to_string(), String::new()];
        outcomes.extend(self.tests.iter().map(|(_, o)| outcome_name(*o).to_string()));
        w.write_record(&outcomes)?;
        for ((id, line), row) in self.statements.iter().zip(&self.lines).zip(&self.rows) {
            let mut rec = vec![id.0.to_string(), line.to_string()];
            rec.extend(row.iter().map(|c| if *c { "1" } else { "0" }.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads the format written by [`CoverageMatrix::write_csv`]. An empty
    /// line cell reads as line 0.
    pub fn read_csv<R: io::Read>(input: R) -> Result<CoverageMatrix, SpectrumError> {
        let bad = |m: String| SpectrumError::Format(m);
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut records = r.records();
        let header = records.next().ok_or_else(|| bad("missing header row".into()))??;
        if header.len() < 2 || &header[0] != "statement" || &header[1] != "line" {
            return Err(bad("header must start with `statement,line`".into()));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(bad("duplicate test name in header".into()));
        }
        let outcome_row = records.next().ok_or_else(|| bad("missing outcome row".into()))??;
        if outcome_row.get(0) != Some("outcome") || outcome_row.len() != header.len() {
            return Err(bad("second row must be `outcome,,<outcome per test>`".into()));
        }
        let mut tests = Vec::with_capacity(names.len());
        for (name, cell) in names.into_iter().zip(outcome_row.iter().skip(2)) {
            let o = match cell {
                "passed" | "pass" | "p" => Outcome::Passed,
                "failed" | "fail" | "f" => Outcome::Failed,
                other => return Err(bad(format!("unknown outcome `{other}` for `{name}`"))),
            };
            tests.push((name, o));
        }
        let (mut statements, mut lines, mut rows) = (Vec::new(), Vec::new(), Vec::new());
        let mut seen = BTreeSet::new();
        for rec in records {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(bad(format!("row `{}` has {} cells", &rec[0], rec.len())));
            }
            let id = rec[0]
                .trim_start_matches('s')
                .parse::<u32>()
                .map_err(|_| bad(format!("bad statement id `{}`", &rec[0])))?;
            if !seen.insert(id) {
                return Err(bad(format!("duplicate statement {id}")));
            }
            let line = if rec[1].is_empty() {
                0
            } else {
                rec[1]
                    .parse()
                    .map_err(|_| bad(format!("bad line `{}`", &rec[1])))?
            };
            let mut row = Vec::with_capacity(tests.len());
            for cell in rec.iter().skip(2) {
                row.push(match cell {
                    "1" => true,
                    "0" => false,
                    other => return Err(bad(format!("coverage cell must be 0 or 1, got `{other}`"))),
                });
            }
            statements.push(StatementId(id));
            lines.push(line);
            rows.push(row);
        }
        Ok(CoverageMatrix {
            tests,
            statements,
            lines,
            rows,
        })
    }
}
