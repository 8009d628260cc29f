use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, to_json, Config, HarnessError, Scenario};
use crate::detector::{classify, TerminationReport};
use crate::dsl::pretty_print;
use crate::exec::{run_tests, Setting, SuiteRunReport};
use crate::metrics::{compare_settings, evaluate, AggregateReport, EvalResult};
use crate::par;
use crate::sbfl::{rank, Formula, Ranking, SbflError};
use crate::spectrum::{build_matrix, count_spectrum_with, CoverageMatrix};
use crate::transform::{slice_suite, trycatch_rewrite_suite, SlicedSuite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub setting: Setting,
    pub tests: usize,
    pub failed: usize,
    pub statements: usize,
    pub covered_statements: usize,
    pub branches: usize,
    pub covered_branches: usize,
}

/// Contents of `eval.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDoc {
    pub scenario_id: String,
    pub coverage: Vec<CoverageSummary>,
    pub results: Vec<EvalResult>,
    /// Stages that did not complete, e.g. localization with no failed test.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub scenario_id: String,
    pub reports: BTreeMap<Setting, SuiteRunReport>,
    pub matrices: BTreeMap<Setting, CoverageMatrix>,
    pub sliced: SlicedSuite,
    pub trycatch_display: crate::dsl::SourceUnit,
    pub rankings: BTreeMap<(Formula, Setting), Ranking>,
    pub termination: TerminationReport,
    pub evals: Vec<EvalResult>,
    pub notes: Vec<String>,
}

impl PipelineOutput {
    pub fn report(&self, setting: Setting) -> &SuiteRunReport {
        &self.reports[&setting]
    }

    pub fn ranking(&self, formula: Formula, setting: Setting) -> Option<&Ranking> {
        self.rankings.get(&(formula, setting))
    }

    pub fn eval(&self, formula: Formula, setting: Setting) -> Option<&EvalResult> {
        self.evals
            .iter()
            .find(|e| e.formula == formula && e.setting == setting)
    }

    pub fn eval_doc(&self) -> EvalDoc {
        EvalDoc {
            scenario_id: self.scenario_id.clone(),
            coverage: self
                .reports
                .iter()
                .map(|(setting, r)| CoverageSummary {
                    setting: *setting,
                    tests: r.traces.len(),
                    failed: r.failed_count(),
                    statements: r.subject_statement_universe.len(),
                    covered_statements: r.covered_subject_union().len(),
                    branches: r.subject_branch_universe.len(),
                    covered_branches: r.covered_branch_union().len(),
                })
                .collect(),
            results: self.evals.clone(),
            notes: self.notes.clone(),
        }
    }
}

/// Original run, termination classification, Trycatch and Slicing re-runs,
/// spectra, both formulas and all metrics. Stage failures become notes.
pub fn run_pipeline(scenario: &Scenario, config: &Config) -> PipelineOutput {
    let opts = config.suite_options();
    let sliced = slice_suite(
        &scenario.suite,
        &scenario.subject,
        opts.slice_policy,
        &opts.dependence,
    );
    let mut reports = BTreeMap::new();
    for setting in Setting::ALL {
        let suite = if setting == Setting::Slicing {
            &sliced.unit
        } else {
            &scenario.suite
        };
        let mut report = run_tests(&scenario.subject, suite, setting, &opts);
        if setting == Setting::Slicing {
            report.warnings.extend(sliced.warnings.iter().cloned());
        }
        reports.insert(setting, report);
    }
    let termination = classify(&reports[&Setting::Original]);

    let mut notes = Vec::new();
    let mut matrices = BTreeMap::new();
    let mut rankings = BTreeMap::new();
    let mut evals = Vec::new();
    for (setting, report) in &reports {
        let matrix = match build_matrix(report) {
            Ok(m) => m,
            Err(e) => {
                notes.push(format!("{setting}: spectrum: {e}"));
                continue;
            }
        };
        let counts = count_spectrum_with(&matrix, config.parallelism);
        matrices.insert(*setting, matrix);
        if counts.total_failed == 0 {
            notes.push(format!("{setting}: localization skipped: {}", SbflError::NoFailedTests));
            continue;
        }
        for formula in Formula::ALL {
            let scores = match formula.scores(&counts) {
                Ok(s) => s,
                Err(e) => {
                    notes.push(format!("{setting}: {formula}: {e}"));
                    continue;
                }
            };
            let ranking = rank(&scores, formula, config.tie_rule);
            match evaluate(
                &ranking,
                &scenario.truth,
                report.subject_statement_universe.len(),
                *setting,
                &config.k_values,
            ) {
                Ok(e) => evals.push(e),
                Err(e) => notes.push(format!("{setting}: {formula}: metrics: {e}")),
            }
            rankings.insert((formula, *setting), ranking);
        }
    }
    PipelineOutput {
        scenario_id: scenario.id.clone(),
        trycatch_display: trycatch_rewrite_suite(&scenario.suite),
        reports,
        matrices,
        sliced,
        rankings,
        termination,
        evals,
        notes,
    }
}

/// Writes the per-scenario artifacts into `dir`, replacing it. Files are
/// staged in a sibling directory that is renamed into place at the end.
pub fn write_outputs(out: &PipelineOutput, dir: &Path) -> Result<(), HarnessError> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| out.scenario_id.clone());
    let staging = parent.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;

    let mut files: Vec<(String, String)> = Vec::new();
    for (setting, report) in &out.reports {
        files.push((format!("report.{setting}.json"), report.to_json() + "\n"));
    }
    for (setting, matrix) in &out.matrices {
        files.push((format!("coverage.{setting}.csv"), matrix.to_csv()));
    }
    for ((formula, setting), ranking) in &out.rankings {
        files.push((format!("ranking.{formula}.{setting}.json"), to_json(ranking)));
    }
    files.push(("termination.json".into(), to_json(&out.termination)));
    let mut csv_buf = Vec::new();
    out.termination.write_csv(&mut csv_buf)?;
    files.push((
        "termination.csv".into(),
        String::from_utf8(csv_buf).expect("csv is utf-8"),
    ));
    files.push(("eval.json".into(), to_json(&out.eval_doc())));
    files.push(("suite.trycatch.tst".into(), pretty_print(&out.trycatch_display)));
    files.push(("suite.sliced.tst".into(), pretty_print(&out.sliced.unit)));
    files.push(("slices.json".into(), out.sliced.sidecar_json() + "\n"));

    for (file, text) in files {
        let p = staging.join(file);
        fs::write(&p, text).map_err(io_err(&p))?;
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::rename(&staging, dir).map_err(io_err(dir))?;
    Ok(())
}

/// Compares settings over the scenarios that were localized under every
/// setting with both formulas; the rest are listed in the returned notes.
pub fn aggregate(group: &str, outputs: &[PipelineOutput]) -> (AggregateReport, Vec<String>) {
    let docs: Vec<EvalDoc> = outputs.iter().map(PipelineOutput::eval_doc).collect();
    aggregate_evals(group, &docs)
}

pub fn aggregate_evals(group: &str, docs: &[EvalDoc]) -> (AggregateReport, Vec<String>) {
    let mut by_setting: BTreeMap<Setting, Vec<EvalResult>> = BTreeMap::new();
    let mut notes = Vec::new();
    for doc in docs {
        let complete = Setting::ALL.iter().all(|s| {
            Formula::ALL
                .iter()
                .all(|f| doc.results.iter().any(|e| e.setting == *s && e.formula == *f))
        });
        if !complete {
            notes.push(format!(
                "{}: excluded from aggregate: {}",
                doc.scenario_id,
                doc.notes.join("; ")
            ));
            continue;
        }
        for e in &doc.results {
            by_setting.entry(e.setting).or_default().push(e.clone());
        }
    }
    let report = compare_settings(group, &by_setting)
        .expect("scenario sets agree after filtering to complete scenarios");
    (report, notes)
}

pub fn write_aggregate(
    report: &AggregateReport,
    notes: &[String],
    dir: &Path,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    #[derive(Serialize)]
    struct Doc<'a> {
        #[serde(flatten)]
        report: &'a AggregateReport,
        notes: &'a [String],
    }
    let p = dir.join("aggregate.json");
    fs::write(&p, to_json(&Doc { report, notes })).map_err(io_err(&p))?;
    let mut buf = Vec::new();
    report.write_summary_csv(&mut buf)?;
    let p = dir.join("summary.csv");
    fs::write(&p, buf).map_err(io_err(&p))?;
    let mut buf = Vec::new();
    report.write_comparison_csv(&mut buf)?;
    let p = dir.join("comparison.csv");
    fs::write(&p, buf).map_err(io_err(&p))?;
    Ok(())
}

/// Runs every scenario (in parallel when enabled), writes each under
/// `config.output_dir/<id>/`, then writes the aggregate files.
pub fn run_corpus(
    scenarios: &[Scenario],
    config: &Config,
) -> Result<(Vec<PipelineOutput>, AggregateReport), HarnessError> {
    config.validate()?;
    let results = par::map(config.parallelism, scenarios, |s| {
        let out = run_pipeline(s, config);
        write_outputs(&out, &config.output_dir.join(&s.id)).map(|_| out)
    });
    let outputs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (report, notes) = aggregate("all", &outputs);
    write_aggregate(&report, &notes, &config.output_dir)?;
    Ok((outputs, report))
}
