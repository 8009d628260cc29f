//! Scenarios, the corpus generator and the three-setting pipeline.

mod generate;
mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use generate::{generate_corpus, generate_corpus_with, generate_scenario, GenOptions, Shape};
pub use pipeline::{
    aggregate, aggregate_evals, run_corpus, run_pipeline, write_aggregate, write_outputs, CoverageSummary,
    EvalDoc, PipelineOutput,
};

use crate::dsl::{parse_unit_with, pretty_print, ParseError, ParseOptions, SourceUnit, UnitKind};
use crate::exec::{check_calls, DEFAULT_FUEL};
use crate::metrics::GroundTruth;
use crate::par::Parallelism;
use crate::sbfl::TieRule;
use crate::transform::SlicePolicy;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("scenario `{id}`: {message}")]
    Invalid { id: String, message: String },
    #[error("no failing test after {attempts} attempts (scenario index {index})")]
    GenerationRetryExhausted { index: usize, attempts: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Handwritten,
    Generated { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub subject: SourceUnit,
    pub suite: SourceUnit,
    pub truth: GroundTruth,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    id: String,
    provenance: Provenance,
}

pub const SUBJECT_FILE: &str = "subject.sub";
pub const SUITE_FILE: &str = "suite.tst";
pub const TRUTH_FILE: &str = "truth.json";
pub const META_FILE: &str = "scenario.json";

impl Scenario {
    /// Checks the cross-unit invariants: faults exist in the subject and
    /// every call in the suite resolves.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |message: String| HarnessError::Invalid {
            id: self.id.clone(),
            message,
        };
        if self.truth.faulty_statements.is_empty() {
            return Err(invalid("ground truth names no faulty statement".into()));
        }
        let subject_ids: Vec<_> = self
            .subject
            .functions
            .iter()
            .flat_map(|f| {
                let mut ids = Vec::new();
                crate::dsl::walk_statements(&f.body, &mut |s| ids.push(s.id));
                ids
            })
            .collect();
        for s in &self.truth.faulty_statements {
            if !subject_ids.contains(s) {
                return Err(invalid(format!("faulty statement {s} is not in the subject")));
            }
        }
        for t in &self.suite.tests {
            check_calls(&self.subject, t).map_err(|e| invalid(format!("test `{}`: {e}", t.name)))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Scenario, HarnessError> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(io_err(&p))
        };
        let opts = ParseOptions::default();
        let parse = |name: &str, kind| {
            let path = dir.join(name).display().to_string();
            parse_unit_with(&read(name)?, kind, &path, &opts)
                .map_err(|source| HarnessError::Parse { path, source })
        };
        let subject = parse(SUBJECT_FILE, UnitKind::Subject)?;
        let suite = parse(SUITE_FILE, UnitKind::Testsuite)?;
        let truth_path = dir.join(TRUTH_FILE);
        let truth: GroundTruth =
            serde_json::from_str(&read(TRUTH_FILE)?).map_err(|source| HarnessError::Json {
                path: truth_path,
                source,
            })?;
        let meta_path = dir.join(META_FILE);
        let meta = if meta_path.exists() {
            serde_json::from_str(&read(META_FILE)?).map_err(|source| HarnessError::Json {
                path: meta_path,
                source,
            })?
        } else {
            Meta {
                id: truth.scenario_id.clone(),
                provenance: Provenance::Handwritten,
            }
        };
        let scenario = Scenario {
            id: meta.id,
            subject,
            suite,
            truth,
            provenance: meta.provenance,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let meta = Meta {
            id: self.id.clone(),
            provenance: self.provenance,
        };
        let files = [
            (SUBJECT_FILE, pretty_print(&self.subject)),
            (SUITE_FILE, pretty_print(&self.suite)),
            (TRUTH_FILE, to_json(&self.truth)),
            (META_FILE, to_json(&meta)),
        ];
        for (name, text) in files {
            let p = dir.join(name);
            fs::write(&p, text).map_err(io_err(&p))?;
        }
        Ok(())
    }
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone)]
pub struct Config {
    pub tie_rule: TieRule,
    pub k_values: Vec<usize>,
    pub fuel: u64,
    pub slice_policy: SlicePolicy,
    /// Call-effect dependence edges in the slicer.
    pub call_effect: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub parallelism: Parallelism,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tie_rule: TieRule::Paper,
            k_values: vec![5, 10],
            fuel: DEFAULT_FUEL,
            slice_policy: SlicePolicy::MultiAssertionOnly,
            call_effect: true,
            seed: 0,
            output_dir: PathBuf::from("results"),
            parallelism: Parallelism::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.k_values.is_empty() {
            return Err(HarnessError::Config("k values must not be empty".into()));
        }
        if self.k_values.contains(&0) || self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config(
                "k values must be positive and strictly increasing".into(),
            ));
        }
        if self.fuel == 0 {
            return Err(HarnessError::Config("fuel must be positive".into()));
        }
        Ok(())
    }

    pub fn suite_options(&self) -> crate::exec::SuiteOptions {
        crate::exec::SuiteOptions {
            fuel: self.fuel,
            slice_policy: self.slice_policy,
            dependence: crate::transform::DependenceOptions {
                call_effect: self.call_effect,
            },
            parallelism: self.parallelism,
        }
    }
}
