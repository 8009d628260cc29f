use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slicefl::detector::classify;
use slicefl::dsl::{parse_unit_with, pretty_print, ParseOptions, UnitKind};
use slicefl::exec::{run_suite_with, Setting, SuiteRunReport};
use slicefl::harness::{
    aggregate_evals, generate_corpus_with, run_corpus, write_aggregate, Config, EvalDoc,
    GenOptions, Scenario, Shape,
};
use slicefl::metrics::{evaluate, GroundTruth};
use slicefl::par::Parallelism;
use slicefl::sbfl::{rank, Formula, Ranking, TieRule};
use slicefl::spectrum::{count_spectrum, CoverageMatrix};
use slicefl::transform::{slice_suite, DependenceOptions, SlicePolicy};

#[derive(Parser)]
#[command(name = "slicefl", version, about = "Early test termination and fault localization lab")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Tie rule for equal scores
    #[arg(long, global = true, default_value = "paper")]
    tie_rule: TieRule,
    /// Top@k cut-offs, comma separated
    #[arg(long = "k", global = true, value_delimiter = ',', default_value = "5,10")]
    k_values: Vec<usize>,
    /// Statement budget per test
    #[arg(long, global = true, default_value_t = slicefl::exec::DEFAULT_FUEL)]
    fuel: u64,
    /// Which tests the slicer splits
    #[arg(long, global = true, default_value = "multi_assertion_only")]
    slice_policy: SlicePolicy,
    /// Slice with pure def-use dependences only
    #[arg(long, global = true)]
    no_call_effect: bool,
    #[arg(long, global = true, env = "SLICEFL_SEED", default_value_t = 0)]
    seed: u64,
    /// Run everything on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
}

impl ConfigArgs {
    fn config(&self, output_dir: PathBuf) -> Config {
        Config {
            tie_rule: self.tie_rule,
            k_values: self.k_values.clone(),
            fuel: self.fuel,
            slice_policy: self.slice_policy,
            call_effect: !self.no_call_effect,
            seed: self.seed,
            output_dir,
            parallelism: if self.sequential {
                Parallelism::Sequential
            } else {
                Parallelism::default()
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the three-setting pipeline on scenario directories
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Generate a corpus of scenarios with seeded faults
    Gen {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value = "small")]
        shape: Shape,
        #[arg(long)]
        allow_state_infection: bool,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
    /// Early-termination report for a scenario or a saved run report
    Detect {
        /// Scenario directory to run in Original mode
        #[arg(required_unless_present = "from_log")]
        scenario: Option<PathBuf>,
        /// Classify a serialized run report instead of running
        #[arg(long, conflicts_with = "scenario")]
        from_log: Option<PathBuf>,
        /// Print the one-row-per-mode CSV instead of JSON
        #[arg(long)]
        csv: bool,
    },
    /// Emit the sliced suite of a scenario
    Slice {
        scenario: PathBuf,
        /// Output .tst file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the slice sidecar JSON here
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Rank statements from a coverage matrix CSV
    Localize {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "ochiai")]
        formula: Formula,
    },
    /// Score a ranking against ground truth
    Eval {
        #[arg(long)]
        ranking: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Statement count for EXAM; defaults to the ranking length
        #[arg(long)]
        total: Option<usize>,
        #[arg(long, default_value = "original")]
        setting: Setting,
    },
    /// Aggregate the eval.json files under a results directory
    Report {
        results: PathBuf,
        /// Where to write the aggregate files; defaults to the results dir
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { scenarios, out } => {
            let config = cli.config.config(out.clone());
            let loaded = scenarios
                .iter()
                .map(|d| Scenario::load(d))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let (outputs, report) = run_corpus(&loaded, &config)?;
            for o in &outputs {
                for note in &o.notes {
                    eprintln!("{}: {note}", o.scenario_id);
                }
            }
            println!(
                "{} scenario(s) written to {}",
                outputs.len(),
                config.output_dir.display()
            );
            for s in &report.summaries {
                println!(
                    "{:<10} {:<9} MFR {:>7.2}  EXAM {:.4}",
                    s.formula.name(),
                    s.setting.name(),
                    s.mfr,
                    s.mean_exam
                );
            }
            Ok(())
        }
        Command::Gen {
            count,
            shape,
            allow_state_infection,
            out,
        } => {
            let opts = GenOptions {
                shape: *shape,
                allow_state_infection: *allow_state_infection,
                parallelism: cli.config.config(out.clone()).parallelism,
            };
            let corpus = generate_corpus_with(cli.config.seed, *count, &opts)?;
            for s in &corpus {
                s.save(&out.join(&s.id))?;
            }
            println!("{} scenario(s) written to {}", corpus.len(), out.display());
            Ok(())
        }
        Command::Detect {
            scenario,
            from_log,
            csv,
        } => {
            let report = match (scenario, from_log) {
                (_, Some(log)) => SuiteRunReport::from_json(&read(log)?)
                    .map_err(|e| format!("{}: {e}", log.display()))?,
                (Some(dir), None) => {
                    let s = Scenario::load(dir)?;
                    let opts = cli.config.config(PathBuf::new()).suite_options();
                    run_suite_with(&s.subject, &s.suite, Setting::Original, &opts)
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let termination = classify(&report);
            if *csv {
                termination.write_csv(std::io::stdout())?;
            } else {
                println!("{}", termination.to_json());
            }
            Ok(())
        }
        Command::Slice {
            scenario,
            out,
            sidecar,
        } => {
            let opts = ParseOptions {
                allow_trailing_code: true,
            };
            let (subject_path, suite_path) = (scenario.join("subject.sub"), scenario.join("suite.tst"));
            let subject = parse_unit_with(
                &read(&subject_path)?,
                UnitKind::Subject,
                &subject_path.display().to_string(),
                &opts,
            )?;
            let suite = parse_unit_with(
                &read(&suite_path)?,
                UnitKind::Testsuite,
                &suite_path.display().to_string(),
                &opts,
            )?;
            let deps = DependenceOptions {
                call_effect: !cli.config.no_call_effect,
            };
            let sliced = slice_suite(&suite, &subject, cli.config.slice_policy, &deps);
            for w in &sliced.warnings {
                eprintln!("warning: {w}");
            }
            let text = pretty_print(&sliced.unit);
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            if let Some(p) = sidecar {
                fs::write(p, sliced.sidecar_json() + "\n")?;
            }
            Ok(())
        }
        Command::Localize { matrix, formula } => {
            let file = fs::File::open(matrix).map_err(|e| format!("{}: {e}", matrix.display()))?;
            let m = CoverageMatrix::read_csv(file)?;
            let counts = count_spectrum(&m);
            let scores = formula.scores(&counts)?;
            println!("{}", rank(&scores, *formula, cli.config.tie_rule).to_json());
            Ok(())
        }
        Command::Eval {
            ranking,
            truth,
            total,
            setting,
        } => {
            let ranking: Ranking = read_json(ranking)?;
            let truth: GroundTruth = read_json(truth)?;
            let total = total.unwrap_or(ranking.entries.len());
            if total == 0 {
                return Err("ranking is empty".into());
            }
            let result = evaluate(&ranking, &truth, total, *setting, &cli.config.k_values)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
        Command::Report { results, out } => {
            let mut docs: BTreeMap<String, EvalDoc> = BTreeMap::new();
            let entries = fs::read_dir(results).map_err(|e| format!("{}: {e}", results.display()))?;
            for entry in entries {
                let p = entry?.path().join("eval.json");
                if p.is_file() {
                    let doc: EvalDoc = read_json(&p)?;
                    docs.insert(doc.scenario_id.clone(), doc);
                }
            }
            if docs.is_empty() {
                return Err(format!("no eval.json under {}", results.display()).into());
            }
            let docs: Vec<EvalDoc> = docs.into_values().collect();
            let (report, notes) = aggregate_evals("all", &docs);
            let dir = out.clone().unwrap_or_else(|| results.clone());
            write_aggregate(&report, &notes, &dir)?;
            print!("{}", read(&dir.join("summary.csv"))?);
            print!("{}", read(&dir.join("comparison.csv"))?);
            Ok(())
        }
    }
}
