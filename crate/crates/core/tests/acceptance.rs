//! Acceptance suite. Runs as a plain binary so every criterion prints its
//! verdict line even when the run is green.
//!
//! Criteria listed in `KNOWN_RED` are expected to fail; the reasoning is in
//! the project's decision notes. The binary exits non-zero when any other
//! criterion fails, or when a known-red one starts passing.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use slicefl::detector::classify;
use slicefl::dsl::{parse_unit, StatementId, UnitKind};
use slicefl::exec::{run_suite, Setting, DEFAULT_FUEL};
use slicefl::harness::{
    aggregate_evals, generate_corpus, run_corpus, run_pipeline, Config, EvalDoc, PipelineOutput,
    Scenario, Shape,
};
use slicefl::metrics::{exam_score, GroundTruth};
use slicefl::sbfl::{ochiai_score, rank, Formula, Suspiciousness, TieRule};
use slicefl::spectrum::Counts;

const KNOWN_RED: &[u32] = &[10];
const CORPUS_SEED: u64 = 0;
const CORPUS_SIZE: usize = 100;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Corpus {
    scenarios: Vec<Scenario>,
    outputs: Vec<PipelineOutput>,
    tree: tempfile::TempDir,
}

struct Ctx {
    corpus: Option<Corpus>,
    corpus_time: Duration,
}

impl Ctx {
    fn corpus(&mut self) -> &Corpus {
        if self.corpus.is_none() {
            let start = Instant::now();
            let scenarios = generate_corpus(CORPUS_SEED, CORPUS_SIZE, Shape::Small).expect("corpus");
            let tree = tempfile::tempdir().unwrap();
            let config = Config {
                seed: CORPUS_SEED,
                output_dir: tree.path().to_path_buf(),
                ..Config::default()
            };
            let (outputs, _) = run_corpus(&scenarios, &config).expect("pipeline");
            self.corpus_time = start.elapsed();
            self.corpus = Some(Corpus {
                scenarios,
                outputs,
                tree,
            });
        }
        self.corpus.as_ref().unwrap()
    }
}

fn c1_exam_example(_: &mut Ctx) -> Verdict {
    let scores = [0.6, 0.7, 1.0, 0.5, 0.4];
    let susp: Vec<Suspiciousness> = scores
        .iter()
        .enumerate()
        .map(|(i, &score)| Suspiciousness {
            statement: StatementId(i as u32),
            line: i as u32 + 1,
            score,
        })
        .collect();
    let ranking = rank(&susp, Formula::Ochiai, TieRule::Paper);
    let truth = GroundTruth {
        scenario_id: "exam".into(),
        faulty_statements: BTreeSet::from([StatementId(1)]),
        faulty_lines: vec![2],
    };
    let exam = exam_score(&ranking, &truth, 5).unwrap();
    verdict(exam == 0.40, format!("EXAM = {exam}"))
}

/// floor(sqrt(n)) by Newton iteration on integers.
fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = n;
    let mut y = (x + 1) / 2;
    while y < x {
        x = y;
        y = (x + n / x) / 2;
    }
    x
}

fn c2_ochiai_pinning(_: &mut Ctx) -> Verdict {
    let score = |e_f, n_f, e_p| ochiai_score(Counts { e_f, n_f, e_p, n_p: 0 });
    let perfect = score(1, 0, 0);
    let zero = score(0, 3, 4);
    let mid = score(3, 1, 2);
    // 3 / sqrt(4 * 5) = sqrt(9/20), evaluated to 15 decimal places in integers
    let scale = 10u128.pow(15);
    let oracle = isqrt(9 * scale * scale / 20) as f64 / scale as f64;
    let ok = perfect == 1.0 && zero == 0.0 && (mid - oracle).abs() <= 1e-6;
    verdict(
        ok,
        format!("(1,0,0) -> {perfect}, e_f=0 -> {zero}, (3,1,2) -> {mid:.9} (oracle {oracle:.9})"),
    )
}

fn c3_tie_pinning(_: &mut Ctx) -> Verdict {
    let direct = TieRule::Paper.group_rank(3, 2);
    let susp: Vec<Suspiciousness> = [0.9, 0.5, 0.5, 0.5, 0.1]
        .iter()
        .enumerate()
        .map(|(i, &score)| Suspiciousness {
            statement: StatementId(i as u32),
            line: i as u32 + 1,
            score,
        })
        .collect();
    let ranking = rank(&susp, Formula::Ochiai, TieRule::Paper);
    let group: Vec<f64> = (1..=3)
        .map(|i| ranking.rank_of(StatementId(i)).unwrap())
        .collect();
    let ok = direct == 2.5 && group.iter().all(|&r| r == 2.5);
    verdict(ok, format!("n=3, k=2 -> {direct}; ranked group {group:?}"))
}

fn covered_lines(out: &PipelineOutput, setting: Setting) -> BTreeSet<u32> {
    let report = out.report(setting);
    report
        .covered_subject_union()
        .into_iter()
        .map(|id| report.subject_line(id))
        .collect()
}

fn c4_solve_scenario(_: &mut Ctx) -> Verdict {
    let scenario = common::load_golden("solve_scenario");
    let out = run_pipeline(&scenario, &Config::default());
    let test = "test_sine_function";
    let lines_of = |setting: Setting| -> BTreeSet<u32> {
        let report = out.report(setting);
        report
            .trace(test)
            .unwrap()
            .covered_subject
            .iter()
            .map(|id| report.subject_line(*id))
            .collect()
    };
    // traced by hand through the four solver calls of the test
    let original_expected: BTreeSet<u32> =
        [4, 24, 25, 26, 28, 29, 30, 36, 37, 40, 41, 42].into();
    let mut trycatch_expected = original_expected.clone();
    trycatch_expected.extend([44, 47, 48, 49]);
    let (bug1, bug2) = (StatementId(23), StatementId(28));
    let buggy: BTreeSet<StatementId> = [bug1, bug2].into();
    assert_eq!(scenario.truth.faulty_statements, buggy);

    let original = lines_of(Setting::Original);
    let trycatch = lines_of(Setting::Trycatch);
    let orig_union = covered_lines(&out, Setting::Original);
    let buggy_covered_orig = [42u32, 49].iter().filter(|l| orig_union.contains(l)).count();
    let score = |setting, id| {
        out.ranking(Formula::Ochiai, setting)
            .and_then(|r| r.score_of(id))
            .unwrap_or(f64::NAN)
    };
    let (t1, t2, o2) = (
        score(Setting::Trycatch, bug1),
        score(Setting::Trycatch, bug2),
        score(Setting::Original, bug2),
    );
    let ok = original == original_expected
        && trycatch == trycatch_expected
        && buggy_covered_orig == 1
        && t1 > 0.0
        && t2 > 0.0
        && o2 == 0.0;
    verdict(
        ok,
        format!(
            "Original covers {buggy_covered_orig}/2 buggy lines; Ochiai trycatch ({t1:.3}, {t2:.3}), second under original {o2}"
        ),
    )
}

fn c5_lang41(_: &mut Ctx) -> Verdict {
    let scenario = common::load_golden("lang41_analog");
    let out = run_pipeline(&scenario, &Config::default());
    let failed = |s| out.report(s).failed_count();
    let first = |f, s| out.eval(f, s).map(|e| e.first_rank).unwrap_or(f64::NAN);
    let got = (
        failed(Setting::Trycatch),
        failed(Setting::Slicing),
        first(Formula::Ochiai, Setting::Trycatch),
        first(Formula::Ochiai, Setting::Slicing),
        first(Formula::Tarantula, Setting::Trycatch),
        first(Formula::Tarantula, Setting::Slicing),
    );
    let ok = got == (2, 17, 7.0, 3.0, 8.0, 5.0);
    verdict(
        ok,
        format!(
            "failed {} -> {}; ochiai {} -> {}; tarantula {} -> {}",
            got.0, got.1, got.2, got.3, got.4, got.5
        ),
    )
}

fn c6_coverage_monotonic(ctx: &mut Ctx) -> Verdict {
    let corpus = ctx.corpus();
    let mut tests = 0;
    let mut violations = Vec::new();
    for out in &corpus.outputs {
        let orig = out.report(Setting::Original);
        let tc = out.report(Setting::Trycatch);
        for (a, b) in orig.traces.iter().zip(&tc.traces) {
            tests += 1;
            if a.test_name != b.test_name || !a.covered_subject.is_subset(&b.covered_subject) {
                violations.push(format!("{}/{}", out.scenario_id, a.test_name));
            }
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "{} scenarios, {tests} tests, {} violations{}",
            corpus.outputs.len(),
            violations.len(),
            first_few(&violations)
        ),
    )
}

fn c7_result_preservation(ctx: &mut Ctx) -> Verdict {
    let corpus = ctx.corpus();
    let mut tests = 0;
    let mut violations = Vec::new();
    for out in &corpus.outputs {
        let orig = out.report(Setting::Original);
        let tc = out.report(Setting::Trycatch);
        for (a, b) in orig.traces.iter().zip(&tc.traces) {
            tests += 1;
            if a.outcome != b.outcome {
                violations.push(format!("{}/{}", out.scenario_id, a.test_name));
            }
        }
    }
    verdict(
        violations.is_empty(),
        format!("{tests} tests, {} violations{}", violations.len(), first_few(&violations)),
    )
}

fn c8_slicing_soundness(ctx: &mut Ctx) -> Verdict {
    let corpus = ctx.corpus();
    let mut tests = 0;
    let mut deletions = 0;
    let mut violations = Vec::new();
    for s in &corpus.scenarios {
        for t in &s.suite.tests {
            if t.statement_count() > 12 {
                continue;
            }
            tests += 1;
            let (v, tried) = common::deletion_oracle(&s.subject, t);
            deletions += tried;
            violations.extend(v.into_iter().map(|v| format!("{}: {v}", s.id)));
        }
    }
    verdict(
        tests >= 200 && violations.is_empty(),
        format!(
            "{tests} tests, {deletions} deletions, {} violations{}",
            violations.len(),
            first_few(&violations)
        ),
    )
}

fn c9_slicing_coverage_equality(ctx: &mut Ctx) -> Verdict {
    let corpus = ctx.corpus();
    let violations: Vec<String> = corpus
        .outputs
        .iter()
        .filter(|o| {
            o.report(Setting::Slicing).covered_subject_union()
                != o.report(Setting::Trycatch).covered_subject_union()
        })
        .map(|o| o.scenario_id.clone())
        .collect();
    verdict(
        violations.is_empty(),
        format!(
            "{} scenarios, {} violations{}",
            corpus.outputs.len(),
            violations.len(),
            first_few(&violations)
        ),
    )
}

fn c10_sbfl_ordering(ctx: &mut Ctx) -> Verdict {
    let config = Config::default();
    let golden: Vec<EvalDoc> = ["solve_scenario", "lang41_analog"]
        .iter()
        .map(|g| run_pipeline(&common::load_golden(g), &config).eval_doc())
        .collect();
    let corpus = ctx.corpus();
    let mut all = golden.clone();
    all.extend(corpus.outputs.iter().map(PipelineOutput::eval_doc));
    let (everything, _) = aggregate_evals("all", &all);
    let (golden_only, _) = aggregate_evals("golden", &golden);

    let mut ok = true;
    let mut parts = Vec::new();
    for f in Formula::ALL {
        for (from, to) in [
            (Setting::Original, Setting::Trycatch),
            (Setting::Trycatch, Setting::Slicing),
        ] {
            let c = everything.comparison(f, from, to).unwrap();
            ok &= c.deteriorated == 0;
            parts.push(format!(
                "{f} {from}->{to} imp {} det {}",
                c.improved, c.deteriorated
            ));
        }
        let golden_improved: usize = [
            (Setting::Original, Setting::Trycatch),
            (Setting::Trycatch, Setting::Slicing),
        ]
        .iter()
        .map(|(a, b)| golden_only.comparison(f, *a, *b).unwrap().improved)
        .sum();
        ok &= golden_improved >= 1;
        parts.push(format!("{f} golden imp {golden_improved}"));
    }
    verdict(ok, parts.join("; "))
}

fn c11_determinism(ctx: &mut Ctx) -> Verdict {
    let first = common::hash_tree(ctx.corpus().tree.path());
    let scenarios = generate_corpus(CORPUS_SEED, CORPUS_SIZE, Shape::Small).expect("corpus");
    let tree = tempfile::tempdir().unwrap();
    let config = Config {
        seed: CORPUS_SEED,
        output_dir: tree.path().to_path_buf(),
        ..Config::default()
    };
    run_corpus(&scenarios, &config).expect("pipeline");
    let second = common::hash_tree(tree.path());
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.clone())
        .collect();
    let same_inputs = scenarios == ctx.corpus().scenarios;
    verdict(
        same_inputs && first.len() == second.len() && differing.is_empty(),
        format!(
            "{} files hashed, {} differ{}",
            first.len(),
            differing.len(),
            first_few(&differing)
        ),
    )
}

fn c12_skipped_fraction(_: &mut Ctx) -> Verdict {
    let subject = parse_unit("fn twice(x) {\n    return x * 2;\n}\n", UnitKind::Subject).unwrap();
    let suite = parse_unit(
        "test ten_statements {
    let a = twice(1);
    assert_eq(2, a);
    let b = twice(2);
    assert_eq(4, b);
    let c = twice(3);
    assert_eq(6, c);
    let d = twice(4);
    assert_eq(9, d);
    let e = twice(5);
    assert_eq(10, e);
}
",
        UnitKind::Testsuite,
    )
    .unwrap();
    let report = run_suite(&subject, &suite, Setting::Original, DEFAULT_FUEL);
    let termination = classify(&report);
    let t = &termination.tests[0];
    let ok = t.early && t.skipped_statements == 2 && t.skipped_fraction == 0.20;
    verdict(
        ok,
        format!(
            "stopped at {}/{}, skipped_fraction = {}",
            t.failing_statement_index, t.test_statements, t.skipped_fraction
        ),
    )
}

fn first_few(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!(" (e.g. {})", items.iter().take(3).cloned().collect::<Vec<_>>().join(", "))
    }
}

type Check = fn(&mut Ctx) -> Verdict;

fn main() {
    let criteria: [(u32, &str, Option<Duration>, Check); 12] = [
        (1, "EXAM worked example", None, c1_exam_example),
        (2, "Ochiai pinning", None, c2_ochiai_pinning),
        (3, "tie rank pinning", None, c3_tie_pinning),
        (4, "solve golden scenario", Some(Duration::from_secs(1)), c4_solve_scenario),
        (5, "lang41 analog golden scenario", Some(Duration::from_secs(2)), c5_lang41),
        (6, "coverage monotonicity", Some(Duration::from_secs(60)), c6_coverage_monotonic),
        (7, "result preservation", None, c7_result_preservation),
        (8, "slicing soundness oracle", Some(Duration::from_secs(120)), c8_slicing_soundness),
        (9, "slicing/trycatch coverage equality", None, c9_slicing_coverage_equality),
        (10, "SBFL ordering", Some(Duration::from_secs(60)), c10_sbfl_ordering),
        (11, "determinism", None, c11_determinism),
        (12, "skipped fraction worked example", None, c12_skipped_fraction),
    ];
    let mut ctx = Ctx {
        corpus: None,
        corpus_time: Duration::ZERO,
    };
    let mut unexpected = Vec::new();
    let mut times: BTreeMap<u32, Duration> = BTreeMap::new();
    for (n, title, budget, check) in criteria {
        let start = Instant::now();
        let mut v = check(&mut ctx);
        let mut elapsed = start.elapsed();
        if n == 6 {
            // includes generating and running the shared corpus
            elapsed = elapsed.max(ctx.corpus_time);
        }
        times.insert(n, elapsed);
        let budget = match n {
            11 => Some(2 * times[&6]),
            _ => budget,
        };
        if let Some(b) = budget {
            if elapsed >= b {
                v.pass = false;
                v.detail.push_str(&format!("; over budget {b:?}"));
            }
        }
        let known = KNOWN_RED.contains(&n);
        let label = match (v.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (expected FAIL)",
        };
        println!(
            "criterion {n:>2} {label:<12} {title}: {} [{:.2?}]",
            v.detail, elapsed
        );
        if v.pass == known {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance results for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
