mod common;

use std::fs;

use slicefl::dsl::{parse_unit, UnitKind};
use slicefl::exec::{run_suite, Setting, SuiteRunReport, DEFAULT_FUEL};
use slicefl::harness::{
    generate_corpus, generate_corpus_with, run_corpus, run_pipeline, write_outputs, Config,
    GenOptions, Provenance, Scenario, Shape,
};
use slicefl::metrics::GroundTruth;
use slicefl::par::Parallelism;
use slicefl::sbfl::Formula;

#[test]
fn golden_outputs_match_the_committed_trees() {
    for name in ["solve_scenario", "lang41_analog"] {
        let scenario = common::load_golden(name);
        let tmp = tempfile::tempdir().unwrap();
        let out = run_pipeline(&scenario, &Config::default());
        let dir = tmp.path().join(name);
        write_outputs(&out, &dir).unwrap();
        let expected = common::golden_dir(name).join("expected");
        let got = common::hash_tree(&dir);
        let want = common::hash_tree(&expected);
        let names = |v: &[(String, String)]| v.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
        assert_eq!(names(&got), names(&want), "{name}: file set");
        for ((file, a), (_, b)) in got.iter().zip(&want) {
            assert_eq!(a, b, "{name}/{file} differs from the committed output");
        }
    }
}

#[test]
fn solve_scenario_trycatch_strictly_extends_coverage() {
    let out = run_pipeline(&common::load_golden("solve_scenario"), &Config::default());
    let orig = out.report(Setting::Original).covered_subject_union();
    let tc = out.report(Setting::Trycatch).covered_subject_union();
    assert!(orig.is_subset(&tc) && orig != tc);
}

#[test]
fn lang41_slicing_adds_thirty_seven_tests() {
    let out = run_pipeline(&common::load_golden("lang41_analog"), &Config::default());
    let tests = |s| out.report(s).traces.len();
    assert_eq!(tests(Setting::Slicing) - tests(Setting::Trycatch), 37);
}

#[test]
fn generated_suites_have_a_realistic_multi_assertion_share() {
    let corpus = generate_corpus(0, 100, Shape::Small).unwrap();
    let (multi, total) = corpus
        .iter()
        .flat_map(|s| &s.suite.tests)
        .fold((0, 0), |(m, t), test| (m + usize::from(test.assertion_count() >= 2), t + 1));
    let share = multi as f64 / total as f64;
    assert!((0.30..=0.75).contains(&share), "{multi}/{total}");
    for s in &corpus {
        assert!((2..=4).contains(&s.subject.functions.len()), "{}", s.id);
        assert!((5..=15).contains(&s.suite.tests.len()), "{}", s.id);
        assert!((1..=2).contains(&s.truth.faulty_statements.len()));
        assert_eq!(s.provenance, Provenance::Generated { seed: 0 });
        let report = run_suite(&s.subject, &s.suite, Setting::Original, DEFAULT_FUEL);
        assert!(report.failed_count() >= 1, "{} has no failing test", s.id);
    }
}

#[test]
fn generation_does_not_depend_on_thread_count() {
    let seq = GenOptions {
        parallelism: Parallelism::Sequential,
        ..GenOptions::default()
    };
    let par = GenOptions {
        parallelism: Parallelism::Parallel,
        shape: Shape::Medium,
        ..GenOptions::default()
    };
    let medium_seq = GenOptions {
        shape: Shape::Medium,
        ..seq.clone()
    };
    assert_eq!(
        generate_corpus_with(7, 6, &seq).unwrap(),
        generate_corpus(7, 6, Shape::Small).unwrap()
    );
    let medium = generate_corpus_with(7, 4, &par).unwrap();
    assert_eq!(medium, generate_corpus_with(7, 4, &medium_seq).unwrap());
    for s in &medium {
        assert!((4..=6).contains(&s.subject.functions.len()));
        assert!((15..=40).contains(&s.suite.tests.len()));
    }
}

#[test]
fn state_infection_corpora_still_generate_and_run() {
    let opts = GenOptions {
        allow_state_infection: true,
        ..GenOptions::default()
    };
    let corpus = generate_corpus_with(3, 10, &opts).unwrap();
    let reassigns = corpus
        .iter()
        .flat_map(|s| &s.suite.tests)
        .flat_map(|t| &t.body)
        .filter(|st| matches!(st.kind, slicefl::dsl::StmtKind::Assign { .. }))
        .count();
    assert!(reassigns > 0);
    for s in &corpus {
        let out = run_pipeline(s, &Config::default());
        assert_eq!(out.reports.len(), 3);
    }
}

#[test]
fn green_suites_skip_localization_with_a_note() {
    let subject = parse_unit("fn inc(x) {\n    return x + 1;\n}\n", UnitKind::Subject).unwrap();
    let suite = parse_unit(
        "test t {\n    assert_eq(2, inc(1));\n    assert_eq(3, inc(2));\n}\n",
        UnitKind::Testsuite,
    )
    .unwrap();
    let scenario = Scenario {
        id: "green".into(),
        subject,
        suite,
        truth: GroundTruth {
            scenario_id: "green".into(),
            faulty_statements: [slicefl::dsl::StatementId(0)].into(),
            faulty_lines: vec![2],
        },
        provenance: Provenance::Handwritten,
    };
    let out = run_pipeline(&scenario, &Config::default());
    assert!(out.rankings.is_empty() && out.evals.is_empty());
    assert_eq!(out.notes.len(), 3);
    assert!(out.notes.iter().all(|n| n.contains("localization skipped")));
    // the artifacts that do exist are still written
    let tmp = tempfile::tempdir().unwrap();
    write_outputs(&out, &tmp.path().join("green")).unwrap();
    assert!(tmp.path().join("green/termination.json").is_file());
    assert!(!tmp.path().join("green/ranking.ochiai.original.json").exists());
}

#[test]
fn scenarios_survive_save_and_load() {
    let corpus = generate_corpus(11, 3, Shape::Small).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    for s in &corpus {
        let dir = tmp.path().join(&s.id);
        s.save(&dir).unwrap();
        let back = Scenario::load(&dir).unwrap();
        assert!(back.subject.same_shape(&s.subject));
        assert!(back.suite.same_shape(&s.suite));
        assert_eq!(back.truth, s.truth);
        assert_eq!(back.provenance, s.provenance);
    }
}

#[test]
fn invalid_ground_truth_is_rejected_on_load() {
    let tmp = tempfile::tempdir().unwrap();
    let s = &generate_corpus(1, 1, Shape::Small).unwrap()[0];
    s.save(tmp.path()).unwrap();
    fs::write(
        tmp.path().join("truth.json"),
        r#"{"scenario_id": "x", "faulty_statements": [9999]}"#,
    )
    .unwrap();
    let err = Scenario::load(tmp.path()).unwrap_err().to_string();
    assert!(err.contains("9999"), "{err}");
}

#[test]
fn reports_round_trip_through_json() {
    let s = &generate_corpus(5, 1, Shape::Small).unwrap()[0];
    for setting in Setting::ALL {
        let r = slicefl::exec::run_suite(&s.subject, &s.suite, setting, DEFAULT_FUEL);
        let back = SuiteRunReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}

#[test]
fn corpus_runs_write_one_directory_per_scenario_and_aggregates() {
    let corpus = generate_corpus(2, 4, Shape::Small).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let config = Config {
        output_dir: tmp.path().to_path_buf(),
        parallelism: Parallelism::Sequential,
        ..Config::default()
    };
    let (outputs, report) = run_corpus(&corpus, &config).unwrap();
    assert_eq!(outputs.len(), 4);
    for s in &corpus {
        for setting in Setting::ALL {
            assert!(tmp.path().join(&s.id).join(format!("report.{setting}.json")).is_file());
        }
    }
    for f in ["aggregate.json", "summary.csv", "comparison.csv"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    assert!(report.summary(Formula::Ochiai, Setting::Slicing).is_some());
    // no staging directories left behind
    let leftovers = fs::read_dir(tmp.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".partial"))
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn bad_k_values_are_a_config_error() {
    let config = Config {
        k_values: vec![10, 5],
        ..Config::default()
    };
    assert!(run_corpus(&[], &config).is_err());
}
