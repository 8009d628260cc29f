use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use slicefl::harness::{generate_corpus, run_pipeline, Config, Shape};
use slicefl::par::{self, Parallelism};
use slicefl::spectrum::{count_spectrum_with, CoverageMatrix};

fn corpus_pipeline(c: &mut Criterion) {
    let corpus = generate_corpus(0, 40, Shape::Medium).expect("corpus");
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for mode in [Parallelism::Sequential, Parallelism::Parallel] {
        let config = Config {
            parallelism: mode,
            ..Config::default()
        };
        group.bench_with_input(BenchmarkId::new("corpus40", format!("{mode:?}")), &config, |b, cfg| {
            b.iter(|| par::map(cfg.parallelism, &corpus, |s| run_pipeline(s, cfg).evals.len()))
        });
    }
    group.finish();
}

fn wide_spectrum(c: &mut Criterion) {
    // 2000 statements by 400 tests, a large desk-scale matrix
    let (stmts, tests) = (2000usize, 400usize);
    let matrix = CoverageMatrix {
        tests: (0..tests)
            .map(|j| {
                let o = if j % 7 == 0 {
                    slicefl::exec::Outcome::Failed
                } else {
                    slicefl::exec::Outcome::Passed
                };
                (format!("t{j}"), o)
            })
            .collect(),
        statements: (0..stmts as u32).map(slicefl::dsl::StatementId).collect(),
        lines: (1..=stmts as u32).collect(),
        rows: (0..stmts)
            .map(|i| (0..tests).map(|j| (i * 31 + j * 17) % 5 < 2).collect())
            .collect(),
    };
    let mut group = c.benchmark_group("spectrum");
    for mode in [Parallelism::Sequential, Parallelism::Parallel] {
        group.bench_function(format!("{mode:?}"), |b| b.iter(|| count_spectrum_with(&matrix, mode)));
    }
    group.finish();
}

criterion_group!(benches, corpus_pipeline, wide_spectrum);
criterion_main!(benches);
