use bandit_coord::coordination::{run_episode, Algorithm, CoordinatorConfig};
use bandit_coord::harness::scenario::ScenarioKind;
use bandit_coord::learners::{Exp3Ix, Strategy};
use bandit_coord::oracle::hindsight_optimal;
use bandit_coord::submodular::verify_definition1;
use bandit_coord_bench::{coverage, tracking_env};
use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use std::hint::black_box;

const STEPS: usize = 200;

fn episodes(c: &mut Criterion) {
    let mut g = c.benchmark_group("tracking_episode_200_steps");
    for alg in [Algorithm::Bsg, Algorithm::MetaBsg, Algorithm::CommandOnly] {
        g.bench_with_input(BenchmarkId::from_parameter(alg), &alg, |b, &alg| {
            b.iter_batched(
                || tracking_env(ScenarioKind::TwoVsFourNearOptimal, STEPS, 1),
                |mut env| run_episode(alg, &mut env, CoordinatorConfig::with_seed(1)).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn verifier(c: &mut Criterion) {
    let f = coverage(3, 8, 1, 2);
    c.bench_function("verify_definition1_3x8", |b| b.iter(|| verify_definition1(black_box(&f), 0).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let f = coverage(3, 16, 50, 3);
    c.bench_function("hindsight_optimal_3x16_T50", |b| b.iter(|| hindsight_optimal(black_box(&f)).unwrap()));
}

fn meta_update(c: &mut Criterion) {
    c.bench_function("exp3ix_update", |b| {
        let mut l = Exp3Ix::new(1_000_000).unwrap();
        let mut k = 0u32;
        b.iter(|| {
            k = k.wrapping_add(1);
            let s = if k.is_multiple_of(3) { Strategy::Bsg } else { Strategy::ExtComm };
            l.update(s, black_box((k % 7) as f64 / 7.0)).unwrap()
        })
    });
}

criterion_group!(benches, episodes, verifier, oracle, meta_update);
criterion_main!(benches);
