use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rollout_core::allocators::StrategyKind;
use rollout_core::config::ExperimentConfig;
use rollout_core::engine::run_search;
use rollout_core::simenv::SimEnv;
use std::hint::black_box;

fn search(c: &mut Criterion) {
    let cfg = ExperimentConfig::benchmark();
    let env = SimEnv::generate(&cfg.env, 7).unwrap();
    let mut group = c.benchmark_group("run_search");
    for kind in StrategyKind::ALL {
        for budget in [16, 64] {
            let search = cfg.search_config(kind, budget);
            group.bench_with_input(BenchmarkId::new(kind.name(), budget), &search, |b, s| {
                b.iter(|| run_search(black_box(s), &env).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
