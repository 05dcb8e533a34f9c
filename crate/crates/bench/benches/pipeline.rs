use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fortstream::analysis::build_ir;
use fortstream::eval::Value;
use fortstream::pipeline::{BoundaryPolicy, SmartCacheSpec, Variant};
use fortstream::sim::{simulate, smart_cache_run};
use fortstream::sw::{corpus, reference_step, ExperimentConfig, ShallowWaterState};
use fortstream_bench::Corpus;

fn front_end(c: &mut Criterion) {
    let raw = corpus::program();
    c.bench_function("refactor_corpus", |b| b.iter(|| fortstream::refactor::refactor(black_box(&raw)).unwrap()));
    let prog = fortstream::refactor::refactor(&raw).unwrap().0;
    c.bench_function("build_ir", |b| b.iter(|| build_ir(black_box(&prog)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let corpus = Corpus::load();
    let mut group = c.benchmark_group("simulate_16x16_nt5");
    group.sample_size(20);
    for v in Variant::ALL {
        let (g, opts) = corpus.lowered(v, 16, 5);
        group.bench_with_input(BenchmarkId::from_parameter(v), &g, |b, g| {
            b.iter(|| simulate(&corpus.prog, &corpus.ir, g, &opts).unwrap())
        });
    }
    group.finish();
}

fn smart_cache(c: &mut Criterion) {
    let n = 66;
    let spec = SmartCacheSpec::new("eta", n * n, &[-(n as i64), -1, 0, 1, n as i64], BoundaryPolicy::Clamp);
    let input: Vec<Value> = (0..n * n).map(|i| Value::Real(i as f32)).collect();
    c.bench_function("smart_cache_66x66_five_point", |b| b.iter(|| smart_cache_run(&spec, black_box(&input))));
}

fn reference(c: &mut Criterion) {
    let p = ExperimentConfig::new(64, 64, 1).params().unwrap();
    let s = ShallowWaterState::initial(&p);
    c.bench_function("reference_step_64x64", |b| b.iter(|| reference_step(black_box(&s), &p).unwrap()));
}

criterion_group!(benches, front_end, simulation, smart_cache, reference);
criterion_main!(benches);
