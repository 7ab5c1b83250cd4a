//! Sequential against parallel execution for the batch workloads.

use std::hint::black_box;

use autoderive::dataset::{gen_instances, gen_traces, GenConfig, Split, TraceConfig};
use autoderive::encoding::SymbolTable;
use autoderive::par::Execution;
use autoderive::random::random_formula;
use autoderive::rewrite::ode_rules;
use autoderive::rl::{PolicyModel, TrainingSet};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn corpus_generation(c: &mut Criterion) {
    let rules = ode_rules();
    let instances = gen_instances(&GenConfig { count: 500, seed: 1, ..Default::default() }).unwrap();
    let mut group = c.benchmark_group("gen_traces_500");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = TraceConfig { exec, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gen_traces(black_box(&instances), &rules, &cfg).unwrap())
        });
    }
    group.finish();
}

fn policy_gradient(c: &mut Criterion) {
    let rules = ode_rules();
    let table = SymbolTable::default();
    let instances = gen_instances(&GenConfig { count: 2000, seed: 2, ..Default::default() }).unwrap();
    let corpus = gen_traces(&instances, &rules, &TraceConfig::default()).unwrap();
    // keep every sample distinct so the batch is not collapsed by dedup
    let mut samples = corpus.samples(Split::Train, &rules, &table).unwrap();
    samples.extend(corpus.samples(Split::Test, &rules, &table).unwrap());
    let data = TrainingSet::from_samples(&samples, rules.len()).unwrap();
    let model = PolicyModel::new(64, 256, rules.len(), 1.0 / 17.0, 3);
    let mut group = c.benchmark_group("policy_gradient");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| model.loss_and_gradient(black_box(&data), exec))
        });
    }
    group.finish();
}

fn batch_encoding(c: &mut Criterion) {
    let table = SymbolTable::canonical(4096);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let formulas: Vec<_> = (0..20_000).map(|_| random_formula(&mut rng, 7)).collect();
    let mut group = c.benchmark_group("encode_20k");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(black_box(&formulas), |_, f| table.encode(f).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, corpus_generation, policy_gradient, batch_encoding);
criterion_main!(benches);
