use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lrsplit::harness::{self, ExperimentConfig};
use lrsplit::kernel::Discretization;
use lrsplit::lr_series;
use lrsplit::shanks::{self, VectorSequence};
use lrsplit::surface;
use lrsplit::Execution;
use std::f64::consts::PI;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    for n in [256usize, 1024] {
        let s = surface::generate_gaussian(n, 0.125, 0.3, 1.0, 1).unwrap();
        for (name, exec) in POLICIES {
            g.bench_with_input(BenchmarkId::new(name, n), &s, |b, s| {
                b.iter(|| Discretization::assemble_with(s, 2.0 * PI, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn pointwise(c: &mut Criterion) {
    let cfg = ExperimentConfig::preset("divergent").unwrap();
    let p = harness::Problem::build(&cfg, Execution::Parallel).unwrap();
    let st = lr_series::iterate(&p.disc, &p.incident.values, 40).unwrap();
    let seq = VectorSequence::from_series(&st);
    let mut g = c.benchmark_group("pointwise_shanks");
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| shanks::pointwise_shanks(&seq, exec).unwrap()));
    }
    g.finish();
}

fn ensemble(c: &mut Criterion) {
    let mut base = ExperimentConfig::preset("semiconvergent").unwrap();
    base.n = 128;
    let mut g = c.benchmark_group("ensemble_sweep");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| harness::sweep(&base, &[0.3, 0.6], &[10.0, 45.0], 8, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, assembly, pointwise, ensemble);
criterion_main!(benches);
