use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rdfm_hdg::scenario::Example1Variant;
use rdfm_hdg::{assemble, run_scenario, CgOptions, Discretization};
use rdfm_hdg_bench::{discretize, example1, manufactured};

fn bench_discretize(c: &mut Criterion) {
    let s = example1(Example1Variant::Conductive, 1, 3);
    c.bench_function("discretize/example1a_r3", |b| b.iter(|| Discretization::from_scenario(&s).unwrap()));
}

fn bench_assemble(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    for k in 0..=2 {
        let disc = discretize(&example1(Example1Variant::Conductive, k, 3));
        g.bench_with_input(BenchmarkId::new("example1a_r3", k), &disc, |b, d| b.iter(|| assemble(d).unwrap()));
    }
    g.finish();
}

fn bench_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for (name, s) in [
        ("example1a_r3", example1(Example1Variant::Conductive, 1, 3)),
        ("example1b_r3", example1(Example1Variant::Blocking, 1, 3)),
        ("manufactured_32", manufactured(32, 1)),
    ] {
        let system = assemble(&discretize(&s)).unwrap();
        g.bench_function(name, |b| b.iter(|| system.solve(CgOptions::default()).unwrap()));
    }
    g.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    let s = example1(Example1Variant::Conductive, 1, 3);
    g.bench_function("example1a_r3_k1", |b| b.iter(|| run_scenario(&s, CgOptions::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_discretize, bench_assemble, bench_solve, bench_pipeline);
criterion_main!(benches);
