use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use setupsched::driver;
use setupsched::model::Model;
use setupsched::nfold::{self, Backend, SolveOptions};
use setupsched::pipeline::PipelineOptions;
use setupsched::rat::rat;
use setupsched_bench::{instance, programs};
use std::hint::black_box;

fn nfold_engines(c: &mut Criterion) {
    let batch = programs(50, 7);
    let mut group = c.benchmark_group("nfold");
    for (name, backend) in [("augment", Backend::Augment), ("exact", Backend::Exact)] {
        let opts = SolveOptions { backend, ..Default::default() };
        group.bench_function(name, |b| {
            b.iter(|| {
                for p in &batch {
                    black_box(nfold::solve(p, &opts).unwrap());
                }
            })
        });
    }
    group.bench_function("box-search", |b| {
        b.iter(|| {
            for p in &batch {
                black_box(nfold::solve_exact(p, 10_000_000).unwrap());
            }
        })
    });
    group.finish();
}

fn searches(c: &mut Criterion) {
    let eps = rat(1, 2);
    let opts = PipelineOptions::default();
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    for (model, jobs, machines) in [(Model::SetupClass, 6, 2), (Model::Splittable, 4, 3), (Model::Preemptive, 4, 2)] {
        let inst = instance(model, jobs, machines, 1);
        group.bench_with_input(BenchmarkId::new(model.name(), format!("n{jobs}-m{machines}")), &inst, |b, inst| {
            b.iter(|| black_box(driver::search(inst, &eps, &opts).unwrap()))
        });
    }
    group.finish();
}

fn splittable_machine_scaling(c: &mut Criterion) {
    let eps = rat(1, 2);
    let opts = PipelineOptions::default();
    let mut group = c.benchmark_group("splittable-machines");
    group.sample_size(10);
    for machines in [4u64, 1_000, 1_000_000] {
        let inst = instance(Model::Splittable, 4, machines, 3);
        group.bench_with_input(BenchmarkId::from_parameter(machines), &inst, |b, inst| {
            b.iter(|| black_box(driver::search(inst, &eps, &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, nfold_engines, searches, splittable_machine_scaling);
criterion_main!(benches);
