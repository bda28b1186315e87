use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hetnet_ee::ee::{brute_force_oracle_refined, SolverOptions};
use hetnet_ee::experiments::{derive_seed, random_small_instance, sweep, InstanceTemplate, SweepAxis, SweepSpec};
use hetnet_ee::par::Execution;
use hetnet_ee::queueing::{simulate_replicas, CtmcSpec};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn bench_sweep(c: &mut Criterion) {
    let template = InstanceTemplate::default();
    let spec = SweepSpec::new(SweepAxis::SnrDb, vec![0.0, 5.0, 10.0, 15.0], (1..=8).collect());
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("snr_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep(&spec, &template, &opts, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    // a four-user instance keeps one grid pass in the millisecond range
    let inst = (0..)
        .map(|i| random_small_instance(derive_seed(99, i)))
        .find(|inst| inst.n_users() == 4)
        .unwrap();
    let mut group = c.benchmark_group("oracle_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| brute_force_oracle_refined(&inst, 9, 2, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_replicas(c: &mut Criterion) {
    let spec = CtmcSpec { channels: 6, queue_r: 3, queue_tau: 3, lambda_s: 2.0, ..CtmcSpec::default() };
    let mut group = c.benchmark_group("ctmc_replicas");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_replicas(&spec, 50_000, 8, 7, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_oracle, bench_replicas);
criterion_main!(benches);
