use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ecmle::covering::{build_covering, CoveringConfig};
use ecmle::estimators::{ecmle, Method};
use ecmle::geometry::UnitInterval;
use ecmle::harness::{run_replications, ModelConfig, RunConfig};
use ecmle::hpd::partition;
use ecmle::par::Execution;
use ecmle::rng::seeded;
use ecmle::targets::{GaussianConjugateModel, TargetModel};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn covering_and_membership(c: &mut Criterion) {
    for d in [2usize, 5] {
        let truth = vec![1.0; d];
        let model = GaussianConjugateModel::simulate(d, 20, 1.0, &truth, 42).unwrap();
        let draws = model.sample_posterior(40_000, &mut seeded(1)).unwrap();
        let alpha = UnitInterval::new(0.75).unwrap();
        let part = partition(&draws, alpha).unwrap();
        let f = |t: &[f64]| model.log_unnorm_posterior(t);

        let mut g = c.benchmark_group(format!("covering_build/d{d}"));
        for (name, exec) in MODES {
            let cfg = CoveringConfig { exec, ..CoveringConfig::new(alpha, 7) };
            g.bench_function(BenchmarkId::from_parameter(name), |b| {
                b.iter(|| build_covering(black_box(&part), &cfg, &f).unwrap())
            });
        }
        g.finish();

        let union = build_covering(&part, &CoveringConfig::new(alpha, 7), &f).unwrap();
        let mut g = c.benchmark_group(format!("ecmle_eval/d{d}"));
        for (name, exec) in MODES {
            g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| ecmle(black_box(&part), &union, exec).unwrap()));
        }
        g.finish();
    }
}

fn replications(c: &mut Criterion) {
    let mut g = c.benchmark_group("replications/mixture_x16");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = RunConfig {
            model: ModelConfig::named("mixture"),
            methods: vec![Method::Ecmle, Method::Thames, Method::MixThames],
            t: 10_000,
            reps: 16,
            exec,
            ..RunConfig::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_replications(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, covering_and_membership, replications);
criterion_main!(benches);
