//! Hot kernels under the parallel and sequential paths.
//!
//! With the default `parallel` feature every kernel runs twice: once on a
//! one-thread rayon pool (the sequential schedule) and once on the global
//! pool. Building with `--no-default-features` gives the plain loop
//! implementation for a third point of comparison.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hqnn::model::{Hqnn, ModelConfig, ModelParams};
use hqnn::qsim::{Circuit, Connectivity, GradMethod, QuantumLayer};
use hqnn::rng::Rng;
use hqnn::tensor::{Graph, Mode, Tensor};

fn schedules() -> Vec<(&'static str, Option<usize>)> {
    if hqnn::par::is_parallel() {
        vec![("rayon-1", Some(1)), ("rayon-all", None)]
    } else {
        vec![("sequential", None)]
    }
}

fn run_on<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        return pool.install(f);
    }
    let _ = threads;
    f()
}

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(shape, |_| rng.uniform_range(-1.0, 1.0))
}

fn conv(c: &mut Criterion) {
    let x = random(&[16, 3, 64, 64], 1);
    let w = random(&[32, 3, 3, 3], 2);
    let b = random(&[32], 3);
    let mut group = c.benchmark_group("conv2d_fwd_bwd");
    group.sample_size(20);
    for (name, threads) in schedules() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| {
                run_on(threads, || {
                    let mut g = Graph::new();
                    let (xv, wv, bv) = (g.constant(x.clone()), g.param(w.clone()), g.param(b.clone()));
                    let y = g.conv2d(xv, wv, bv, 1).unwrap();
                    let s = g.sum(y);
                    g.backward(s).unwrap();
                    black_box(g.grad(wv).unwrap().data()[0])
                })
            })
        });
    }
    group.finish();
}

fn circuit(c: &mut Criterion) {
    let angles = random(&[16, 4], 4);
    let mut rng = Rng::new(5);
    let theta = Tensor::from_fn(&[2, 4, 3], |_| rng.uniform_range(0.0, std::f64::consts::TAU));
    let mut group = c.benchmark_group("circuit_batch16");
    for method in [GradMethod::Adjoint, GradMethod::ParameterShift] {
        let layer = QuantumLayer::new(Circuit::new(4, 2, Connectivity::Ring).unwrap(), method);
        for (name, threads) in schedules() {
            group.bench_function(BenchmarkId::new(format!("{method:?}"), name), |bench| {
                bench.iter(|| {
                    run_on(threads, || {
                        let mut g = Graph::new();
                        let (a, t) = (g.param(angles.clone()), g.param(theta.clone()));
                        let e = layer.forward(&mut g, a, t).unwrap();
                        let s = g.sum(e);
                        g.backward(s).unwrap();
                        black_box(g.grad(t).unwrap().data()[0])
                    })
                })
            });
        }
    }
    group.finish();
}

fn model_forward(c: &mut Criterion) {
    let config = ModelConfig::default();
    let model = Hqnn::new(config.clone()).unwrap();
    let params = ModelParams::init(&config, 7).unwrap();
    let x = random(&[4, 3, 64, 64], 8);
    let mut group = c.benchmark_group("hqnn_forward_batch4");
    group.sample_size(10);
    for (name, threads) in schedules() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| {
                run_on(threads, || {
                    let mut g = Graph::new();
                    let bound = model.bind(&mut g, &params, false);
                    let xv = g.constant(x.clone());
                    let out = model
                        .forward(&mut g, &bound, &params, xv, Mode::Eval, &mut Rng::new(0))
                        .unwrap();
                    black_box(g.value(out.logits).data()[0])
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, conv, circuit, model_forward);
criterion_main!(benches);
