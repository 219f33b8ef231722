use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use smc_bench::normal_sample;
use smc_core::models::{CalibrationKind, KellyMarketConfig, KellyMarketState, ModelSpec};
use smc_core::query::parse_query;
use smc_core::rng::SeedPlan;
use smc_core::stats::{anderson_darling_p_value, non_central_t_cdf, t_quantile};
use smc_core::transient::{auto_ir, StopRule, TransientRequest};
use smc_core::{ObservableId, WorkerPool};

fn kelly_step(c: &mut Criterion) {
    let cfg = KellyMarketConfig::reference(0.6);
    let mut state = KellyMarketState::initial(&cfg);
    let mut draw = 0.0f64;
    c.bench_function("kelly_step", |b| {
        b.iter(|| {
            draw = (draw + 0.618_033_988_749_895) % 1.0;
            state.advance(&cfg, black_box(draw)).unwrap();
        })
    });
}

fn distributions(c: &mut Criterion) {
    c.bench_function("t_quantile", |b| b.iter(|| t_quantile(black_box(123.0), black_box(0.975)).unwrap()));
    c.bench_function("non_central_t_cdf", |b| {
        b.iter(|| non_central_t_cdf(black_box(2.0), black_box(10.0), black_box(1.5)).unwrap())
    });
    let sample = normal_sample(124, 7);
    c.bench_function("anderson_darling_p_value_124", |b| {
        b.iter(|| anderson_darling_p_value(black_box(&sample), 0.0, 1.0).unwrap())
    });
}

fn small_auto_ir(c: &mut Criterion) {
    let spec = ModelSpec::Calibration(CalibrationKind::IidNormal { mu: 0.0, sigma2: 1.0 });
    let request = TransientRequest {
        observables: vec![ObservableId::new("x").unwrap()],
        times: vec![1, 5, 10],
        rule: StopRule { delta: 0.2, ..StopRule::default() },
    };
    let mut pool = WorkerPool::build(1, || spec.instantiate()).unwrap();
    c.bench_function("auto_ir_iid_normal", |b| {
        b.iter(|| auto_ir(&request, &mut pool, &SeedPlan::new(black_box(42))).unwrap())
    });
}

fn query_parse(c: &mut Criterion) {
    let src = include_str!("../../core/queries/obs_at_step.mqx");
    c.bench_function("parse_obs_at_step", |b| b.iter(|| parse_query(black_box(src)).unwrap()));
}

criterion_group!(benches, kelly_step, distributions, small_auto_ir, query_parse);
criterion_main!(benches);
