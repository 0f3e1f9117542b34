//! The same workloads on a one-thread pool and on the default pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;

use seqtreat::data::Regime;
use seqtreat::design::{DesignSpec, Feature};
use seqtreat::gformula::{g_formula_mc, TableLaws};
use seqtreat::simulate::{enumerate_joint, simulate, SequentialConfig, SndmScenario};
use seqtreat::sndm::{g_estimate, BlipFamily, BlipSpec, GEstimateConfig};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let one = ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let all = ThreadPoolBuilder::new().build().expect("pool");
    let label = format!("default-pool-{}", all.current_num_threads());
    vec![("1-thread".to_string(), one), (label, all)]
}

fn bench_simulate(c: &mut Criterion) {
    let cfg = SequentialConfig::null_paradox_default();
    let mut group = c.benchmark_group("simulate_n100k");
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| pool.install(|| simulate(&cfg, 100_000, 1).expect("simulate")))
        });
    }
    group.finish();
}

fn bench_g_formula_mc(c: &mut Criterion) {
    let table = enumerate_joint(&SequentialConfig::binary_toy(0.5, 1.0), None).expect("table");
    let regime = Regime::follow_covariate();
    let mut group = c.benchmark_group("g_formula_mc_200k");
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| pool.install(|| g_formula_mc(&TableLaws { table: &table }, &regime, 200_000, 2).expect("mc")))
        });
    }
    group.finish();
}

fn bench_g_estimate(c: &mut Criterion) {
    let d = simulate(&SndmScenario::discrete_default(), 5000, 3).expect("simulate");
    let tm = DesignSpec::new(vec![Feature::Intercept, Feature::l(0), Feature::a(1)]).expect("design");
    let mut cfg = GEstimateConfig::new(tm, vec![(-1.0, 3.0), (-1.0, 3.0)]);
    cfg.grid_points = 41;
    let family = BlipSpec::new(BlipFamily::Additive, vec![Feature::a(0), Feature::product(vec![Feature::a(0), Feature::l(0)])], vec![0.0, 0.0])
        .expect("blip");
    let mut group = c.benchmark_group("g_estimate_grid_41x41");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| pool.install(|| g_estimate(&d, &family, &cfg).expect("g-estimate")))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_g_formula_mc, bench_g_estimate);
criterion_main!(benches);
