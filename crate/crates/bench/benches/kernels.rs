use criterion::{criterion_group, criterion_main, Criterion};
use perisys::bounds::{theorem_verdicts, BoundsOptions};
use perisys::eigen::first_eigenpair;
use perisys::evolution::{sweep_period, StepperConfig};
use perisys::grid::degenerate_flux_divergence;
use perisys::nonlocal::DelayEvaluator;
use perisys::{Field, Grid};
use perisys_bench::cooperative;
use std::hint::black_box;

fn eigen(c: &mut Criterion) {
    let g = Grid::interval(1.0, 200).unwrap();
    c.bench_function("first_eigenpair r=1.5 N=200", |b| {
        b.iter(|| first_eigenpair(black_box(&g), 1.5, 1e-10).unwrap())
    });
}

fn flux(c: &mut Criterion) {
    let g1 = Grid::interval(1.0, 1000).unwrap();
    let u1 = Field::sine_bump(&g1, 1.0);
    c.bench_function("flux divergence 1D N=1000", |b| {
        b.iter(|| degenerate_flux_divergence(&g1, black_box(&u1), 1.5, 2.0, 0.1, 1e-8).unwrap())
    });
    let g2 = Grid::rectangle(1.0, 1.0, 64, 64).unwrap();
    let u2 = Field::sine_bump(&g2, 1.0);
    c.bench_function("flux divergence 2D 64x64", |b| {
        b.iter(|| degenerate_flux_divergence(&g2, black_box(&u2), 1.5, 2.0, 0.1, 1e-8).unwrap())
    });
}

fn period(c: &mut Criterion) {
    let spec = cooperative(100, 1000);
    let u0 = Field::sine_bump(&spec.grid, 1.0);
    let ev = DelayEvaluator::constant(&spec, &u0, &u0).unwrap();
    let cfg = StepperConfig::for_spec(&spec);
    let mut group = c.benchmark_group("period");
    group.sample_size(10);
    group.bench_function("sweep N=100 S=1000", |b| {
        b.iter(|| sweep_period(black_box(&u0), &u0, &cfg, &ev).unwrap())
    });
    group.finish();
}

fn bounds(c: &mut Criterion) {
    let spec = cooperative(200, 10);
    let ep = first_eigenpair(&spec.grid, 1.5, 1e-10).unwrap();
    let opts = BoundsOptions {
        r_proxy: Some(2.0),
        ..BoundsOptions::default()
    };
    c.bench_function("theorem_verdicts", |b| {
        b.iter(|| theorem_verdicts(black_box(&spec), &ep, &ep, &opts))
    });
}

criterion_group!(benches, eigen, flux, period, bounds);
criterion_main!(benches);
