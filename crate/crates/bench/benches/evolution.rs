use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tgdecay_core::free::evolve_mode_free;
use tgdecay_core::gas::trapped_number;
use tgdecay_core::spectral::{evolve_mode_with, nonescape_probability_with};
use tgdecay_core::{GasKind, GasSpec, ModeIndex, SpatialGrid, SpectralOptions, TrapSpec};

fn evolution(c: &mut Criterion) {
    let trap = TrapSpec::new(1.0, 5.0).unwrap();
    let free = TrapSpec::new(1.0, 0.0).unwrap();
    let opts = SpectralOptions::default();
    let n1 = ModeIndex::new(1).unwrap();
    let mut g = c.benchmark_group("evolution");
    g.sample_size(10);
    for t in [0.1, 1.0, 10.0] {
        g.bench_function(format!("nonescape n=1 eta=5 t={t}"), |b| {
            b.iter(|| nonescape_probability_with(n1, black_box(t), &trap, &opts).unwrap())
        });
    }
    let grid = SpatialGrid::default_for(&trap);
    g.bench_function("evolve_mode grid eta=5 t=1", |b| {
        b.iter(|| evolve_mode_with(n1, black_box(1.0), &trap, &grid, &opts).unwrap())
    });
    let free_grid = SpatialGrid::default_for(&free);
    g.bench_function("evolve_mode_free grid t=1", |b| {
        b.iter(|| evolve_mode_free(n1, black_box(1.0), &free, &free_grid).unwrap())
    });
    let btg = GasSpec::new(GasKind::Btg, 10).unwrap();
    g.bench_function("trapped_number btg N=10 t=0.1", |b| {
        b.iter(|| trapped_number(&btg, black_box(0.1), &trap, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, evolution);
criterion_main!(benches);
