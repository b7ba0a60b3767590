use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use otfs_core::{DDGrid, FrameGeometry, ZakTransform, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn zak(c: &mut Criterion) {
    let mut group = c.benchmark_group("zak");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (m, n) in [(64, 32), (512, 128)] {
        let g = FrameGeometry::new(m, n, 15e3).unwrap();
        let values = (0..g.mn()).map(|_| C64::new(rng.random(), rng.random())).collect();
        let grid = DDGrid::from_rows(g, values).unwrap();
        let t = ZakTransform::new(g);
        let signal = t.idzt(&grid);
        let id = format!("{m}x{n}");
        group.bench_with_input(BenchmarkId::new("idzt", &id), &grid, |b, grid| b.iter(|| t.idzt(grid)));
        group.bench_with_input(BenchmarkId::new("dzt", &id), &signal, |b, s| b.iter(|| t.dzt(s)));
    }
    group.finish();
}

criterion_group!(benches, zak);
criterion_main!(benches);
