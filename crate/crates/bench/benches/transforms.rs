use criterion::{criterion_group, criterion_main, Criterion};
use czsob::czop::{boundary_transform, complex_monomial, pv_transform};
use czsob::geometry::make_disk;
use czsob::{beurling_kernel, PvSchedule};

fn transforms(c: &mut Criterion) {
    let disk = make_disk(1.0).unwrap();
    let (re, _) = complex_monomial(2, 1, [0.0, 0.0]);
    let kernel = beurling_kernel();
    let sched = PvSchedule::default();
    let x = [0.3, -0.2];
    c.bench_function("pv_disk_z2zbar", |b| b.iter(|| pv_transform(&kernel, &disk, &re, x, &sched).unwrap()));
    c.bench_function("contour_disk_z2zbar", |b| b.iter(|| boundary_transform(&disk, &re, x).unwrap()));
}

criterion_group!(benches, transforms);
criterion_main!(benches);
