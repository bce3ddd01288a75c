use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use czsob::build_covering;
use czsob::geometry::{make_disk, make_polygon};

fn covering(c: &mut Criterion) {
    let disk = make_disk(1.0).unwrap();
    let square = make_polygon(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]).unwrap();
    let mut g = c.benchmark_group("build_and_orient");
    g.sample_size(10);
    for depth in [5u32, 6, 7] {
        let side = (-(depth as f64)).exp2();
        for (name, domain) in [("disk", &disk), ("square", &square)] {
            g.bench_with_input(BenchmarkId::new(name, depth), &side, |b, &side| {
                b.iter(|| {
                    let mut cov = build_covering(domain, side, 1.0).unwrap();
                    cov.orient().unwrap();
                    cov
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, covering);
criterion_main!(benches);
