use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use metric_union::linalg::PointCloud;
use metric_union::metric::FiniteMetricSpace;
use metric_union::par::{map_range, map_range_seq};
use metric_union::testgen::random_instance;
use metric_union::union_embed::{embed_union, EmbedParams};

/// Per-row max and min of `‖c_i − c_j‖ / d(i, j)`, the inner loop of every
/// distortion audit.
fn row_ratios(x: &FiniteMetricSpace, c: &PointCloud, i: usize) -> (f64, f64) {
    let mut hi = 0.0_f64;
    let mut lo = f64::INFINITY;
    for j in (i + 1)..x.len() {
        let r = c.distance(i, j) / x.d(i, j);
        hi = hi.max(r);
        lo = lo.min(r);
    }
    (hi, lo)
}

fn bench_audit_kernel(cr: &mut Criterion) {
    let mut group = cr.benchmark_group("pair_ratios");
    for k in [0u64, 3] {
        let inst = random_instance(k, 0).unwrap();
        let u = embed_union(&inst.space, &inst.partition, &inst.phi_a, &inst.phi_b, &EmbedParams::new(0.5, 1.0, 1.0, 1e-7).unwrap()).unwrap();
        let n = inst.space.len();
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| black_box(map_range(n, |i| row_ratios(&inst.space, &u.full, i))))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(map_range_seq(n, |i| row_ratios(&inst.space, &u.full, i))))
        });
    }
    group.finish();
}

fn bench_embed(cr: &mut Criterion) {
    let inst = random_instance(7, 0).unwrap();
    let params = EmbedParams::new(0.5, 1.0, 1.0, 1e-7).unwrap();
    let mut group = cr.benchmark_group("embed_union");
    group.sample_size(10);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    for t in [1, threads] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        group.bench_function(BenchmarkId::new("threads", t), |b| {
            b.iter(|| pool.install(|| black_box(embed_union(&inst.space, &inst.partition, &inst.phi_a, &inst.phi_b, &params).unwrap())))
        });
        if threads == 1 {
            break;
        }
    }
    group.finish();
}

criterion_group!(benches, bench_audit_kernel, bench_embed);
criterion_main!(benches);
