use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mmloc_core::floorplan::{geodesic_distances, sample_uniform, Segment};
use mmloc_core::graphkernels::{
    knn_bandwidth, normalized_gaussian, self_tuning_gaussian, trace_projection_similarity,
};
use mmloc_core::spectral::embed_with_limit;
use mmloc_core::{
    embed, normalized_laplacian, solve_calibration, FeatureMatrix, FloorPlan, Point, SharedAnchors,
    SignalSet,
};
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn cloud(n: usize, dim: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::real(DMatrix::from_fn(n, dim, |_, _| rng.gen::<f64>())).unwrap()
}

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernels");
    for n in [250, 1000] {
        let pts = cloud(n, 20, 1);
        let sigma = knn_bandwidth(&pts, 10).unwrap();
        g.bench_with_input(BenchmarkId::new("normalized_gaussian", n), &pts, |b, p| {
            b.iter(|| normalized_gaussian(black_box(p), sigma).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("self_tuning", n), &pts, |b, p| {
            b.iter(|| self_tuning_gaussian(black_box(p), 10).unwrap())
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sets: Vec<SignalSet> = (0..200)
        .map(|_| {
            DMatrix::from_fn(20, 8, |_, _| {
                Complex::new(rng.gen::<f64>(), rng.gen::<f64>())
            })
        })
        .collect();
    g.bench_function("trace_projection_200", |b| {
        b.iter(|| trace_projection_similarity(black_box(&sets), 3).unwrap())
    });
    g.finish();
}

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("embed");
    g.sample_size(10);
    for n in [500, 1000] {
        let lap =
            normalized_laplacian(&self_tuning_gaussian(&cloud(n, 5, 3), 10).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("dense", n), &lap, |b, l| {
            b.iter(|| embed(l, 8, true).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("lanczos", n), &lap, |b, l| {
            b.iter(|| embed_with_limit(l, 8, true, 0).unwrap())
        });
    }
    g.finish();
}

fn geodesic(c: &mut Criterion) {
    let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0)
        .unwrap()
        .with_walls(vec![Segment::new(
            Point::new(0.5, 0.0),
            Point::new(0.5, 0.7),
        )])
        .unwrap();
    let pts = sample_uniform(&plan, 200, 4).unwrap().points;
    let mut g = c.benchmark_group("geodesic");
    g.sample_size(10);
    for res in [0.02, 0.01] {
        g.bench_with_input(BenchmarkId::new("pairwise_200", res), &res, |b, &r| {
            b.iter(|| geodesic_distances(&plan, black_box(&pts), r).unwrap())
        });
    }
    g.finish();
}

fn calibration(c: &mut Criterion) {
    let sig = embed(
        &normalized_laplacian(&self_tuning_gaussian(&cloud(1000, 20, 5), 10).unwrap()).unwrap(),
        8,
        true,
    )
    .unwrap();
    let area_fm = cloud(1000, 2, 6);
    let area = embed(
        &normalized_laplacian(&normalized_gaussian(&area_fm, 0.1).unwrap()).unwrap(),
        2,
        true,
    )
    .unwrap();
    let pts: Vec<Point> = match &area_fm {
        FeatureMatrix::Real(p) => (0..1000)
            .map(|i| Point::new(p[(i, 0)], p[(i, 1)]))
            .collect(),
        FeatureMatrix::Complex(_) => unreachable!(),
    };
    let anchors = SharedAnchors::new((0..20).collect(), (0..20).collect()).unwrap();
    c.bench_function("solve_calibration_1000", |b| {
        b.iter(|| solve_calibration(black_box(&sig), &area, &pts, &anchors, 0.01).unwrap())
    });
}

criterion_group!(benches, kernels, spectral, geodesic, calibration);
criterion_main!(benches);
