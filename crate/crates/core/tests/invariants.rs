use mmloc_core::calibration::{
    localize_1nn, matching_loss, objective, solve_calibration, SharedAnchors,
};
use mmloc_core::floorplan::{
    geodesic_distances, sample_uniform, FloorPlan, Point, Polygon, Segment,
};
use mmloc_core::graphkernels::{
    binary_mutual_knn, normalized_gaussian, self_tuning_gaussian, trace_projection_similarity,
    FeatureMatrix, GraphMeta, SignalSet, WeightedGraph,
};
use mmloc_core::spectral::{embed, normalized_laplacian, Embedding};
use mmloc_core::synth::build_signal_sets;
use mmloc_core::{ingest_rssi_dataset, load_corpus, IngestOptions, Schema, SignalCorpus};
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(seed: u64, n: usize, dim: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::real(DMatrix::from_fn(n, dim, |_, _| rng.gen::<f64>())).unwrap()
}

fn complex_sets(seed: u64, m: usize, k: usize, p: usize) -> Vec<SignalSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            DMatrix::from_fn(k, p, |_, _| {
                Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            })
        })
        .collect()
}

fn walled_square() -> FloorPlan {
    FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0)
        .unwrap()
        .with_walls(vec![Segment::new(
            Point::new(0.5, 0.0),
            Point::new(0.5, 0.7),
        )])
        .unwrap()
}

fn embedding_pair(
    seed: u64,
    m: usize,
    t: usize,
    d: usize,
    l: usize,
) -> (Embedding, mmloc_core::Laplacian, Embedding, Vec<Point>) {
    let lap = normalized_laplacian(&self_tuning_gaussian(&cloud(seed, m, 3), 5).unwrap()).unwrap();
    let sig = embed(&lap, d, true).unwrap();
    let pts_fm = cloud(seed + 1, t, 2);
    let area = embed(
        &normalized_laplacian(&self_tuning_gaussian(&pts_fm, 5).unwrap()).unwrap(),
        l,
        true,
    )
    .unwrap();
    let pts = match pts_fm {
        FeatureMatrix::Real(p) => (0..t).map(|i| Point::new(p[(i, 0)], p[(i, 1)])).collect(),
        FeatureMatrix::Complex(_) => unreachable!(),
    };
    (sig, lap, area, pts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn geodesic_triangle_inequality(seed in 0u64..1000) {
        let plan = walled_square();
        let pts = sample_uniform(&plan, 3, seed).unwrap().points;
        let res = 0.05;
        let d = geodesic_distances(&plan, &pts, res).unwrap();
        for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            prop_assert!(d[(a, c)] <= d[(a, b)] + d[(b, c)] + 2.0 * res);
        }
        for i in 0..3 {
            prop_assert_eq!(d[(i, i)], 0.0);
            for j in 0..3 {
                prop_assert_eq!(d[(i, j)], d[(j, i)]);
                prop_assert!(d[(i, j)] >= pts[i].dist(&pts[j]) - 1e-12);
            }
        }
    }

    #[test]
    fn kernels_are_exactly_symmetric(seed in 0u64..1000, n in 4usize..30, k in 1usize..4) {
        let pts = cloud(seed, n, 3);
        let sigma = 0.1 + (seed % 7) as f64 * 0.1;
        let g = normalized_gaussian(&pts, sigma).unwrap();
        let w = g.weights();
        prop_assert!(w == &w.transpose());
        prop_assert!(w.iter().all(|&v| v > 0.0 && v.is_finite()));
        let st = self_tuning_gaussian(&pts, k).unwrap();
        prop_assert!(st.weights() == &st.weights().transpose());
    }

    #[test]
    fn trace_projection_ignores_complex_scale(seed in 0u64..1000, rank in 1usize..3) {
        let sets = complex_sets(seed, 8, 6, 4);
        let f = trace_projection_similarity(&sets, rank).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let scaled: Vec<SignalSet> = sets
            .iter()
            .map(|s| s * Complex::from_polar(rng.gen_range(0.05..20.0), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        let g = trace_projection_similarity(&scaled, rank).unwrap();
        prop_assert!((f - g).amax() <= 1e-10);
    }

    #[test]
    fn positive_gains_leave_trace_graph_unchanged(seed in 0u64..1000) {
        let sets = complex_sets(seed, 12, 5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let gained: Vec<SignalSet> = sets.iter().map(|s| s * Complex::new(rng.gen_range(0.5..2.0), 0.0)).collect();
        let a = binary_mutual_knn(&trace_projection_similarity(&sets, 2).unwrap(), 3).unwrap();
        let b = binary_mutual_knn(&trace_projection_similarity(&gained, 2).unwrap(), 3).unwrap();
        prop_assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn mutual_knn_is_symmetric_binary(seed in 0u64..1000, k in 1usize..5) {
        let sets = complex_sets(seed, 10, 4, 3);
        let f = trace_projection_similarity(&sets, 1).unwrap();
        let g = binary_mutual_knn(&f, k).unwrap();
        let w = g.weights();
        prop_assert!(w == &w.transpose());
        for i in 0..10 {
            prop_assert_eq!(w[(i, i)], 0.0);
            prop_assert!(w.row(i).iter().filter(|&&v| v == 1.0).count() >= k);
            prop_assert!(w.row(i).iter().all(|&v| v == 0.0 || v == 1.0));
        }
        let again = binary_mutual_knn(&f, k).unwrap();
        prop_assert_eq!(again.weights(), w);
    }

    #[test]
    fn laplacian_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
        let g = self_tuning_gaussian(&cloud(seed, 20, 2), 3).unwrap();
        let scaled = WeightedGraph::new(g.weights() * c, GraphMeta::default()).unwrap();
        let a = normalized_laplacian(&g).unwrap();
        let b = normalized_laplacian(&scaled).unwrap();
        prop_assert!((a.matrix() - b.matrix()).amax() <= 1e-10);
        let spec = a.spectrum();
        prop_assert!(spec.iter().all(|&l| (-1e-9..=2.0 + 1e-9).contains(&l)));
    }

    #[test]
    fn embedding_residuals(seed in 0u64..1000, dim in 1usize..6) {
        let lap = normalized_laplacian(&self_tuning_gaussian(&cloud(seed, 30, 3), 4).unwrap()).unwrap();
        let e = embed(&lap, dim, true).unwrap();
        for (k, &lambda) in e.eigenvalues().iter().enumerate() {
            let u = e.vectors().column(k).into_owned();
            prop_assert!(lap.residual(&u, lambda) <= 1e-7);
        }
    }

    #[test]
    fn calibration_is_stationary(seed in 0u64..1000, lambda in 1e-3f64..1.0) {
        let (sig, _, area, pts) = embedding_pair(seed, 40, 40, 4, 2);
        let anchors = SharedAnchors::new((0..10).collect(), (5..15).collect()).unwrap();
        let model = solve_calibration(&sig, &area, &pts, &anchors, lambda).unwrap();
        let f0 = objective(model.c(), &sig, &area, &anchors, lambda).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let mut delta = DMatrix::from_fn(2, 4, |_, _| rng.gen::<f64>() - 0.5);
            delta /= delta.norm();
            let f = objective(&(model.c() + 1e-4 * delta), &sig, &area, &anchors, lambda).unwrap();
            prop_assert!(f >= f0 - 1e-10);
        }
    }

    #[test]
    fn smoothness_nonincreasing_in_lambda(seed in 0u64..1000) {
        let (sig, lap, area, pts) = embedding_pair(seed, 40, 40, 5, 2);
        let anchors = SharedAnchors::new((0..12).collect(), (3..15).collect()).unwrap();
        let mut last = f64::INFINITY;
        for lambda in [0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let c = solve_calibration(&sig, &area, &pts, &anchors, lambda).unwrap().c().clone();
            let psi = sig.vectors() * c.transpose();
            let smooth = (psi.transpose() * lap.matrix() * &psi).trace();
            prop_assert!(smooth <= last * (1.0 + 1e-9) + 1e-12);
            last = smooth;
        }
    }

    #[test]
    fn matching_loss_ignores_row_order(seed in 0u64..1000) {
        let (_, _, area, _) = embedding_pair(seed, 10, 25, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = DMatrix::from_fn(18, 2, |_, _| rng.gen::<f64>() * 0.4 - 0.2);
        let base = matching_loss(&area, &psi).unwrap();
        let mut order: Vec<usize> = (0..18).collect();
        order.shuffle(&mut rng);
        let shuffled = psi.select_rows(&order);
        let mut area_order: Vec<usize> = (0..25).collect();
        area_order.shuffle(&mut rng);
        let area_shuffled = Embedding::from_parts(
            area.vectors().select_rows(&area_order),
            area.eigenvalues().to_vec(),
            true,
        )
        .unwrap();
        prop_assert!((matching_loss(&area_shuffled, &shuffled).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn localization_invariant_under_rotation(seed in 0u64..1000, angle in 0.0f64..std::f64::consts::TAU) {
        let (_, _, area, pts) = embedding_pair(seed, 10, 30, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = DMatrix::from_fn(15, 2, |_, _| rng.gen::<f64>() * 0.4 - 0.2);
        let (s, c) = angle.sin_cos();
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let rotated_area = Embedding::from_parts(area.vectors() * &q, area.eigenvalues().to_vec(), true).unwrap();
        let a = localize_1nn(&psi, &area, &pts).unwrap();
        let b = localize_1nn(&(&psi * &q), &rotated_area, &pts).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn signal_sets_stable_under_shuffling(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 150;
        let locs: Vec<Point> = (0..n).map(|_| Point::new(rng.gen(), rng.gen())).collect();
        let sig = DMatrix::from_fn(n, 3, |_, _| rng.gen::<f64>());
        let a = build_signal_sets(&locs, &sig, 10, 4, 1.0, 3).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let locs2: Vec<Point> = perm.iter().map(|&i| locs[i]).collect();
        let b = build_signal_sets(&locs2, &sig.select_rows(&perm), 10, 4, 1.0, 3).unwrap();
        prop_assert_eq!(&a.centers, &b.centers);
        prop_assert_eq!(&a.sets, &b.sets);
    }
}

#[test]
fn sampling_splits_evenly_between_congruent_rooms() {
    // two unit rooms joined by thin corridors around a central hole
    let plan = FloorPlan::new(
        Polygon::rect(0.0, 0.0, 3.0, 1.0),
        vec![Polygon::rect(1.0, 0.01, 2.0, 0.99)],
        vec![],
    )
    .unwrap();
    let pts = sample_uniform(&plan, 4000, 11).unwrap().points;
    let left = pts.iter().filter(|p| p.x < 1.0).count() as f64;
    let right = pts.iter().filter(|p| p.x > 2.0).count() as f64;
    let both = left + right;
    let sd = (both * 0.25).sqrt();
    assert!(
        (left - both / 2.0).abs() <= 4.0 * sd,
        "left {left} right {right}"
    );
}

#[test]
fn corpus_round_trips_real_and_complex() {
    let dir = tempfile::tempdir().unwrap();
    let real = FeatureMatrix::real(DMatrix::from_fn(5, 3, |i, j| {
        (i * 3 + j) as f64 / 7.0 - 0.3
    }))
    .unwrap();
    let pos: Vec<Point> = (0..5)
        .map(|i| Point::new(i as f64 * 0.1, 1.0 / 3.0))
        .collect();
    let cplx = FeatureMatrix::complex(DMatrix::from_fn(4, 2, |i, j| {
        Complex::new(i as f64 / 3.0, -(j as f64) * 0.1)
    }))
    .unwrap();
    for (name, corpus) in [
        (
            "r",
            SignalCorpus::from_features(&real, Some(&pos), Default::default()).unwrap(),
        ),
        (
            "c",
            SignalCorpus::from_features(&cplx, None, Default::default()).unwrap(),
        ),
    ] {
        for (ext, schema) in [("csv", Schema::Csv), ("json", Schema::Json)] {
            let path = dir.path().join(format!("{name}.{ext}"));
            corpus.save(&path).unwrap();
            let back = load_corpus(&path, schema).unwrap();
            assert_eq!(back.records(), corpus.records(), "{name}.{ext}");
            assert_eq!(back.is_complex(), corpus.is_complex());
        }
    }
}

#[test]
fn ingest_ignores_row_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows: Vec<String> = (0..60)
        .map(|i| {
            let spot = i % 15;
            let w: Vec<String> = (0..4)
                .map(|_| {
                    if rng.gen::<f64>() < 0.3 {
                        "100".into()
                    } else {
                        format!("{}", -rng.gen_range(30..95))
                    }
                })
                .collect();
            format!(
                "{},{},{},0,1",
                w.join(","),
                10.0 + spot as f64,
                20.0 - spot as f64 * 0.5
            )
        })
        .collect();
    let header = "WAP001,WAP002,WAP003,WAP004,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n";
    let a_path = dir.path().join("a.csv");
    std::fs::write(&a_path, format!("{header}{}\n", rows.join("\n"))).unwrap();
    rows.shuffle(&mut rng);
    let b_path = dir.path().join("b.csv");
    std::fs::write(&b_path, format!("{header}{}\n", rows.join("\n"))).unwrap();
    let opts = IngestOptions::default();
    let a = ingest_rssi_dataset(&a_path, &opts).unwrap();
    let b = ingest_rssi_dataset(&b_path, &opts).unwrap();
    assert_eq!(a.records(), b.records());
    let ga = self_tuning_gaussian(&a.features().unwrap(), 3).unwrap();
    let gb = self_tuning_gaussian(&b.features().unwrap(), 3).unwrap();
    assert_eq!(ga.weights(), gb.weights());
}
