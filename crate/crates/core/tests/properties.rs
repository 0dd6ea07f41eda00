use metric_union::cover::{build_cover, check_cover, f_lipschitz_bound};
use metric_union::linalg::{Matrix, PointCloud};
use metric_union::metric::{build_partition, distortion_of, validate_metric};
use metric_union::testgen::{floyd_warshall, random_instance};
use proptest::prelude::*;

fn cloud(points: &[Vec<f64>]) -> PointCloud {
    PointCloud::from_points(points.to_vec()).unwrap()
}

fn distinct_points(max: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0_f64, dim), 3..max).prop_filter("distinct points", |pts| {
        pts.iter().enumerate().all(|(i, p)| pts[..i].iter().all(|q| metric_union::linalg::dist(p, q) > 1e-3))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distortion_is_scale_invariant(pts in distinct_points(12, 3), noise in prop::collection::vec(0.9..1.1_f64, 36), s in 0.01..100.0_f64) {
        let n = pts.len();
        let d = Matrix::from_fn(n, n, |i, j| metric_union::linalg::dist(&pts[i], &pts[j]));
        let x = validate_metric(&d).unwrap();
        // a perturbed image
        let img: Vec<Vec<f64>> = pts.iter().enumerate().map(|(i, p)| p.iter().enumerate().map(|(k, v)| v * noise[(i * 3 + k) % 36]).collect()).collect();
        let c = cloud(&img);
        let r1 = distortion_of(&x, &c, None);
        let r2 = distortion_of(&x, &c.scaled(s), None);
        if let (Ok(r1), Ok(r2)) = (r1, r2) {
            prop_assert!((r1.distortion - r2.distortion).abs() <= 1e-9 * r1.distortion);
            prop_assert!((r2.expansion - s * r1.expansion).abs() <= 1e-9 * r2.expansion);
        }
    }

    #[test]
    fn distance_to_other_side_is_one_lipschitz(seed in 0u64..1000) {
        let inst = random_instance(seed, 0).unwrap();
        let (x, p) = (&inst.space, &inst.partition);
        for (s, &a) in p.idx_a.iter().enumerate() {
            for (t, &b) in p.idx_a.iter().enumerate() {
                prop_assert!((p.r_a[s] - p.r_a[t]).abs() <= x.d(a, b) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn covers_satisfy_their_properties(seed in 0u64..1000, alpha in 0.05..3.0_f64) {
        let inst = random_instance(seed, 1).unwrap();
        let c = build_cover(&inst.space, &inst.partition, alpha).unwrap();
        prop_assert!(check_cover(&inst.space, &inst.partition, &c).is_valid());
        prop_assert!(c.lip_f <= f_lipschitz_bound(alpha) + 1e-9);
        let swapped = inst.partition.swapped();
        let c = build_cover(&inst.space, &swapped, alpha).unwrap();
        prop_assert!(check_cover(&inst.space, &swapped, &c).is_valid());
    }

    #[test]
    fn shortest_path_closure_is_a_metric(w in prop::collection::vec(0.1..5.0_f64, 45)) {
        let n = 10;
        let mut d = Matrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                d[(i, j)] = w[k];
                d[(j, i)] = w[k];
                k += 1;
            }
        }
        floyd_warshall(&mut d);
        let x = validate_metric(&d).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let p = build_partition(&x, &idx[..6], &idx[4..]).unwrap();
        prop_assert_eq!(p.idx_a.len() + p.idx_b.len(), 12);
        prop_assert!(p.r_a[4] == 0.0 && p.r_a[5] == 0.0);
    }
}
