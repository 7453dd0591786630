use coldstart::coldstart::{
    detect_breakpoint_xy, quality_curve, regression_intersection, success_curve, trajectories,
    BreakpointMethod, QualityCurve, QualityPoint,
};
use coldstart::dataset::{PrefixOrdering, RatingMatrix, SparseRow};
use coldstart::kmeans::{fit, KMeansConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Users drawn around a few prototypes, each rating a random subset of items.
fn clustered_matrix(seed: u64, n_users: usize, n_items: usize, groups: usize) -> RatingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos: Vec<Vec<f64>> = (0..groups)
        .map(|_| (0..n_items).map(|_| rng.random_range(1.0..=5.0)).collect())
        .collect();
    let rows = (0..n_users)
        .map(|u| {
            let p = &protos[u % groups];
            let n = rng.random_range(2..=n_items);
            let mut items: Vec<u32> = (0..n_items as u32).collect();
            items.shuffle(&mut rng);
            let pairs = items[..n]
                .iter()
                .map(|&i| {
                    (
                        i,
                        (p[i as usize] + rng.random_range(-0.5..0.5)).clamp(1.0, 5.0),
                    )
                })
                .collect();
            SparseRow::from_pairs(pairs).unwrap()
        })
        .collect();
    RatingMatrix::from_points(rows, n_items).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn saturated_prefixes_reproduce_final_clusters(seed in any::<u64>(), n_users in 8usize..40, k in 2usize..5) {
        let m = clustered_matrix(seed, n_users, 12, 3);
        let mut cfg = KMeansConfig::new(k, seed);
        cfg.restarts = 2;
        let model = fit(&m, &cfg).unwrap();
        let users: Vec<usize> = (0..n_users).collect();
        let t_max = 12;
        let trajs = trajectories(&model, &m, &users, t_max, PrefixOrdering::ByItemIndex).unwrap();
        for tr in &trajs {
            prop_assert_eq!(tr.prefix_clusters[tr.history_len - 1], tr.final_cluster);
            prop_assert_eq!(tr.final_cluster, model.assignments()[tr.user]);
        }
        // Among users whose history is exactly t long, every one succeeds at t.
        let curve = success_curve(&model, &m, &users, t_max, PrefixOrdering::ByItemIndex).unwrap();
        let last = curve.points.last().unwrap();
        let longest = trajs.iter().map(|t| t.history_len).max().unwrap();
        prop_assert_eq!(last.t, longest);
        prop_assert_eq!(last.success_fraction, 1.0);

        if let Ok(q) = quality_curve(&model, &m, &users, t_max, PrefixOrdering::ByItemIndex) {
            for p in q.points.iter().filter(|p| p.t >= longest) {
                prop_assert_eq!(p.current_quality_mean, p.reference_quality_mean);
            }
        }
    }

    #[test]
    fn curves_ignore_user_order(seed in any::<u64>()) {
        let m = clustered_matrix(seed, 20, 10, 2);
        let model = fit(&m, &KMeansConfig::new(3, seed)).unwrap();
        let users: Vec<usize> = (0..20).collect();
        let mut shuffled = users.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = success_curve(&model, &m, &users, 10, PrefixOrdering::ByItemIndex).unwrap();
        let b = success_curve(&model, &m, &shuffled, 10, PrefixOrdering::ByItemIndex).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn noiseless_two_lines_give_the_exact_knee(
        knee in 5usize..45,
        s1 in 0.5f64..5.0,
        s2 in -1.0f64..0.4,
        c in -10.0f64..10.0,
    ) {
        let ts: Vec<usize> = (1..=50).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| {
            let (t, k) = (t as f64, knee as f64);
            if t <= k { c + s1 * t } else { c + s1 * k + s2 * (t - k) }
        }).collect();
        let r = detect_breakpoint_xy(&ts, &ys, BreakpointMethod::SegmentedLinear, 1, 50).unwrap();
        prop_assert_eq!(r.t_star, knee);
        prop_assert!(r.total_sse < 1e-16 * (1.0 + ys.iter().map(|y| y * y).sum::<f64>()));
    }

    #[test]
    fn log_fit_inverts_in_closed_form(a in -10.0f64..0.0, b in 0.1f64..3.0, r in -5.0f64..0.0) {
        let c = QualityCurve {
            points: (1..=60).map(|t| QualityPoint {
                t,
                current_quality_mean: a + b * (t as f64).ln(),
                reference_quality_mean: r,
            }).collect(),
        };
        let ix = regression_intersection(&c).unwrap();
        let expect = ((r - a) / b).exp();
        prop_assert!((ix.t_cross - expect).abs() <= 1e-8 * expect);
        prop_assert_eq!(ix.extrapolated, !(1.0..=60.0).contains(&expect));
    }
}

#[test]
fn curves_do_not_depend_on_worker_count() {
    let m = clustered_matrix(3, 200, 30, 4);
    let users: Vec<usize> = (0..200).step_by(3).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let model = fit(&m, &KMeansConfig::new(8, 11)).unwrap();
                let s = success_curve(&model, &m, &users, 30, PrefixOrdering::ByItemIndex).unwrap();
                let q = quality_curve(&model, &m, &users, 30, PrefixOrdering::ByItemIndex).unwrap();
                (model, s, q)
            })
    };
    assert_eq!(run(1), run(8));
}
