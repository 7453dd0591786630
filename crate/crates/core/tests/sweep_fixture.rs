//! Four disjoint user blocs: a sweep should prefer clusters the size of a bloc.

use coldstart::dataset::{RatingMatrix, SparseRow};
use coldstart::kmeans::{fit, KMeansConfig};
use coldstart::recsys_eval::{sweep_coefficient, EvalConfig};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BLOCS: usize = 4;
const BLOC_USERS: usize = 10;
const BLOC_ITEMS: usize = 15;

/// Each user rates 12 of their bloc's items 5 and 8 of the other blocs' items 1.
fn blocs(seed: u64) -> RatingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_items = BLOCS * BLOC_ITEMS;
    let rows = (0..BLOCS * BLOC_USERS)
        .map(|u| {
            let b = u / BLOC_USERS;
            let own = sample(&mut rng, BLOC_ITEMS, 12)
                .into_iter()
                .map(|i| ((b * BLOC_ITEMS + i) as u32, 5.0));
            let others: Vec<usize> = (0..n_items).filter(|i| i / BLOC_ITEMS != b).collect();
            let other = sample(&mut rng, others.len(), 8)
                .into_iter()
                .map(|i| (others[i] as u32, 1.0));
            SparseRow::from_pairs(own.chain(other).collect()).unwrap()
        })
        .collect();
    RatingMatrix::from_points(rows, n_items).unwrap()
}

fn ecfg(seed: u64) -> EvalConfig {
    EvalConfig {
        holdout_per_user: 5,
        candidate_pool: 10,
        seed,
        ..EvalConfig::default()
    }
}

#[test]
fn bloc_sized_clusters_recover_the_blocs() {
    let m = blocs(1);
    let model = fit(&m, &KMeansConfig::new(BLOCS, 0)).unwrap();
    for b in 0..BLOCS {
        let labels = &model.assignments()[b * BLOC_USERS..(b + 1) * BLOC_USERS];
        assert!(
            labels.iter().all(|&l| l == labels[0]),
            "bloc {b} split: {labels:?}"
        );
    }
}

#[test]
fn matching_coefficient_maximizes_ndcg() {
    let coeffs = [2, BLOC_USERS, BLOCS * BLOC_USERS];
    for seed in 0..5 {
        let m = blocs(seed);
        let r = sweep_coefficient(&m, &coeffs, &KMeansConfig::new(1, seed), &ecfg(seed)).unwrap();
        let ndcg: Vec<f64> = r.rows.iter().map(|row| row.ndcg_mean).collect();
        assert!(
            ndcg[1] > ndcg[0] && ndcg[1] > ndcg[2],
            "seed {seed}: {ndcg:?}"
        );
        assert_eq!(r.best_by_ndcg, BLOC_USERS);
        assert_eq!(r.rows[1].n_clusters, BLOCS);
    }
}

#[test]
fn single_coefficient_is_its_own_argmax() {
    let m = blocs(9);
    let r = sweep_coefficient(&m, &[7], &KMeansConfig::new(1, 0), &ecfg(0)).unwrap();
    assert_eq!((r.best_by_ndcg, r.best_by_map), (7, 7));
    assert!(sweep_coefficient(&m, &[], &KMeansConfig::new(1, 0), &ecfg(0)).is_err());
}
