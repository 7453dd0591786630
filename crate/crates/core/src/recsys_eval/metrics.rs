use std::collections::HashSet;
use std::hash::Hash;

use crate::error::{Error, Result};

fn dcg(gains: &[f64], n: usize) -> f64 {
    gains
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// DCG@n of `ranked_gains` over DCG@n of `ideal_gains`, with
/// `DCG = sum_i gain_i / log2(i + 1)` over 1-based ranks. A list whose ideal
/// DCG is zero scores 1.0.
pub fn ndcg_at_n(ranked_gains: &[f64], ideal_gains: &[f64], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("NDCG cutoff must be at least 1"));
    }
    if ranked_gains.len() != ideal_gains.len() {
        return Err(Error::arg(format!(
            "{} ranked gains but {} ideal gains",
            ranked_gains.len(),
            ideal_gains.len()
        )));
    }
    if ideal_gains.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::arg("ideal gains must be sorted in descending order"));
    }
    let ideal = dcg(ideal_gains, n);
    if ideal == 0.0 {
        return Ok(1.0);
    }
    Ok((dcg(ranked_gains, n) / ideal).min(1.0))
}

/// [`ndcg_at_n`] with the ideal ordering derived from `ranked_gains`.
pub fn ndcg_of_ranking(ranked_gains: &[f64], n: usize) -> Result<f64> {
    let mut ideal = ranked_gains.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    ndcg_at_n(ranked_gains, &ideal, n)
}

/// Precision at each relevant hit, summed and divided by the number of
/// relevant items. `None` when nothing is relevant; such users are left out
/// of MAP.
pub fn average_precision<T: Eq + Hash>(ranked_items: &[T], relevant: &HashSet<T>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, item) in ranked_items.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

/// Unweighted mean of the defined per-user APs; 0.0 when none is defined.
pub fn mean_average_precision(aps: impl IntoIterator<Item = Option<f64>>) -> f64 {
    let (sum, n) = aps
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), ap| (s + ap, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ndcg_examples() {
        assert_eq!(
            ndcg_at_n(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0], 3).unwrap(),
            1.0
        );
        let v = ndcg_at_n(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0], 3).unwrap();
        let expected = (1.0 + 2.0 / 3f64.log2() + 1.5) / (3.0 + 2.0 / 3f64.log2() + 0.5);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.7899).abs() < 5e-4);
        assert_eq!(ndcg_at_n(&[0.0, 0.0], &[0.0, 0.0], 2).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_errors() {
        assert!(ndcg_at_n(&[1.0], &[1.0, 0.0], 1).is_err());
        assert!(ndcg_at_n(&[1.0], &[1.0], 0).is_err());
        assert!(ndcg_at_n(&[1.0, 2.0], &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn cutoff_ignores_tail() {
        assert_eq!(ndcg_of_ranking(&[5.0, 1.0, 3.0], 1).unwrap(), 1.0);
        assert!(ndcg_of_ranking(&[5.0, 1.0, 3.0], 3).unwrap() < 1.0);
    }

    #[test]
    fn ap_examples() {
        let rel: HashSet<char> = ['a'].into();
        assert_eq!(average_precision(&['a', 'b'], &rel), Some(1.0));
        assert_eq!(average_precision(&['b', 'a'], &rel), Some(0.5));
        let rel: HashSet<char> = ['a', 'b'].into();
        let ap = average_precision(&['a', 'x', 'b'], &rel).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&['a'], &HashSet::new()), None);
        assert_eq!(mean_average_precision([Some(1.0), None, Some(0.5)]), 0.75);
    }

    proptest! {
        #[test]
        fn ndcg_bounded_and_one_when_sorted(gains in prop::collection::vec(0.0f64..5.0, 1..20), n in 1usize..25) {
            let v = ndcg_of_ranking(&gains, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let mut sorted = gains.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            prop_assert_eq!(ndcg_of_ranking(&sorted, n).unwrap(), 1.0);
        }

        #[test]
        fn ap_ignores_order_below_last_hit(
            n_items in 2usize..15,
            rel_mask in prop::collection::vec(any::<bool>(), 15),
            seed in any::<u64>(),
        ) {
            let items: Vec<usize> = (0..n_items).collect();
            let relevant: HashSet<usize> = items.iter().copied().filter(|&i| rel_mask[i]).collect();
            prop_assume!(!relevant.is_empty());
            let last_hit = items.iter().rposition(|i| relevant.contains(i)).unwrap();
            let mut shuffled = items.clone();
            let tail = &mut shuffled[last_hit + 1..];
            // deterministic rotation of the tail
            if !tail.is_empty() {
                let r = (seed as usize) % tail.len();
                tail.rotate_left(r);
            }
            prop_assert_eq!(average_precision(&items, &relevant), average_precision(&shuffled, &relevant));
        }
    }
}
