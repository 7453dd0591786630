//! Offline top-N evaluation of a cluster-based collaborative filter, used to
//! pick the cluster-size coefficient.
//!
//! Each user hides `holdout_per_user` ratings. The hidden items are ranked
//! together with a pool of items the user never rated, scored by the mean
//! rating among the user's cluster co-members. NDCG uses the normalized
//! rating as graded gain (pool items gain 0); MAP counts hidden ratings of at
//! least `relevance_threshold` as relevant.

mod metrics;

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{RatingMatrix, SCALE_MAX, SCALE_MID, SCALE_MIN};
use crate::error::{Error, Result};
use crate::kmeans::{fit, n_clusters_from_coeff, ClusterModel, KMeansConfig};

pub use metrics::{average_precision, mean_average_precision, ndcg_at_n, ndcg_of_ranking};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub holdout_per_user: usize,
    /// Never-rated items ranked alongside the hidden ones.
    pub candidate_pool: usize,
    pub relevance_threshold: f64,
    pub ndcg_cutoff: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            holdout_per_user: 10,
            candidate_pool: 100,
            relevance_threshold: 4.0,
            ndcg_cutoff: 10,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.holdout_per_user < 1 || self.ndcg_cutoff < 1 {
            return Err(Error::arg(
                "holdout_per_user and ndcg_cutoff must be at least 1",
            ));
        }
        if !(SCALE_MIN..=SCALE_MAX).contains(&self.relevance_threshold) {
            return Err(Error::arg("relevance_threshold must lie in [1, 5]"));
        }
        Ok(())
    }
}

/// Mean rating of `item` among the other members of `user`'s cluster, falling
/// back to the item's mean over all other users, then to 3.0.
pub fn predict_score(
    model: &ClusterModel,
    m: &RatingMatrix,
    user: usize,
    item: usize,
) -> Result<f64> {
    model.check_shape(m)?;
    if user >= m.n_users() || item >= m.n_items() {
        return Err(Error::arg(format!("unknown user {user} or item {item}")));
    }
    Ok(direct_score(model, m, user, item as u32))
}

fn direct_score(model: &ClusterModel, m: &RatingMatrix, user: usize, item: u32) -> f64 {
    let cluster = model.assignments()[user];
    let mut co = (0.0, 0usize);
    let mut all = (0.0, 0usize);
    for (u, row) in m.rows().iter().enumerate() {
        if u == user {
            continue;
        }
        if let Some(v) = row.get(item) {
            all = (all.0 + v, all.1 + 1);
            if model.assignments()[u] == cluster {
                co = (co.0 + v, co.1 + 1);
            }
        }
    }
    score_from(co, all)
}

fn score_from(co: (f64, usize), all: (f64, usize)) -> f64 {
    if co.1 > 0 {
        co.0 / co.1 as f64
    } else if all.1 > 0 {
        all.0 / all.1 as f64
    } else {
        SCALE_MID
    }
}

/// [`predict_score`] with per-cluster item sums precomputed.
pub struct ClusterPredictor<'a> {
    model: &'a ClusterModel,
    m: &'a RatingMatrix,
    cluster_items: Vec<HashMap<u32, (f64, usize)>>,
    global: Vec<(f64, usize)>,
}

impl<'a> ClusterPredictor<'a> {
    pub fn new(model: &'a ClusterModel, m: &'a RatingMatrix) -> Result<Self> {
        model.check_shape(m)?;
        let mut cluster_items = vec![HashMap::new(); model.n_clusters()];
        let mut global = vec![(0.0, 0usize); m.n_items()];
        for (row, &j) in m.rows().iter().zip(model.assignments()) {
            for (i, v) in row.iter() {
                let e = cluster_items[j].entry(i).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
                let g = &mut global[i as usize];
                g.0 += v;
                g.1 += 1;
            }
        }
        Ok(ClusterPredictor {
            model,
            m,
            cluster_items,
            global,
        })
    }

    pub fn score(&self, user: usize, item: u32) -> f64 {
        if self.m.rows()[user].get(item).is_some() {
            // The user's own rating would have to be taken back out.
            return direct_score(self.model, self.m, user, item);
        }
        let j = self.model.assignments()[user];
        let co = self.cluster_items[j]
            .get(&item)
            .copied()
            .unwrap_or((0.0, 0));
        score_from(co, self.global[item as usize])
    }
}

/// One user's hidden ratings and pool of never-rated items.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSplit {
    /// `(item index, normalized rating)`
    pub holdout: Vec<(u32, f64)>,
    pub pool: Vec<u32>,
}

/// Seeded holdout split. Fails listing the ids of users with too few ratings.
pub fn split_holdout(
    m: &RatingMatrix,
    ecfg: &EvalConfig,
) -> Result<(RatingMatrix, Vec<UserSplit>)> {
    ecfg.validate()?;
    let short: Vec<u64> = (0..m.n_users())
        .filter(|&u| m.rows()[u].len() <= ecfg.holdout_per_user)
        .map(|u| m.user_ids()[u])
        .collect();
    if !short.is_empty() {
        let shown: Vec<String> = short.iter().take(20).map(u64::to_string).collect();
        return Err(Error::arg(format!(
            "{} users have at most {} ratings, too few for the holdout: {}{}",
            short.len(),
            ecfg.holdout_per_user,
            shown.join(", "),
            if short.len() > 20 { ", ..." } else { "" }
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ecfg.seed);
    let mut hidden: Vec<HashSet<usize>> = Vec::with_capacity(m.n_users());
    let mut splits = Vec::with_capacity(m.n_users());
    for row in m.rows() {
        let mut pos =
            rand::seq::index::sample(&mut rng, row.len(), ecfg.holdout_per_user).into_vec();
        pos.sort_unstable();
        let holdout = pos
            .iter()
            .map(|&p| (row.indices()[p], row.values()[p]))
            .collect();

        let unrated: Vec<u32> = (0..m.n_items() as u32)
            .filter(|&i| row.get(i).is_none())
            .collect();
        let take = ecfg.candidate_pool.min(unrated.len());
        let mut pool: Vec<u32> = rand::seq::index::sample(&mut rng, unrated.len(), take)
            .into_iter()
            .map(|p| unrated[p])
            .collect();
        pool.sort_unstable();

        hidden.push(pos.into_iter().collect());
        splits.push(UserSplit { holdout, pool });
    }
    let train = m.retain_entries(|u, p| !hidden[u].contains(&p));
    Ok((train, splits))
}

/// Per-user NDCG@cutoff and AP of the predictor's ranking of holdout and pool
/// items. Ties in score rank the smaller item id first.
pub fn evaluate_user(
    predictor: &ClusterPredictor<'_>,
    item_ids: &[u64],
    user: usize,
    split: &UserSplit,
    ecfg: &EvalConfig,
) -> Result<(f64, Option<f64>)> {
    let mut ranked: Vec<(f64, u32, f64)> = split
        .holdout
        .iter()
        .map(|&(i, v)| (predictor.score(user, i), i, v))
        .chain(
            split
                .pool
                .iter()
                .map(|&i| (predictor.score(user, i), i, 0.0)),
        )
        .collect();
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| item_ids[a.1 as usize].cmp(&item_ids[b.1 as usize]))
    });
    let gains: Vec<f64> = ranked.iter().map(|r| r.2).collect();
    let ndcg = ndcg_of_ranking(&gains, ecfg.ndcg_cutoff)?;
    let relevant: HashSet<u32> = split
        .holdout
        .iter()
        .filter(|&&(_, v)| v >= ecfg.relevance_threshold)
        .map(|&(i, _)| i)
        .collect();
    let order: Vec<u32> = ranked.iter().map(|r| r.1).collect();
    Ok((ndcg, average_precision(&order, &relevant)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k_coeff: usize,
    pub n_clusters: usize,
    pub ndcg_mean: f64,
    pub map_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best_by_ndcg: usize,
    pub best_by_map: usize,
}

impl SweepResult {
    /// `k_coeff,n_clusters,ndcg_mean,map_mean` rows and a `#` footer naming
    /// both argmaxes.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "k_coeff,n_clusters,ndcg_mean,map_mean")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.k_coeff, r.n_clusters, r.ndcg_mean, r.map_mean
            )?;
        }
        writeln!(
            out,
            "# best_by_ndcg={} best_by_map={}",
            self.best_by_ndcg, self.best_by_map
        )?;
        Ok(())
    }
}

fn argmax_coeff(rows: &[SweepRow], key: impl Fn(&SweepRow) -> f64) -> usize {
    rows.iter()
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if key(b) > key(r) || (key(b) == key(r) && b.k_coeff <= r.k_coeff) => Some(b),
            _ => Some(r),
        })
        .expect("non-empty sweep")
        .k_coeff
}

/// Fits one model per coefficient on the same holdout split and records mean
/// NDCG and MAP for each.
pub fn sweep_coefficient(
    m: &RatingMatrix,
    coeffs: &[usize],
    kcfg_template: &KMeansConfig,
    ecfg: &EvalConfig,
) -> Result<SweepResult> {
    if coeffs.is_empty() {
        return Err(Error::arg("no coefficients to sweep"));
    }
    if coeffs.contains(&0) {
        return Err(Error::arg("coefficients must be at least 1"));
    }
    let (train, splits) = split_holdout(m, ecfg)?;

    let mut rows = Vec::with_capacity(coeffs.len());
    for &k_coeff in coeffs {
        let n_clusters = n_clusters_from_coeff(train.n_users(), k_coeff);
        let cfg = KMeansConfig {
            n_clusters,
            ..kcfg_template.clone()
        };
        let model = fit(&train, &cfg)?;
        let predictor = ClusterPredictor::new(&model, &train)?;
        let per_user: Vec<(f64, Option<f64>)> = splits
            .par_iter()
            .enumerate()
            .map(|(u, split)| evaluate_user(&predictor, train.item_ids(), u, split, ecfg))
            .collect::<Result<_>>()?;
        let ndcg_mean = per_user.iter().map(|p| p.0).sum::<f64>() / per_user.len() as f64;
        let map_mean = mean_average_precision(per_user.iter().map(|p| p.1));
        log::info!(
            "k_coeff {k_coeff}: {n_clusters} clusters, NDCG {ndcg_mean:.4}, MAP {map_mean:.4}"
        );
        rows.push(SweepRow {
            k_coeff,
            n_clusters,
            ndcg_mean,
            map_mean,
        });
    }
    Ok(SweepResult {
        best_by_ndcg: argmax_coeff(&rows, |r| r.ndcg_mean),
        best_by_map: argmax_coeff(&rows, |r| r.map_mean),
        rows,
    })
}
