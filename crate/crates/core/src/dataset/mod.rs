//! Rating data: parsing, the sparse user x item matrix, filtering, sampling
//! and rating-prefix extraction.
//!
//! Both supported sources are mapped onto a common `[1, 5]` scale. Missing
//! ratings are represented by sparsity only; there is no "unrated" value.

mod export;
mod jester;
mod movielens;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use export::write_canonical;
pub use jester::{parse_jester, parse_jester_with, CountCheck, JESTER_ITEMS};
pub use movielens::{parse_movielens, parse_movielens_with, MovieLensOptions};

/// Lower bound of the common rating scale.
pub const SCALE_MIN: f64 = 1.0;
/// Upper bound of the common rating scale.
pub const SCALE_MAX: f64 = 5.0;
/// Centre of the common rating scale.
pub const SCALE_MID: f64 = 3.0;

/// One explicit rating, already normalized onto `[1, 5]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingEvent {
    pub user_id: u64,
    pub item_id: u64,
    pub value: f64,
    pub timestamp: Option<i64>,
}

/// How raw source ratings map onto the common scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormalizationScheme {
    /// Source values already on `[1, 5]`.
    Identity1To5,
    /// Affine map `[-10, 10] -> [1, 5]`.
    JesterAffine,
    /// Arbitrary real vectors that are not ratings; see
    /// [`RatingMatrix::from_points`].
    Unscaled,
}

impl NormalizationScheme {
    pub fn source_range(self) -> (f64, f64) {
        match self {
            NormalizationScheme::Identity1To5 => (SCALE_MIN, SCALE_MAX),
            NormalizationScheme::JesterAffine => (-10.0, 10.0),
            NormalizationScheme::Unscaled => (f64::MIN, f64::MAX),
        }
    }

    fn range_label(self) -> &'static str {
        match self {
            NormalizationScheme::Identity1To5 => "[1, 5]",
            NormalizationScheme::JesterAffine => "[-10, 10]",
            NormalizationScheme::Unscaled => "finite reals",
        }
    }

    pub(crate) fn apply(self, raw: f64) -> Option<f64> {
        let (lo, hi) = self.source_range();
        if !(lo..=hi).contains(&raw) {
            return None;
        }
        Some(match self {
            NormalizationScheme::Identity1To5 | NormalizationScheme::Unscaled => raw,
            NormalizationScheme::JesterAffine => (raw + 10.0) / 5.0 + 1.0,
        })
    }
}

impl fmt::Display for NormalizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationScheme::Identity1To5 => "identity_1_to_5",
            NormalizationScheme::JesterAffine => "jester_affine",
            NormalizationScheme::Unscaled => "unscaled",
        })
    }
}

/// Maps a raw rating onto `[1, 5]`. Strictly monotone in `raw`.
pub fn normalize_rating(raw: f64, scheme: NormalizationScheme) -> Result<f64> {
    scheme.apply(raw).ok_or(Error::Range {
        line: None,
        value: raw,
        range: scheme.range_label(),
    })
}

/// Order in which a user's ratings are revealed when building prefixes.
/// Ties always break by ascending item id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrefixOrdering {
    ByTimestamp,
    ByItemIndex,
}

impl fmt::Display for PrefixOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrefixOrdering::ByTimestamp => "by_timestamp",
            PrefixOrdering::ByItemIndex => "by_item_index",
        })
    }
}

impl FromStr for PrefixOrdering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_timestamp" => Ok(PrefixOrdering::ByTimestamp),
            "by_item_index" => Ok(PrefixOrdering::ByItemIndex),
            other => Err(Error::arg(format!("unknown prefix ordering {other:?}"))),
        }
    }
}

/// A sparse vector over the item index space: strictly increasing indices
/// with one value each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRow {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::arg(format!(
                "sparse row has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("sparse row indices must be strictly increasing"));
        }
        Ok(SparseRow { indices, values })
    }

    /// Builds a row from unordered `(index, value)` pairs.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let (indices, values) = pairs.into_iter().unzip();
        Self::new(indices, values)
    }

    /// Row holding every coordinate of `dense`, zeros included.
    pub fn from_dense(dense: &[f64]) -> Self {
        SparseRow {
            indices: (0..dense.len() as u32).collect(),
            values: dense.to_vec(),
        }
    }

    pub(crate) fn from_sorted(indices: Vec<u32>, values: Vec<f64>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(indices.len(), values.len());
        SparseRow { indices, values }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> Option<f64> {
        self.indices
            .binary_search(&index)
            .ok()
            .map(|pos| self.values[pos])
    }

    /// Largest index plus one, or 0 for an empty row.
    pub fn min_dimension(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }
}

/// Users x items rating matrix stored as one sparse row per user.
///
/// User and item indices are dense `0..n`; `user_ids` / `item_ids` map them
/// back to the source identifiers, both sorted ascending when built from
/// events.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    rows: Vec<SparseRow>,
    /// Parallel to `rows`: timestamp of each stored rating.
    timestamps: Option<Vec<Vec<i64>>>,
    n_items: usize,
    user_ids: Vec<u64>,
    item_ids: Vec<u64>,
    scheme: NormalizationScheme,
}

impl RatingMatrix {
    pub fn new(
        rows: Vec<SparseRow>,
        n_items: usize,
        user_ids: Vec<u64>,
        item_ids: Vec<u64>,
        scheme: NormalizationScheme,
        timestamps: Option<Vec<Vec<i64>>>,
    ) -> Result<Self> {
        if user_ids.len() != rows.len() {
            return Err(Error::arg(format!(
                "{} user ids for {} rows",
                user_ids.len(),
                rows.len()
            )));
        }
        if item_ids.len() != n_items {
            return Err(Error::arg(format!(
                "{} item ids for {} items",
                item_ids.len(),
                n_items
            )));
        }
        for (u, row) in rows.iter().enumerate() {
            if row.min_dimension() > n_items {
                return Err(Error::arg(format!("row {u} indexes past {n_items} items")));
            }
            let (lo, hi) = match scheme {
                NormalizationScheme::Unscaled => (f64::MIN, f64::MAX),
                _ => (SCALE_MIN, SCALE_MAX),
            };
            if let Some(&bad) = row.values().iter().find(|v| !(lo..=hi).contains(*v)) {
                return Err(Error::arg(format!(
                    "row {u} holds value {bad} outside [{lo}, {hi}]"
                )));
            }
        }
        if let Some(ts) = &timestamps {
            if ts.len() != rows.len() || ts.iter().zip(&rows).any(|(t, r)| t.len() != r.len()) {
                return Err(Error::arg("timestamps do not line up with rows"));
            }
        }
        Ok(RatingMatrix {
            rows,
            timestamps,
            n_items,
            user_ids,
            item_ids,
            scheme,
        })
    }

    /// A point set that is not rating data: any finite values, users and
    /// items identified by their index.
    pub fn from_points(rows: Vec<SparseRow>, n_items: usize) -> Result<Self> {
        let n = rows.len() as u64;
        Self::new(
            rows,
            n_items,
            (0..n).collect(),
            (0..n_items as u64).collect(),
            NormalizationScheme::Unscaled,
            None,
        )
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_ratings(&self) -> usize {
        self.rows.iter().map(SparseRow::len).sum()
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, user: usize) -> Result<&SparseRow> {
        self.rows
            .get(user)
            .ok_or_else(|| Error::arg(format!("unknown user index {user}")))
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    pub fn scheme(&self) -> NormalizationScheme {
        self.scheme
    }

    pub fn has_timestamps(&self) -> bool {
        self.timestamps.is_some()
    }

    pub fn row_timestamps(&self, user: usize) -> Option<&[i64]> {
        self.timestamps.as_ref().map(|ts| ts[user].as_slice())
    }

    /// Copy of this matrix with each row replaced by `f(user, row)`. Rows may
    /// only lose entries; timestamps follow the surviving entries.
    pub(crate) fn retain_entries(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut stamps = self
            .timestamps
            .as_ref()
            .map(|_| Vec::with_capacity(self.rows.len()));
        for (u, row) in self.rows.iter().enumerate() {
            let mut idx = Vec::new();
            let mut val = Vec::new();
            let mut ts = Vec::new();
            for pos in 0..row.len() {
                if keep(u, pos) {
                    idx.push(row.indices[pos]);
                    val.push(row.values[pos]);
                    if let Some(all) = &self.timestamps {
                        ts.push(all[u][pos]);
                    }
                }
            }
            rows.push(SparseRow::from_sorted(idx, val));
            if let Some(s) = stamps.as_mut() {
                s.push(ts);
            }
        }
        RatingMatrix {
            rows,
            timestamps: stamps,
            n_items: self.n_items,
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
            scheme: self.scheme,
        }
    }

    /// SHA-256 over shape, indices and value bits.
    pub fn checksum(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.rows.len() as u64).to_le_bytes());
        h.update((self.n_items as u64).to_le_bytes());
        for row in &self.rows {
            h.update((row.len() as u64).to_le_bytes());
            for (i, v) in row.iter() {
                h.update(i.to_le_bytes());
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

/// Resolution of repeated `(user, item)` pairs in [`build_matrix`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DedupPolicy {
    #[default]
    KeepLast,
    KeepFirst,
}

/// Assembles normalized events into a matrix. Users and items are indexed in
/// ascending id order.
pub fn build_matrix(
    events: &[RatingEvent],
    scheme: NormalizationScheme,
    dedup: DedupPolicy,
) -> Result<RatingMatrix> {
    let with_ts = events.iter().filter(|e| e.timestamp.is_some()).count();
    if with_ts != 0 && with_ts != events.len() {
        return Err(Error::arg(
            "events mix timestamped and untimestamped ratings",
        ));
    }
    if let Some(bad) = events
        .iter()
        .find(|e| !(SCALE_MIN..=SCALE_MAX).contains(&e.value))
    {
        return Err(Error::Range {
            line: None,
            value: bad.value,
            range: "[1, 5]",
        });
    }

    let mut user_ids: Vec<u64> = events.iter().map(|e| e.user_id).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut item_ids: Vec<u64> = events.iter().map(|e| e.item_id).collect();
    item_ids.sort_unstable();
    item_ids.dedup();

    // (user index, item index, position in input)
    let mut keyed: Vec<(u32, u32, usize)> = events
        .iter()
        .enumerate()
        .map(|(pos, e)| {
            let u = user_ids.binary_search(&e.user_id).expect("user id indexed") as u32;
            let i = item_ids.binary_search(&e.item_id).expect("item id indexed") as u32;
            (u, i, pos)
        })
        .collect();
    keyed.sort_unstable();

    let mut rows: Vec<SparseRow> = vec![SparseRow::default(); user_ids.len()];
    let mut stamps: Vec<Vec<i64>> = vec![Vec::new(); if with_ts > 0 { user_ids.len() } else { 0 }];
    let mut start = 0;
    while start < keyed.len() {
        let (u, i, _) = keyed[start];
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 == u && keyed[end].1 == i {
            end += 1;
        }
        let pos = match dedup {
            DedupPolicy::KeepLast => keyed[end - 1].2,
            DedupPolicy::KeepFirst => keyed[start].2,
        };
        let row = &mut rows[u as usize];
        row.indices.push(i);
        row.values.push(events[pos].value);
        if with_ts > 0 {
            stamps[u as usize].push(events[pos].timestamp.expect("checked above"));
        }
        start = end;
    }

    let n_items = item_ids.len();
    RatingMatrix::new(
        rows,
        n_items,
        user_ids,
        item_ids,
        scheme,
        (with_ts > 0).then_some(stamps),
    )
}

/// Keeps exactly the users with at least `min_count` ratings. The item index
/// space is left untouched.
pub fn filter_min_ratings(m: &RatingMatrix, min_count: usize) -> Result<RatingMatrix> {
    let keep: Vec<usize> = (0..m.n_users())
        .filter(|&u| m.rows[u].len() >= min_count)
        .collect();
    if keep.is_empty() {
        return Err(Error::Empty(format!(
            "no user has at least {min_count} ratings"
        )));
    }
    Ok(select_users(m, &keep))
}

/// Sub-matrix of the given users, in the given order.
pub fn select_users(m: &RatingMatrix, users: &[usize]) -> RatingMatrix {
    RatingMatrix {
        rows: users.iter().map(|&u| m.rows[u].clone()).collect(),
        timestamps: m
            .timestamps
            .as_ref()
            .map(|ts| users.iter().map(|&u| ts[u].clone()).collect()),
        n_items: m.n_items,
        user_ids: users.iter().map(|&u| m.user_ids[u]).collect(),
        item_ids: m.item_ids.clone(),
        scheme: m.scheme,
    }
}

/// `n` distinct user indices drawn uniformly without replacement.
pub fn sample_users(m: &RatingMatrix, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > m.n_users() {
        return Err(Error::arg(format!(
            "cannot sample {n} users from {}",
            m.n_users()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, m.n_users(), n).into_vec())
}

/// Positions within `user`'s row in the order ratings are revealed.
pub fn prefix_order(m: &RatingMatrix, user: usize, ordering: PrefixOrdering) -> Result<Vec<usize>> {
    let row = m.row(user)?;
    let mut order: Vec<usize> = (0..row.len()).collect();
    if ordering == PrefixOrdering::ByTimestamp {
        let ts = m
            .row_timestamps(user)
            .ok_or_else(|| Error::arg("by_timestamp ordering needs timestamped ratings"))?;
        // Item indices follow ascending item id, so position breaks ties.
        order.sort_by_key(|&p| (ts[p], p));
    }
    Ok(order)
}

/// Row built from the first `t` positions of `order`, re-sorted by item index.
pub fn prefix_from_order(row: &SparseRow, order: &[usize], t: usize) -> SparseRow {
    let mut positions: Vec<usize> = order[..t.min(order.len())].to_vec();
    positions.sort_unstable();
    SparseRow::from_sorted(
        positions.iter().map(|&p| row.indices[p]).collect(),
        positions.iter().map(|&p| row.values[p]).collect(),
    )
}

/// The user's first `min(t, len)` ratings under `ordering`.
pub fn prefix(
    m: &RatingMatrix,
    user: usize,
    t: usize,
    ordering: PrefixOrdering,
) -> Result<SparseRow> {
    let order = prefix_order(m, user, ordering)?;
    Ok(prefix_from_order(m.row(user)?, &order, t))
}
