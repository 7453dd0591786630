//! Seedable k-means over sparse rating rows.
//!
//! Unrated coordinates count as 0.0 both in distances and in centroid means.
//! Distances are squared Euclidean, computed in `O(nnz)` per row against a
//! dense centroid with a cached squared norm.

mod lloyd;
mod persist;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dataset::{RatingMatrix, SparseRow};
use crate::error::{Error, Result};

pub use lloyd::{fit, fit_traced, FitTrace, RunTrace};
pub use persist::{read_model, write_model, MODEL_MAGIC};

/// Centroid seeding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Init {
    KMeansPlusPlus,
    RandomPoints,
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::KMeansPlusPlus => "kmeanspp",
            Init::RandomPoints => "random_points",
        })
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeanspp" => Ok(Init::KMeansPlusPlus),
            "random_points" => Ok(Init::RandomPoints),
            other => Err(Error::arg(format!("unknown k-means init {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub n_clusters: usize,
    /// Independent Lloyd runs; the lowest final SSE wins.
    pub restarts: usize,
    /// Lloyd steps per run.
    pub max_steps: usize,
    /// A run stops once no centroid moves farther than this.
    pub conv_tol: f64,
    /// Run `r` is seeded with `seed + r`.
    pub seed: u64,
    pub init: Init,
}

impl KMeansConfig {
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        KMeansConfig {
            n_clusters,
            restarts: 10,
            max_steps: 100,
            conv_tol: 1e-6,
            seed,
            init: Init::KMeansPlusPlus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters < 1 || self.restarts < 1 || self.max_steps < 1 {
            return Err(Error::arg(
                "n_clusters, restarts and max_steps must all be at least 1",
            ));
        }
        if self.conv_tol.is_nan() || self.conv_tol <= 0.0 {
            return Err(Error::arg("conv_tol must be positive"));
        }
        Ok(())
    }
}

/// Number of clusters so that each holds about `k_coeff` users:
/// `ceil(n_users / k_coeff)` clamped to `[1, n_users]`.
pub fn n_clusters_from_coeff(n_users: usize, k_coeff: usize) -> usize {
    let k_coeff = k_coeff.max(1);
    n_users.div_ceil(k_coeff).clamp(1, n_users.max(1))
}

pub(crate) fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Squared distance between a zero-filled sparse row and a dense vector whose
/// squared norm is `norm`.
#[inline]
pub(crate) fn sq_dist(row: &SparseRow, dense: &[f64], norm: f64) -> f64 {
    let mut unrated = norm;
    let mut rated = 0.0;
    for (i, v) in row.iter() {
        let c = dense[i as usize];
        unrated -= c * c;
        let d = v - c;
        rated += d * d;
    }
    unrated.max(0.0) + rated
}

/// `sum_d (a_d - b_d)^2` with unrated coordinates of `a` taken as 0.0.
pub fn sq_euclidean(a: &SparseRow, b: &[f64]) -> Result<f64> {
    if a.min_dimension() > b.len() {
        return Err(Error::arg(format!(
            "row reaches dimension {} but vector has {}",
            a.min_dimension(),
            b.len()
        )));
    }
    Ok(sq_dist(a, b, sq_norm(b)))
}

/// Index and squared distance of the closest centroid; ties go to the lowest
/// index.
pub(crate) fn nearest(row: &SparseRow, centroids: &[Vec<f64>], norms: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, (c, &n)) in centroids.iter().zip(norms).enumerate() {
        let d = sq_dist(row, c, n);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// A fitted (or loaded) clustering of the users of one rating matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    centroids: Vec<Vec<f64>>,
    norms: Vec<f64>,
    assignments: Vec<usize>,
    sse: f64,
    seed: u64,
    fingerprint: Option<String>,
}

impl ClusterModel {
    /// Model with the given centroids; every user of `m` goes to its nearest
    /// centroid.
    pub fn from_centroids(centroids: Vec<Vec<f64>>, m: &RatingMatrix, seed: u64) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::arg("a model needs at least one centroid"));
        }
        if let Some(c) = centroids.iter().find(|c| c.len() != m.n_items()) {
            return Err(Error::arg(format!(
                "centroid has {} dimensions, matrix has {} items",
                c.len(),
                m.n_items()
            )));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("centroids must be finite"));
        }
        let norms: Vec<f64> = centroids.iter().map(|c| sq_norm(c)).collect();
        let assignments = m
            .rows()
            .par_iter()
            .map(|row| nearest(row, &centroids, &norms).0)
            .collect();
        let mut model = ClusterModel {
            centroids,
            norms,
            assignments,
            sse: 0.0,
            seed,
            fingerprint: None,
        };
        model.sse = model.recompute_sse(m.rows());
        Ok(model)
    }

    pub(crate) fn from_parts(
        centroids: Vec<Vec<f64>>,
        assignments: Vec<usize>,
        seed: u64,
        rows: &[SparseRow],
        fingerprint: String,
    ) -> Self {
        let norms = centroids.iter().map(|c| sq_norm(c)).collect();
        let mut model = ClusterModel {
            centroids,
            norms,
            assignments,
            sse: 0.0,
            seed,
            fingerprint: Some(fingerprint),
        };
        model.sse = model.recompute_sse(rows);
        model
    }

    fn recompute_sse(&self, rows: &[SparseRow]) -> f64 {
        let per_user: Vec<f64> = rows
            .par_iter()
            .zip(self.assignments.par_iter())
            .map(|(row, &j)| sq_dist(row, &self.centroids[j], self.norms[j]))
            .collect();
        per_user.iter().sum()
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn n_items(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn sse(&self) -> f64 {
        self.sse
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Hash of the fitting config and data; absent for loaded models.
    pub fn fingerprint(&self) -> Option<&str> {
        self.fingerprint.as_deref()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &j in &self.assignments {
            sizes[j] += 1;
        }
        sizes
    }

    /// Nearest centroid for `row` and its squared distance.
    pub fn assign(&self, row: &SparseRow) -> Result<(usize, f64)> {
        if row.min_dimension() > self.n_items() {
            return Err(Error::arg(format!(
                "row reaches dimension {} but model has {} items",
                row.min_dimension(),
                self.n_items()
            )));
        }
        Ok(nearest(row, &self.centroids, &self.norms))
    }

    pub(crate) fn check_shape(&self, m: &RatingMatrix) -> Result<()> {
        if m.n_users() != self.assignments.len() || m.n_items() != self.n_items() {
            return Err(Error::arg(format!(
                "model covers {} users x {} items, matrix is {} x {}",
                self.assignments.len(),
                self.n_items(),
                m.n_users(),
                m.n_items()
            )));
        }
        Ok(())
    }
}

/// Nearest centroid for `row`; see [`ClusterModel::assign`].
pub fn assign(model: &ClusterModel, row: &SparseRow) -> Result<(usize, f64)> {
    model.assign(row)
}

/// Total squared distance of users to their assigned centroids, recomputed.
pub fn sse(model: &ClusterModel, m: &RatingMatrix) -> Result<f64> {
    model.check_shape(m)?;
    Ok(model.recompute_sse(m.rows()))
}

pub(crate) fn fingerprint(cfg: &KMeansConfig, m: &RatingMatrix) -> String {
    let mut h = Sha256::new();
    h.update(format!("{cfg:?}").as_bytes());
    h.update(m.checksum());
    h.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn dense_matrix(points: &[Vec<f64>]) -> RatingMatrix {
        RatingMatrix::from_points(
            points.iter().map(|p| SparseRow::from_dense(p)).collect(),
            points[0].len(),
        )
        .unwrap()
    }

    #[test]
    fn coefficient_rule() {
        assert_eq!(n_clusters_from_coeff(69878, 50), 1398);
        assert_eq!(n_clusters_from_coeff(24983, 100), 250);
        assert_eq!(n_clusters_from_coeff(10, 100), 1);
        assert_eq!(n_clusters_from_coeff(10, 1), 10);
    }

    #[test]
    fn distance_examples() {
        let a = SparseRow::from_dense(&[2.0, 3.0]);
        assert_eq!(sq_euclidean(&a, &[2.0, 3.0]).unwrap(), 0.0);
        let a = SparseRow::new(vec![0], vec![3.0]).unwrap();
        assert_eq!(sq_euclidean(&a, &[1.0, 2.0]).unwrap(), 8.0);
        assert_eq!(
            sq_euclidean(&SparseRow::default(), &[1.0, 1.0]).unwrap(),
            2.0
        );
        let far = SparseRow::new(vec![2], vec![1.0]).unwrap();
        assert!(sq_euclidean(&far, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn assign_rules() {
        let m = dense_matrix(&[vec![0.0, 0.0]]);
        let centroids = vec![
            vec![5.0, 5.0],
            vec![1.0, 0.0],
            vec![4.0, 4.0],
            vec![2.0, 3.0],
            vec![-1.0, 0.0],
        ];
        let model = ClusterModel::from_centroids(centroids, &m, 0).unwrap();
        assert_eq!(
            model.assign(&SparseRow::from_dense(&[2.0, 3.0])).unwrap(),
            (3, 0.0)
        );
        // equidistant from centroids 1 and 4
        assert_eq!(
            model.assign(&SparseRow::from_dense(&[0.0, 0.0])).unwrap(),
            (1, 1.0)
        );
        assert!(model
            .assign(&SparseRow::from_dense(&[0.0, 0.0, 1.0]))
            .is_err());
    }

    #[test]
    fn toy_model_assignment_and_sse() {
        let m = dense_matrix(&[vec![0.0], vec![1.0], vec![10.0], vec![11.0]]);
        let model = ClusterModel::from_centroids(vec![vec![0.5], vec![10.5]], &m, 0).unwrap();
        assert_eq!(model.assignments(), &[0, 0, 1, 1]);
        assert_eq!(sse(&model, &m).unwrap(), 1.0);
        assert_eq!(model.sse(), 1.0);
        let row = SparseRow::new(vec![0], vec![9.0]).unwrap();
        assert_eq!(model.assign(&row).unwrap(), (1, 2.25));
    }

    #[test]
    fn sse_shape_mismatch() {
        let m = dense_matrix(&[vec![0.0], vec![1.0]]);
        let other = dense_matrix(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        let model = ClusterModel::from_centroids(vec![vec![0.5]], &m, 0).unwrap();
        assert!(sse(&model, &other).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = KMeansConfig::new(3, 1);
        assert!(cfg.validate().is_ok());
        cfg.conv_tol = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = KMeansConfig {
            restarts: 0,
            ..KMeansConfig::new(3, 1)
        };
        assert!(cfg.validate().is_err());
    }
}
