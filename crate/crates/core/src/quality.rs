//! Davies-Bouldin cluster validity.
//!
//! Scatter `S_j` is the mean Euclidean distance of cluster `j`'s members to
//! its centroid. Each cluster's term is
//! `D_j = max_{m != j} (S_j + S_m) / ||c_j - c_m||`, skipping pairs whose
//! centroids coincide, and the index is the mean of the `D_j`. Values are
//! also reported negated, so better clusterings approach 0 from below.

use crate::dataset::RatingMatrix;
use crate::error::{Error, Result};
use crate::kmeans::{sq_euclidean, ClusterModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterQuality {
    /// `S_j`; `None` for empty clusters.
    pub scatter: Vec<Option<f64>>,
    /// `D_j`; `None` for empty clusters and for clusters whose centroid
    /// coincides with every other usable centroid.
    pub db_term: Vec<Option<f64>>,
    pub db_index: f64,
    pub db_signed: f64,
}

impl ClusterQuality {
    /// `-D_j`.
    pub fn signed_term(&self, j: usize) -> Result<f64> {
        match self.db_term.get(j) {
            None => Err(Error::arg(format!(
                "cluster {j} out of range for {} clusters",
                self.db_term.len()
            ))),
            Some(None) if self.scatter[j].is_none() => Err(Error::DegenerateCluster(j)),
            Some(None) => Err(Error::DegenerateModel(format!(
                "centroid {j} coincides with every other centroid"
            ))),
            Some(Some(d)) => Ok(-d),
        }
    }
}

fn members(model: &ClusterModel, j: usize) -> impl Iterator<Item = usize> + '_ {
    model
        .assignments()
        .iter()
        .enumerate()
        .filter(move |&(_, &a)| a == j)
        .map(|(u, _)| u)
}

/// Mean Euclidean (not squared) distance of cluster `j`'s members to its
/// centroid.
pub fn cluster_scatter(model: &ClusterModel, m: &RatingMatrix, j: usize) -> Result<f64> {
    model.check_shape(m)?;
    if j >= model.n_clusters() {
        return Err(Error::arg(format!("cluster {j} out of range")));
    }
    scatter_of(model, m, j)?.ok_or(Error::DegenerateCluster(j))
}

fn scatter_of(model: &ClusterModel, m: &RatingMatrix, j: usize) -> Result<Option<f64>> {
    let c = model.centroid(j);
    let mut total = 0.0;
    let mut n = 0usize;
    for u in members(model, j) {
        total += sq_euclidean(&m.rows()[u], c)?.sqrt();
        n += 1;
    }
    Ok((n > 0).then(|| total / n as f64))
}

fn centroid_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn davies_bouldin(model: &ClusterModel, m: &RatingMatrix) -> Result<ClusterQuality> {
    model.check_shape(m)?;
    let k = model.n_clusters();

    // One pass over users for all scatters.
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (row, &j) in m.rows().iter().zip(model.assignments()) {
        sums[j] += sq_euclidean(row, model.centroid(j))?.sqrt();
        counts[j] += 1;
    }
    let scatter: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
        .collect();

    let usable: Vec<usize> = (0..k).filter(|&j| scatter[j].is_some()).collect();
    if usable.len() < 2 {
        return Err(Error::DegenerateModel(format!(
            "{} non-empty clusters, need at least 2",
            usable.len()
        )));
    }

    let mut db_term = vec![None; k];
    for &j in &usable {
        let sj = scatter[j].expect("usable");
        let mut worst: Option<f64> = None;
        for &o in &usable {
            if o == j {
                continue;
            }
            let d = centroid_distance(model.centroid(j), model.centroid(o));
            if d > 0.0 {
                let r = (sj + scatter[o].expect("usable")) / d;
                worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            }
        }
        db_term[j] = worst;
    }

    let terms: Vec<f64> = db_term.iter().flatten().copied().collect();
    if terms.is_empty() {
        return Err(Error::DegenerateModel("all centroids coincide".into()));
    }
    let db_index = terms.iter().sum::<f64>() / terms.len() as f64;
    Ok(ClusterQuality {
        scatter,
        db_term,
        db_index,
        db_signed: -db_index,
    })
}

/// `-D_j`: cluster `j`'s signed contribution to the index.
pub fn per_cluster_quality(model: &ClusterModel, m: &RatingMatrix, j: usize) -> Result<f64> {
    if j >= model.n_clusters() {
        return Err(Error::arg(format!("cluster {j} out of range")));
    }
    davies_bouldin(model, m)?.signed_term(j)
}
