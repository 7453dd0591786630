use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::dataset::{prefix_from_order, prefix_order, PrefixOrdering, RatingMatrix};
use crate::error::{Error, Result};
use crate::kmeans::ClusterModel;
use crate::quality::davies_bouldin;

/// Cluster a user lands in after each of their first ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub user: usize,
    /// Cluster of the full history.
    pub final_cluster: usize,
    /// `prefix_clusters[t - 1]` is the cluster of the first `t` ratings, for
    /// `t = 1..=min(t_max, history length)`.
    pub prefix_clusters: Vec<usize>,
    pub history_len: usize,
}

impl Trajectory {
    /// Cluster after `t` ratings; saturates at the full history.
    pub fn cluster_at(&self, t: usize) -> usize {
        if t >= self.history_len {
            self.final_cluster
        } else {
            self.prefix_clusters[t - 1]
        }
    }
}

/// Replays each user's ratings against the model's frozen centroids.
pub fn trajectories(
    model: &ClusterModel,
    m: &RatingMatrix,
    users: &[usize],
    t_max: usize,
    ordering: PrefixOrdering,
) -> Result<Vec<Trajectory>> {
    if users.is_empty() {
        return Err(Error::arg("no users to evaluate"));
    }
    if t_max < 1 {
        return Err(Error::arg("t_max must be at least 1"));
    }
    users
        .par_iter()
        .map(|&user| {
            let row = m.row(user)?;
            let order = prefix_order(m, user, ordering)?;
            let final_cluster = model.assign(row)?.0;
            let prefix_clusters = (1..=t_max.min(row.len()))
                .map(|t| {
                    model
                        .assign(&prefix_from_order(row, &order, t))
                        .map(|a| a.0)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Trajectory {
                user,
                final_cluster,
                prefix_clusters,
                history_len: row.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessPoint {
    pub t: usize,
    pub success_fraction: f64,
    /// Users with at least `t` ratings.
    pub n_evaluated: usize,
}

/// Share of users whose `t`-rating prefix lands in their final cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCurve {
    pub points: Vec<SuccessPoint>,
}

impl SuccessCurve {
    /// Aggregates trajectories; `t` values no user reaches are omitted.
    pub fn from_trajectories(trajs: &[Trajectory], t_max: usize) -> Self {
        let mut points = Vec::new();
        for t in 1..=t_max {
            let (hits, n) = trajs.iter().filter(|tr| tr.history_len >= t).fold(
                (0usize, 0usize),
                |(h, n), tr| {
                    (
                        h + usize::from(tr.prefix_clusters[t - 1] == tr.final_cluster),
                        n + 1,
                    )
                },
            );
            if n > 0 {
                points.push(SuccessPoint {
                    t,
                    success_fraction: hits as f64 / n as f64,
                    n_evaluated: n,
                });
            }
        }
        SuccessCurve { points }
    }

    pub fn ts(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.success_fraction).collect()
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,success_fraction,n_evaluated")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.t, p.success_fraction, p.n_evaluated)?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let points = read_rows(input, "t,success_fraction,n_evaluated", |f, line| {
            Ok(SuccessPoint {
                t: field(f[0], line)?,
                success_fraction: field(f[1], line)?,
                n_evaluated: field(f[2], line)?,
            })
        })?;
        Ok(SuccessCurve { points })
    }
}

pub fn success_curve(
    model: &ClusterModel,
    m: &RatingMatrix,
    users: &[usize],
    t_max: usize,
    ordering: PrefixOrdering,
) -> Result<SuccessCurve> {
    let trajs = trajectories(model, m, users, t_max, ordering)?;
    Ok(SuccessCurve::from_trajectories(&trajs, t_max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityPoint {
    pub t: usize,
    /// Mean signed Davies-Bouldin term of the clusters users occupy after `t`
    /// ratings (full history once `t` exceeds it).
    pub current_quality_mean: f64,
    /// Same for the final clusters; constant in `t`.
    pub reference_quality_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityCurve {
    pub points: Vec<QualityPoint>,
}

impl QualityCurve {
    /// `model` must be fitted on `m`; cluster terms come from its
    /// Davies-Bouldin decomposition.
    pub fn from_trajectories(
        model: &ClusterModel,
        m: &RatingMatrix,
        trajs: &[Trajectory],
        t_max: usize,
    ) -> Result<Self> {
        if trajs.is_empty() {
            return Err(Error::arg("no users to evaluate"));
        }
        let quality = davies_bouldin(model, m)?;
        let n = trajs.len() as f64;
        let mean_at = |cluster_of: &dyn Fn(&Trajectory) -> usize| -> Result<f64> {
            let mut sum = 0.0;
            for tr in trajs {
                sum += quality.signed_term(cluster_of(tr))?;
            }
            Ok(sum / n)
        };
        let reference = mean_at(&|tr| tr.final_cluster)?;
        let points = (1..=t_max)
            .map(|t| {
                Ok(QualityPoint {
                    t,
                    current_quality_mean: mean_at(&|tr| tr.cluster_at(t))?,
                    reference_quality_mean: reference,
                })
            })
            .collect::<Result<_>>()?;
        Ok(QualityCurve { points })
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,current_quality_mean,reference_quality_mean")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{}",
                p.t, p.current_quality_mean, p.reference_quality_mean
            )?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let points = read_rows(
            input,
            "t,current_quality_mean,reference_quality_mean",
            |f, line| {
                Ok(QualityPoint {
                    t: field(f[0], line)?,
                    current_quality_mean: field(f[1], line)?,
                    reference_quality_mean: field(f[2], line)?,
                })
            },
        )?;
        Ok(QualityCurve { points })
    }
}

pub fn quality_curve(
    model: &ClusterModel,
    m: &RatingMatrix,
    users: &[usize],
    t_max: usize,
    ordering: PrefixOrdering,
) -> Result<QualityCurve> {
    let trajs = trajectories(model, m, users, t_max, ordering)?;
    QualityCurve::from_trajectories(model, m, &trajs, t_max)
}

fn read_rows<T>(
    input: impl BufRead,
    header: &str,
    parse: impl Fn(&[&str], usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if n == 0 {
            if line != header {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header {header:?}"),
                });
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: n + 1,
                message: "expected 3 fields".into(),
            });
        }
        out.push(parse(&f, n + 1)?);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {s:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SparseRow;

    fn setup() -> (ClusterModel, RatingMatrix) {
        // Two groups separated on items 0-1 vs 2-3; item 4 is noise.
        let rows = vec![
            SparseRow::from_pairs(vec![(0, 5.0), (1, 5.0), (4, 1.0)]).unwrap(),
            SparseRow::from_pairs(vec![(0, 4.0), (1, 5.0)]).unwrap(),
            SparseRow::from_pairs(vec![(2, 5.0), (3, 4.0), (4, 5.0)]).unwrap(),
            SparseRow::from_pairs(vec![(4, 5.0), (2, 5.0), (3, 5.0), (0, 1.0)]).unwrap(),
        ];
        let m = RatingMatrix::from_points(rows, 5).unwrap();
        let model = ClusterModel::from_centroids(
            vec![vec![4.5, 5.0, 0.0, 0.0, 0.5], vec![0.5, 0.0, 5.0, 4.5, 5.0]],
            &m,
            0,
        )
        .unwrap();
        (model, m)
    }

    #[test]
    fn saturation_gives_full_success() {
        let (model, m) = setup();
        let users = [0, 1, 2, 3];
        let curve = success_curve(&model, &m, &users, 10, PrefixOrdering::ByItemIndex).unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!(last.t, 4);
        assert_eq!((last.success_fraction, last.n_evaluated), (1.0, 1));
        assert_eq!(curve.points[0].n_evaluated, 4);
        let trajs = trajectories(&model, &m, &users, 10, PrefixOrdering::ByItemIndex).unwrap();
        for tr in &trajs {
            assert_eq!(tr.prefix_clusters[tr.history_len - 1], tr.final_cluster);
        }
    }

    #[test]
    fn quality_current_meets_reference_at_saturation() {
        let (model, m) = setup();
        let q = quality_curve(&model, &m, &[0, 1, 2, 3], 6, PrefixOrdering::ByItemIndex).unwrap();
        assert_eq!(q.points.len(), 6);
        let r = q.points[0].reference_quality_mean;
        assert!(q
            .points
            .iter()
            .all(|p| p.reference_quality_mean == r && r <= 0.0));
        for p in &q.points[3..] {
            assert_eq!(p.current_quality_mean, p.reference_quality_mean);
        }
    }

    #[test]
    fn empty_users_rejected() {
        let (model, m) = setup();
        assert!(success_curve(&model, &m, &[], 3, PrefixOrdering::ByItemIndex).is_err());
        assert!(success_curve(&model, &m, &[0], 0, PrefixOrdering::ByItemIndex).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (model, m) = setup();
        let users = [3, 1, 0];
        let s = success_curve(&model, &m, &users, 4, PrefixOrdering::ByItemIndex).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(SuccessCurve::read_csv(buf.as_slice()).unwrap(), s);
        let q = quality_curve(&model, &m, &users, 4, PrefixOrdering::ByItemIndex).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        assert_eq!(QualityCurve::read_csv(buf.as_slice()).unwrap(), q);
        assert!(SuccessCurve::read_csv("a,b\n".as_bytes()).is_err());
    }
}
