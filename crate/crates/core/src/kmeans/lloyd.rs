use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{fingerprint, nearest, sq_dist, sq_norm, ClusterModel, Init, KMeansConfig};
use crate::dataset::{RatingMatrix, SparseRow};
use crate::error::{Error, Result};

/// What happened in one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// SSE after each completed (assign, update) step.
    pub sse_history: Vec<f64>,
    /// SSE of the run's final, argmin-consistent assignment.
    pub final_sse: f64,
    pub steps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub runs: Vec<RunTrace>,
    pub best_run: usize,
}

/// Best of `cfg.restarts` Lloyd runs by final SSE.
pub fn fit(m: &RatingMatrix, cfg: &KMeansConfig) -> Result<ClusterModel> {
    fit_traced(m, cfg).map(|(model, _)| model)
}

pub fn fit_traced(m: &RatingMatrix, cfg: &KMeansConfig) -> Result<(ClusterModel, FitTrace)> {
    cfg.validate()?;
    if m.n_users() == 0 || m.n_items() == 0 {
        return Err(Error::arg("cannot cluster an empty matrix"));
    }
    if cfg.n_clusters > m.n_users() {
        return Err(Error::arg(format!(
            "{} clusters requested for {} users",
            cfg.n_clusters,
            m.n_users()
        )));
    }

    let rows = m.rows();
    let mut best: Option<(Run, usize)> = None;
    let mut traces = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
        let run = lloyd(rows, m.n_items(), cfg, &mut rng);
        log::debug!(
            "restart {r}: sse {} after {} steps (converged: {})",
            run.trace.final_sse,
            run.trace.steps,
            run.trace.converged
        );
        traces.push(run.trace.clone());
        if best
            .as_ref()
            .is_none_or(|(b, _)| run.trace.final_sse < b.trace.final_sse)
        {
            best = Some((run, r));
        }
    }
    let (run, best_run) = best.expect("at least one restart");
    let model = ClusterModel::from_parts(
        run.centroids,
        run.assignments,
        cfg.seed,
        rows,
        fingerprint(cfg, m),
    );
    Ok((
        model,
        FitTrace {
            runs: traces,
            best_run,
        },
    ))
}

struct Run {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    trace: RunTrace,
}

fn lloyd(rows: &[SparseRow], n_items: usize, cfg: &KMeansConfig, rng: &mut ChaCha8Rng) -> Run {
    let k = cfg.n_clusters;
    let mut centroids = match cfg.init {
        Init::KMeansPlusPlus => init_plus_plus(rows, n_items, k, rng),
        Init::RandomPoints => rand::seq::index::sample(rng, rows.len(), k)
            .into_iter()
            .map(|u| rows[u].to_dense(n_items))
            .collect(),
    };
    let mut norms: Vec<f64> = centroids.iter().map(|c| sq_norm(c)).collect();
    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut steps = 0;

    while steps < cfg.max_steps {
        let (mut next, mut dist) = assign_all(rows, &centroids, &norms);
        let repaired = repair_empty(
            rows,
            n_items,
            &mut next,
            &mut dist,
            &mut centroids,
            &mut norms,
        );
        if !repaired && next == assignments {
            // Centroids are already the means of this assignment.
            converged = true;
            break;
        }
        assignments = next;
        steps += 1;

        let updated = cluster_means(rows, n_items, &assignments, &centroids);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt();
        centroids = updated;
        norms = centroids.iter().map(|c| sq_norm(c)).collect();
        history.push(total_sse(rows, &assignments, &centroids, &norms));
        if shift < cfg.conv_tol {
            converged = true;
            break;
        }
    }

    // Leave every user on its nearest centroid, repairing any cluster this
    // empties. Each round can only lower the SSE.
    let mut next = Vec::new();
    for _ in 0..=k {
        let (a, mut dist) = assign_all(rows, &centroids, &norms);
        next = a;
        if !repair_empty(
            rows,
            n_items,
            &mut next,
            &mut dist,
            &mut centroids,
            &mut norms,
        ) {
            break;
        }
    }
    assignments = next;
    let final_sse = total_sse(rows, &assignments, &centroids, &norms);

    Run {
        centroids,
        assignments,
        trace: RunTrace {
            sse_history: history,
            final_sse,
            steps,
            converged,
        },
    }
}

fn init_plus_plus(
    rows: &[SparseRow],
    n_items: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..rows.len());
    let mut centroids = vec![rows[first].to_dense(n_items)];
    let norm = sq_norm(&centroids[0]);
    let mut d2: Vec<f64> = rows
        .par_iter()
        .map(|r| sq_dist(r, &centroids[0], norm))
        .collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (u, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(u);
                    break;
                }
            }
            // Rounding can leave `target` just past the final sum.
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            rng.random_range(0..rows.len())
        };
        let c = rows[pick].to_dense(n_items);
        let norm = sq_norm(&c);
        d2.par_iter_mut()
            .zip(rows.par_iter())
            .for_each(|(d, r)| *d = d.min(sq_dist(r, &c, norm)));
        centroids.push(c);
    }
    centroids
}

fn assign_all(rows: &[SparseRow], centroids: &[Vec<f64>], norms: &[f64]) -> (Vec<usize>, Vec<f64>) {
    rows.par_iter()
        .map(|r| nearest(r, centroids, norms))
        .unzip()
}

/// Gives every empty cluster the point currently farthest from its centroid
/// (taken from a cluster with at least two members). Returns whether any
/// cluster was repaired.
fn repair_empty(
    rows: &[SparseRow],
    n_items: usize,
    assignments: &mut [usize],
    dist: &mut [f64],
    centroids: &mut [Vec<f64>],
    norms: &mut [f64],
) -> bool {
    let mut sizes = vec![0usize; centroids.len()];
    for &j in assignments.iter() {
        sizes[j] += 1;
    }
    let mut repaired = false;
    for j in 0..centroids.len() {
        if sizes[j] > 0 {
            continue;
        }
        let donor = (0..rows.len())
            .filter(|&u| sizes[assignments[u]] > 1 && dist[u] > 0.0)
            .fold(None, |best: Option<usize>, u| match best {
                Some(b) if dist[b] >= dist[u] => Some(b),
                _ => Some(u),
            });
        let Some(u) = donor else {
            continue;
        };
        sizes[assignments[u]] -= 1;
        sizes[j] = 1;
        assignments[u] = j;
        dist[u] = 0.0;
        centroids[j] = rows[u].to_dense(n_items);
        norms[j] = sq_norm(&centroids[j]);
        repaired = true;
    }
    repaired
}

/// Coordinate-wise member means, unrated coordinates counting as 0.0. Empty
/// clusters keep their previous centroid. Members are summed in user order.
fn cluster_means(
    rows: &[SparseRow],
    n_items: usize,
    assignments: &[usize],
    previous: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); previous.len()];
    for (u, &j) in assignments.iter().enumerate() {
        members[j].push(u);
    }
    members
        .par_iter()
        .zip(previous.par_iter())
        .map(|(users, prev)| {
            if users.is_empty() {
                return prev.clone();
            }
            let mut sum = vec![0.0; n_items];
            for &u in users {
                for (i, v) in rows[u].iter() {
                    sum[i as usize] += v;
                }
            }
            let n = users.len() as f64;
            sum.iter_mut().for_each(|s| *s /= n);
            sum
        })
        .collect()
}

fn total_sse(
    rows: &[SparseRow],
    assignments: &[usize],
    centroids: &[Vec<f64>],
    norms: &[f64],
) -> f64 {
    let per_user: Vec<f64> = rows
        .par_iter()
        .zip(assignments.par_iter())
        .map(|(r, &j)| sq_dist(r, &centroids[j], norms[j]))
        .collect();
    per_user.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::sse;
    use crate::kmeans::tests::dense_matrix;

    #[test]
    fn toy_two_clusters() {
        let m = dense_matrix(&[vec![0.0], vec![1.0], vec![10.0], vec![11.0]]);
        let model = fit(&m, &KMeansConfig::new(2, 3)).unwrap();
        let mut c: Vec<f64> = model.centroids().iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.5, 10.5]);
        assert_eq!(model.sse(), 1.0);
    }

    #[test]
    fn one_cluster_per_user() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = dense_matrix(&pts);
        let model = fit(&m, &KMeansConfig::new(6, 0)).unwrap();
        assert_eq!(model.sse(), 0.0);
        assert!(model.cluster_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn deterministic_for_seed() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64, ((i * 13) % 5) as f64, (i % 3) as f64])
            .collect();
        let m = dense_matrix(&pts);
        let cfg = KMeansConfig::new(4, 17);
        assert_eq!(fit(&m, &cfg).unwrap(), fit(&m, &cfg).unwrap());
        let random = KMeansConfig {
            init: Init::RandomPoints,
            ..cfg
        };
        assert_eq!(fit(&m, &random).unwrap(), fit(&m, &random).unwrap());
    }

    #[test]
    fn argument_errors() {
        let m = dense_matrix(&[vec![0.0], vec![1.0]]);
        assert!(fit(&m, &KMeansConfig::new(3, 0)).is_err());
        let empty = RatingMatrix::new(
            vec![],
            0,
            vec![],
            vec![],
            crate::dataset::NormalizationScheme::Identity1To5,
            None,
        )
        .unwrap();
        assert!(fit(&empty, &KMeansConfig::new(1, 0)).is_err());
    }

    #[test]
    fn trace_is_monotone_and_best_is_kept() {
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let f = i as f64;
                vec![
                    (f * 1.7).sin() * 3.0 + 3.0,
                    (f * 0.3).cos() * 2.0,
                    (i % 4) as f64,
                ]
            })
            .collect();
        let m = dense_matrix(&pts);
        let (model, trace) = fit_traced(&m, &KMeansConfig::new(5, 9)).unwrap();
        for run in &trace.runs {
            for w in run.sse_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
            }
            if let Some(&last) = run.sse_history.last() {
                assert!(run.final_sse <= last * (1.0 + 1e-12));
            }
            assert!(model.sse() <= run.final_sse);
        }
        assert_eq!(model.sse(), trace.runs[trace.best_run].final_sse);
        assert_eq!(sse(&model, &m).unwrap(), model.sse());
        assert!(model.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn duplicate_points_still_fit() {
        let m = dense_matrix(&[vec![1.0], vec![1.0], vec![1.0], vec![2.0]]);
        let model = fit(&m, &KMeansConfig::new(3, 0)).unwrap();
        assert_eq!(model.sse(), 0.0);
    }
}
