//! Text model format:
//!
//! ```text
//! coldstart-kmeans v1 <n_clusters> <n_items> <seed> <sse>
//! <centroid 0: n_items space-separated values>
//! ...
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips `f64`
//! exactly.

use std::io::{BufRead, Write};

use super::ClusterModel;
use crate::dataset::RatingMatrix;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "coldstart-kmeans";
const VERSION: &str = "v1";

pub fn write_model(model: &ClusterModel, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "{MODEL_MAGIC} {VERSION} {} {} {} {:.16e}",
        model.n_clusters(),
        model.n_items(),
        model.seed(),
        model.sse()
    )?;
    for c in model.centroids() {
        let line: Vec<String> = c.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Loads centroids and re-derives assignments against `m`. Fails when the
/// recomputed SSE disagrees with the stored one.
pub fn read_model(input: impl BufRead, m: &RatingMatrix) -> Result<ClusterModel> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| bad(1, "empty model file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != MODEL_MAGIC || fields[1] != VERSION {
        return Err(bad(1, "not a coldstart-kmeans v1 header"));
    }
    let n_clusters: usize = num(fields[2], 1)?;
    let n_items: usize = num(fields[3], 1)?;
    let seed: u64 = num(fields[4], 1)?;
    let stored_sse: f64 = num(fields[5], 1)?;

    let mut centroids = Vec::with_capacity(n_clusters);
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c = line
            .split_whitespace()
            .map(|f| num::<f64>(f, line_no))
            .collect::<Result<Vec<_>>>()?;
        if c.len() != n_items {
            return Err(bad(line_no, "centroid length differs from header"));
        }
        centroids.push(c);
    }
    if centroids.len() != n_clusters {
        return Err(bad(1, "centroid count differs from header"));
    }

    let model = ClusterModel::from_centroids(centroids, m, seed)?;
    let tol = 1e-9 * stored_sse.abs().max(1.0);
    if (model.sse() - stored_sse).abs() > tol {
        return Err(Error::arg(format!(
            "model SSE {stored_sse} does not match {} recomputed on this data",
            model.sse()
        )));
    }
    Ok(model)
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| bad(line, &format!("cannot parse {s:?}")))
}

fn bad(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}
